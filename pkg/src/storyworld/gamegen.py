"""Compile a knowledge graph plus descriptions into a playable game file.

Locations become rooms, adjacency edges become symmetric exits labeled with
the destination room's name (navigation is "go to <room name>", not compass
directions), and containment edges place entities. The game file is
self-contained JSON; reading one re-checks every invariant.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import StoryworldError
from .flavor import EntityDescription
from .kg import KnowledgeGraph, Relation, VertexKind, is_connected, require_valid

logger = logging.getLogger(__name__)


class GameError(StoryworldError):
    pass


class GameSchemaError(GameError):
    pass


@dataclass(frozen=True)
class Room:
    id: str
    name: str
    description: str
    exits: dict = field(default_factory=dict)  # exit label -> room id
    entities: tuple[str, ...] = ()


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    kind: str  # "character" | "object"
    blurb: str


@dataclass(frozen=True)
class GameWorld:
    rooms: dict  # room id -> Room
    entities: dict  # entity id -> Entity
    start_room: str
    max_score: int
    metadata: dict = field(default_factory=dict)

    def room_of(self, entity_id: str) -> Room | None:
        for room in self.rooms.values():
            if entity_id in room.entities:
                return room
        return None


@dataclass(frozen=True)
class GameMetadata:
    story_id: str = "unknown"
    genre: str = "other"
    provenance: str = "neural"
    title: str | None = None
    start_room: str | None = None  # overrides the graph's start location


def half_score(max_score: int) -> int:
    """Exploration target: completion takes half the total score, rounded up."""
    return math.ceil(max_score / 2)


def _disambiguate(names: list[str]) -> list[str]:
    """Append ' (2)', ' (3)', ... to case-insensitive duplicate names."""
    counts: dict[str, int] = {}
    out: list[str] = []
    for name in names:
        key = name.lower()
        counts[key] = counts.get(key, 0) + 1
        if counts[key] == 1:
            out.append(name)
        else:
            logger.warning("duplicate name %r disambiguated as %r", name, f"{name} ({counts[key]})")
            out.append(f"{name} ({counts[key]})")
    return out


def compile_game(
    graph: KnowledgeGraph,
    descriptions: list[EntityDescription],
    config: GameMetadata | None = None,
) -> GameWorld:
    """Deterministically turn a connected graph into a game world.

    Requires exactly one description per vertex. Duplicate display names are
    disambiguated with a numeric suffix (warning, not error).
    """
    config = config or GameMetadata()
    require_valid(graph)
    if not is_connected(graph):
        raise GameError("cannot compile a disconnected graph")

    blurbs: dict[str, str] = {}
    for d in descriptions:
        if d.vertex_id in blurbs:
            raise GameError(f"vertex {d.vertex_id!r} has more than one description")
        blurbs[d.vertex_id] = d.text
    vertex_ids = {v.id for v in graph.vertices}
    missing = [v.id for v in graph.vertices if v.id not in blurbs]
    if missing:
        raise GameError(f"missing descriptions for: {', '.join(missing)}")
    unknown = sorted(set(blurbs) - vertex_ids)
    if unknown:
        raise GameError(f"descriptions for unknown vertices: {', '.join(unknown)}")

    display = dict(zip((v.id for v in graph.vertices), _disambiguate([v.name for v in graph.vertices])))

    locations = graph.by_kind(VertexKind.LOCATION)
    if not locations:
        raise GameError("a game needs at least one room")
    start_room = config.start_room or graph.start_location or locations[0].id
    if start_room not in {v.id for v in locations}:
        raise GameError(f"start room {start_room!r} is not a location in the graph")

    exits: dict[str, dict] = {v.id: {} for v in locations}
    placed: dict[str, list[str]] = {v.id: [] for v in locations}
    for e in graph.edges:
        if e.relation is Relation.NEXT_TO:
            exits[e.src][display[e.dst]] = e.dst
            exits[e.dst][display[e.src]] = e.src
        else:
            placed[e.src].append(e.dst)

    rooms = {
        v.id: Room(
            id=v.id,
            name=display[v.id],
            description=blurbs[v.id],
            exits=exits[v.id],
            entities=tuple(placed[v.id]),
        )
        for v in locations
    }
    entities = {
        v.id: Entity(id=v.id, name=display[v.id], kind=v.kind.value, blurb=blurbs[v.id])
        for v in graph.vertices
        if v.kind is not VertexKind.LOCATION
    }
    metadata = {
        "story_id": config.story_id,
        "title": config.title or config.story_id,
        "genre": config.genre,
        "provenance": graph.provenance.value,
    }
    world = GameWorld(
        rooms=rooms,
        entities=entities,
        start_room=start_room,
        max_score=len(rooms) + len(entities),
        metadata=metadata,
    )
    problems = validate_world(world)
    if problems:
        raise GameError("compiled world is invalid: " + "; ".join(problems))
    return world


def validate_world(world: GameWorld) -> list[str]:
    """Check every game-world invariant; empty list means playable."""
    problems: list[str] = []
    if world.start_room not in world.rooms:
        problems.append(f"start room {world.start_room!r} does not exist")
    placed: dict[str, int] = {}
    for room in world.rooms.values():
        for label, target in room.exits.items():
            if target not in world.rooms:
                problems.append(f"exit {label!r} of room {room.id!r} targets missing room {target!r}")
                continue
            back = world.rooms[target].exits.get(room.name)
            if back != room.id:
                problems.append(
                    f"exit {label!r} of room {room.id!r} is not symmetric "
                    f"(room {target!r} has no {room.name!r} exit back)"
                )
            if world.rooms[target].name != label:
                problems.append(f"exit {label!r} of room {room.id!r} is not the target room's name")
        for entity_id in room.entities:
            if entity_id not in world.entities:
                problems.append(f"room {room.id!r} places missing entity {entity_id!r}")
            placed[entity_id] = placed.get(entity_id, 0) + 1
    for entity_id in world.entities:
        if placed.get(entity_id, 0) != 1:
            problems.append(f"entity {entity_id!r} is placed {placed.get(entity_id, 0)} times (need 1)")
    if world.max_score != len(world.rooms) + len(world.entities):
        problems.append(
            f"max_score is {world.max_score}, expected {len(world.rooms) + len(world.entities)}"
        )
    if world.start_room in world.rooms:
        seen = {world.start_room}
        stack = [world.start_room]
        while stack:
            for target in world.rooms[stack.pop()].exits.values():
                if target in world.rooms and target not in seen:
                    seen.add(target)
                    stack.append(target)
        unreachable = sorted(set(world.rooms) - seen)
        if unreachable:
            problems.append(f"rooms unreachable from start: {', '.join(unreachable)}")
    return problems


def write_game(world: GameWorld) -> bytes:
    doc = {
        "metadata": world.metadata,
        "start_room": world.start_room,
        "max_score": world.max_score,
        "rooms": {
            room.id: {
                "name": room.name,
                "description": room.description,
                "exits": room.exits,
                "entities": list(room.entities),
            }
            for room in world.rooms.values()
        },
        "entities": {
            entity.id: {"name": entity.name, "kind": entity.kind, "blurb": entity.blurb}
            for entity in world.entities.values()
        },
    }
    return json.dumps(doc, indent=2, ensure_ascii=False).encode("utf-8")


def read_game(data: bytes | str) -> GameWorld:
    """Parse game JSON and re-validate every invariant."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise GameSchemaError(f"game bytes are not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GameSchemaError("game document must be a JSON object")
    for key in ("metadata", "start_room", "max_score", "rooms", "entities"):
        if key not in doc:
            raise GameSchemaError(f"game document is missing the {key!r} key")
    if not isinstance(doc["rooms"], dict) or not isinstance(doc["entities"], dict):
        raise GameSchemaError("rooms and entities must be JSON objects")

    rooms = {}
    for room_id, row in doc["rooms"].items():
        if not isinstance(row, dict) or not {"name", "description", "exits", "entities"} <= set(row):
            raise GameSchemaError(f"room {room_id!r} needs name, description, exits, entities")
        exits = row["exits"]
        if not isinstance(exits, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in exits.items()
        ):
            raise GameSchemaError(f"room {room_id!r} exits must map label to room id")
        rooms[room_id] = Room(
            id=room_id,
            name=str(row["name"]),
            description=str(row["description"]),
            exits=dict(exits),
            entities=tuple(str(e) for e in row["entities"]),
        )
    entities = {}
    for entity_id, row in doc["entities"].items():
        if not isinstance(row, dict) or not {"name", "kind", "blurb"} <= set(row):
            raise GameSchemaError(f"entity {entity_id!r} needs name, kind, blurb")
        if row["kind"] not in ("character", "object"):
            raise GameSchemaError(f"entity {entity_id!r} has unknown kind {row['kind']!r}")
        entities[entity_id] = Entity(
            id=entity_id, name=str(row["name"]), kind=str(row["kind"]), blurb=str(row["blurb"])
        )
    if not isinstance(doc["max_score"], int):
        raise GameSchemaError("max_score must be an integer")
    world = GameWorld(
        rooms=rooms,
        entities=entities,
        start_room=str(doc["start_room"]),
        max_score=doc["max_score"],
        metadata=dict(doc["metadata"]) if isinstance(doc["metadata"], dict) else {},
    )
    problems = validate_world(world)
    if problems:
        raise GameSchemaError("game file violates invariants: " + "; ".join(problems))
    return world


def load_game(path: str | Path) -> GameWorld:
    return read_game(Path(path).read_bytes())


def save_game(world: GameWorld, path: str | Path) -> None:
    Path(path).write_bytes(write_game(world))


def tutorial_world() -> GameWorld:
    """A tiny built-in world that exercises every verb."""
    rooms = {
        "location:foyer": Room(
            id="location:foyer",
            name="Foyer",
            description=(
                "A quiet entrance hall built for practice. Type 'look' to see a room "
                "again, 'examine' something to inspect it, 'go to' an exit to move, "
                "'score' to check progress, 'help' for the verb list, and 'quit' to stop."
            ),
            exits={"Library": "location:library"},
            entities=("object:signpost",),
        ),
        "location:library": Room(
            id="location:library",
            name="Library",
            description="Shelves of imaginary books. Examine the librarian, then try 'score'.",
            exits={"Foyer": "location:foyer"},
            entities=("character:librarian",),
        ),
    }
    entities = {
        "object:signpost": Entity(
            id="object:signpost",
            name="Signpost",
            kind="object",
            blurb="The signpost reads: explore rooms and examine things to raise your score.",
        ),
        "character:librarian": Entity(
            id="character:librarian",
            name="Librarian",
            kind="character",
            blurb="The librarian nods approvingly at anyone who examines things carefully.",
        ),
    }
    return GameWorld(
        rooms=rooms,
        entities=entities,
        start_room="location:foyer",
        max_score=4,
        metadata={"story_id": "tutorial", "title": "Tutorial", "genre": "other", "provenance": "rules"},
    )
