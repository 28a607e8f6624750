"""Interactive-fiction runtime: parsing, state transitions, exploration score.

The score is the number of distinct rooms entered plus entities examined;
the game counts as complete once it reaches half the maximum (rounded up).
Sessions are single-threaded (callers serialize steps per session); two
sessions never share state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import StoryworldError
from .gamegen import GameWorld, half_score, validate_world

HELP_TEXT = (
    "Commands:\n"
    "  go [to] <exit>     - move to an adjacent room\n"
    "  examine <thing>    - inspect a character or object here ('x' works too)\n"
    "  look [at <thing>]  - show this room again, or inspect something\n"
    "  score              - show your exploration score\n"
    "  help               - this text\n"
    "  quit               - stop playing"
)

COMPLETION_BANNER = "*** You have explored enough of this world. Game complete! ***"


class EngineError(StoryworldError):
    pass


# --- commands ---------------------------------------------------------------

@dataclass(frozen=True)
class Go:
    room_id: str


@dataclass(frozen=True)
class Examine:
    entity_id: str


@dataclass(frozen=True)
class Look:
    pass


@dataclass(frozen=True)
class ScoreCmd:
    pass


@dataclass(frozen=True)
class Help:
    pass


@dataclass(frozen=True)
class Quit:
    pass


@dataclass(frozen=True)
class Unknown:
    raw: str
    message: str


Command = Go | Examine | Look | ScoreCmd | Help | Quit | Unknown


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def _join_names(names: list[str]) -> str:
    if not names:
        return ""
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def _resolve(target: str, candidates: dict[str, str]) -> tuple[str | None, list[str]]:
    """Match ``target`` against normalized names: exact, then unique prefix.

    Returns (resolved id, ambiguous display names).
    """
    normalized = {_normalize(name): (name, value) for name, value in candidates.items()}
    hit = normalized.get(target)
    if hit is not None:
        return hit[1], []
    prefixed = [(name, value) for key, (name, value) in normalized.items() if key.startswith(target)]
    if len(prefixed) == 1:
        return prefixed[0][1], []
    if len(prefixed) > 1:
        return None, [name for name, _ in prefixed]
    return None, []


class Session:
    """One play-through of a world.

    ``score`` and ``done`` are derived from the explored set, so the
    bookkeeping invariants hold by construction. ``completion`` selects the
    rule: ``pooled`` (default) finishes at half of rooms-plus-entities;
    ``split`` needs half of each category separately.
    """

    def __init__(self, world: GameWorld, completion: str = "pooled"):
        problems = validate_world(world)
        if problems:
            raise EngineError("world is not playable: " + "; ".join(problems))
        if completion not in ("pooled", "split"):
            raise EngineError(f"unknown completion mode {completion!r}")
        self.world = world
        self.completion = completion
        self.current_room = world.start_room
        self.explored: set[str] = {world.start_room}
        self.transcript: list[dict] = []
        self.ended = False
        self._announced_done = self.done

    @property
    def score(self) -> int:
        return len(self.explored)

    @property
    def done(self) -> bool:
        if self.completion == "pooled":
            return self.score >= half_score(self.world.max_score)
        rooms = sum(1 for x in self.explored if x in self.world.rooms)
        entities = self.score - rooms
        return rooms >= half_score(len(self.world.rooms)) and entities >= half_score(
            len(self.world.entities)
        )

    # --- rendering ---------------------------------------------------------

    def _room(self):
        return self.world.rooms[self.current_room]

    def render_room(self) -> str:
        room = self._room()
        exits = _join_names(list(room.exits.keys())) or "none"
        seen = _join_names([self.world.entities[e].name for e in room.entities]) or "nothing"
        return f"{room.name}\n{room.description}\nExits: {exits}\nYou see: {seen}"

    def score_line(self) -> str:
        return f"Score: {self.score}/{self.world.max_score}"

    def intro(self) -> str:
        return self.render_room()

    # --- parsing -------------------------------------------------------------

    def parse(self, raw: str) -> Command:
        """Total: every input maps to exactly one command value."""
        text = _normalize(raw)
        if not text:
            return Unknown(raw, "Say what? Type 'help' for the verb list.")
        words = text.split()
        verb, rest = words[0], " ".join(words[1:])

        if verb in ("score", "help", "quit") and not rest:
            return {"score": ScoreCmd(), "help": Help(), "quit": Quit()}[verb]
        if verb == "look":
            if not rest:
                return Look()
            if words[1] == "at" and len(words) > 2:
                return self._parse_examine(raw, " ".join(words[2:]))
            return Unknown(raw, "Try 'look' alone, or 'look at <thing>'.")
        if verb == "go":
            target = rest
            if words[1:2] == ["to"]:
                target = " ".join(words[2:])
            if not target:
                return Unknown(raw, "Go where? Name an exit.")
            return self._parse_go(raw, target)
        if verb in ("examine", "x"):
            if not rest:
                return Unknown(raw, "Examine what?")
            return self._parse_examine(raw, rest)
        return Unknown(raw, "I don't understand that. Type 'help' for the verb list.")

    def _parse_go(self, raw: str, target: str) -> Command:
        room = self._room()
        resolved, ambiguous = _resolve(target, dict(room.exits))
        if resolved is not None:
            return Go(resolved)
        if ambiguous:
            return Unknown(raw, f"Which exit do you mean: {_join_names(sorted(ambiguous))}?")
        return Unknown(raw, f"You can't go to '{target}' from here.")

    def _parse_examine(self, raw: str, target: str) -> Command:
        room = self._room()
        visible = {self.world.entities[e].name: e for e in room.entities}
        resolved, ambiguous = _resolve(target, visible)
        if resolved is not None:
            return Examine(resolved)
        if ambiguous:
            return Unknown(raw, f"Which one do you mean: {_join_names(sorted(ambiguous))}?")
        return Unknown(raw, f"You don't see '{target}' here.")

    # --- stepping --------------------------------------------------------------

    def step(self, command: Command) -> str:
        """Apply one command; the output always carries the score line."""
        body: str | None
        if isinstance(command, Go):
            if command.room_id not in self._room().exits.values():
                body = "You can't go there from here."
            else:
                self.current_room = command.room_id
                self.explored.add(command.room_id)
                body = self.render_room()
        elif isinstance(command, Examine):
            room = self._room()
            if command.entity_id not in room.entities:
                body = "You don't see that here."
            else:
                self.explored.add(command.entity_id)
                entity = self.world.entities[command.entity_id]
                body = f"{entity.name}\n{entity.blurb}"
        elif isinstance(command, Look):
            body = self.render_room()
        elif isinstance(command, ScoreCmd):
            body = None
        elif isinstance(command, Help):
            body = HELP_TEXT
        elif isinstance(command, Quit):
            self.ended = True
            body = "Goodbye."
        elif isinstance(command, Unknown):
            body = command.message
        else:
            raise EngineError(f"unknown command {command!r}")

        output = self.score_line() if body is None else f"{body}\n{self.score_line()}"
        if self.done and not self._announced_done:
            self._announced_done = True
            output = f"{output}\n{COMPLETION_BANNER}"
        return output

    def execute(self, raw: str) -> str:
        """Parse, step, and record the exchange on the transcript."""
        output = self.step(self.parse(raw))
        self.transcript.append({"input": raw, "output": output})
        return output


def new_session(world: GameWorld, completion: str = "pooled") -> tuple[Session, str]:
    """Start a session in the world's start room (which counts as explored)."""
    session = Session(world, completion=completion)
    intro = session.intro()
    session.transcript.append({"input": None, "output": intro})
    return session, intro


def parse(raw: str, session: Session) -> Command:
    return session.parse(raw)


def step(session: Session, command: Command) -> tuple[Session, str]:
    return session, session.step(command)
