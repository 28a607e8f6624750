"""Command-line entry point: one subcommand per pipeline stage.

Every stage reads and writes the documented JSON schemas, so stages can be
run separately or chained with ``pipeline``. Seeds are explicit flags with
fixed defaults; nothing is derived from the clock.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import backends, corpus, engine, extraction, flavor, gamegen, kg, report, rules, server
from .errors import StoryworldError


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


@click.group()
def main():
    """Turn story plots into playable interactive fiction worlds."""


def _load_story(path: Path, genre: str, manifest: Path | None, title: str | None) -> corpus.StoryPlot:
    if manifest is not None:
        entries = corpus.load_manifest(manifest)
        meta = entries.get(path.name, {})
        title = title or meta.get("title")
        genre = meta.get("genre", genre)
    return corpus.load_story(path, corpus.parse_genre(genre), title=title)


def _extraction_config(config_path: Path | None, seed: int | None, top_k: int | None) -> extraction.ExtractionConfig:
    config = (
        extraction.ExtractionConfig.from_file(config_path)
        if config_path
        else extraction.ExtractionConfig()
    )
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if top_k is not None:
        updates["top_k"] = top_k
    if updates:
        from dataclasses import replace

        config = replace(config, **updates)
    return config


@main.command()
@click.argument("stories", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--method", type=click.Choice(["neural", "rules", "random"]), required=True)
@click.option("--genre", default="other", help="Genre tag when not in a manifest.")
@click.option("--title", default=None)
@click.option("--manifest", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--backend", "backend_spec", default=None, help="http(s) URL or fixture:PATH.")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--seed", type=int, default=None, help="Required for neural/random methods.")
@click.option("--top-k", type=int, default=None)
@click.option("--triples", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--annotations", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("-o", "--out", type=click.Path(path_type=Path), required=True,
              help="Graph file (single story) or directory (multiple).")
@click.option("--jobs", type=int, default=1, show_default=True)
def extract(stories, method, genre, title, manifest, backend_spec, config_path, seed, top_k,
            triples, annotations, out, jobs):
    """Extract a knowledge graph from each story plot."""
    if method in ("neural", "random"):
        if backend_spec is None:
            raise click.UsageError(f"--method {method} requires --backend")
        if seed is None:
            raise click.UsageError(f"--method {method} requires --seed")
    if method == "rules" and triples is None:
        raise click.UsageError("--method rules requires --triples")

    multi = len(stories) > 1
    if multi:
        out.mkdir(parents=True, exist_ok=True)
    elif out.is_dir():
        multi = True

    def run_one(story_path: Path) -> Path:
        story = _load_story(story_path, genre, manifest, title if not multi else None)
        if method == "rules":
            graph = rules.rules_graph_from_files(story, triples, annotations)
        else:
            backend = backends.resolve_backend(backend_spec)
            config = _extraction_config(config_path, seed, top_k)
            vertices = extraction.extract_vertices(story, backend, config)
            if method == "neural":
                graph = extraction.construct_graph(story, vertices, backend, config)
            else:
                graph = extraction.random_connect(vertices, config.seed)
        target = out / f"{story.id}.graph.json" if multi else out
        kg.save_graph(graph, target)
        return target

    try:
        if jobs > 1 and multi:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                written = list(pool.map(run_one, stories))
        else:
            written = [run_one(p) for p in stories]
    except StoryworldError as exc:
        raise _fail(exc)
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.argument("graphs", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Also write stats.csv and figures here.")
def stats(graphs, out_dir):
    """Aggregate vertex/edge/degree statistics over graph files."""
    try:
        loaded = [kg.load_graph(path) for path in graphs]
        rows = report.aggregate_stats(loaded)
    except StoryworldError as exc:
        raise _fail(exc)
    click.echo(report.format_table(rows))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "stats.csv"
        report.write_csv(rows, csv_path)
        figures = report.render_figures(rows, out_dir)
        for path in [csv_path, *figures]:
            click.echo(f"wrote {path}")


@main.command()
@click.argument("graph_path", type=click.Path(exists=True, path_type=Path))
@click.option("--max-locations", type=int, required=True)
@click.option("--max-entities-per-location", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("-o", "--out", type=click.Path(path_type=Path), required=True)
def prune(graph_path, max_locations, max_entities_per_location, seed, out):
    """Randomly trim a graph to the given caps (seeded)."""
    try:
        graph = kg.load_graph(graph_path)
        pruned = kg.prune(graph, max_locations, max_entities_per_location, seed)
        kg.save_graph(pruned, out)
    except StoryworldError as exc:
        raise _fail(exc)
    click.echo(f"wrote {out}")


@main.command()
@click.argument("story_path", type=click.Path(exists=True, path_type=Path))
@click.argument("graph_path", type=click.Path(exists=True, path_type=Path))
@click.option("--method", type=click.Choice(["neural", "template"]), required=True)
@click.option("--genre", default="other")
@click.option("--backend", "backend_spec", default=None)
@click.option("--grammar", "grammar_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--seed", type=int, required=True)
@click.option("--max-tokens", type=int, default=60, show_default=True)
@click.option("--temperature", type=float, default=0.7, show_default=True)
@click.option("-o", "--out", type=click.Path(path_type=Path), required=True)
def describe(story_path, graph_path, method, genre, backend_spec, grammar_path, seed,
             max_tokens, temperature, out):
    """Generate flavortext for every vertex of a graph."""
    try:
        story = _load_story(story_path, genre, None, None)
        graph = kg.load_graph(graph_path)
        grammar = flavor.load_grammar(grammar_path) if grammar_path else flavor.default_grammar()
        if method == "template":
            descriptions = flavor.describe_with_templates(graph, grammar, seed)
        else:
            if backend_spec is None:
                raise click.UsageError("--method neural requires --backend")
            backend = backends.resolve_backend(backend_spec)
            params = backends.GenerationParams(
                max_tokens=max_tokens, temperature=temperature, stop=("\n",), seed=seed
            )
            descriptions = flavor.describe_graph_neural(story, graph, backend, params, grammar)
        flavor.save_descriptions(descriptions, out)
    except StoryworldError as exc:
        raise _fail(exc)
    click.echo(f"wrote {out}")


@main.command("compile")
@click.argument("graph_path", type=click.Path(exists=True, path_type=Path))
@click.argument("descriptions_path", type=click.Path(exists=True, path_type=Path))
@click.option("--story-id", required=True)
@click.option("--genre", default="other")
@click.option("--title", default=None)
@click.option("--start-room", default=None)
@click.option("-o", "--out", type=click.Path(path_type=Path), required=True)
def compile_cmd(graph_path, descriptions_path, story_id, genre, title, start_room, out):
    """Compile a graph plus descriptions into a playable game file."""
    try:
        graph = kg.load_graph(graph_path)
        descriptions = flavor.load_descriptions(descriptions_path)
        world = gamegen.compile_game(
            graph,
            descriptions,
            gamegen.GameMetadata(
                story_id=story_id, genre=genre, title=title, start_room=start_room,
                provenance=graph.provenance.value,
            ),
        )
        gamegen.save_game(world, out)
    except StoryworldError as exc:
        raise _fail(exc)
    click.echo(f"wrote {out}")


@main.command()
@click.argument("game_path", type=click.Path(exists=True, path_type=Path), required=False)
@click.option("--tutorial", is_flag=True, help="Play the built-in tutorial world.")
@click.option("--completion", type=click.Choice(["pooled", "split"]), default="pooled", show_default=True)
def play(game_path, tutorial, completion):
    """Play a game file in a terminal REPL."""
    if tutorial == (game_path is not None):
        raise click.UsageError("give either a game file or --tutorial")
    try:
        world = gamegen.tutorial_world() if tutorial else gamegen.load_game(game_path)
        session, intro = engine.new_session(world, completion=completion)
    except StoryworldError as exc:
        raise _fail(exc)
    click.echo(intro)
    while not session.ended:
        try:
            raw = click.prompt("", prompt_suffix="> ", default="", show_default=False)
        except (EOFError, KeyboardInterrupt, click.Abort):
            break
        click.echo(session.execute(raw))


@main.command()
@click.argument("game_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ttl", type=float, default=server.DEFAULT_TTL_SECONDS, show_default=True,
              help="Idle session expiry in seconds.")
@click.option("--static-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None,
              help="Optional web client to mount at /play.")
def serve(game_dir, host, port, ttl, static_dir):
    """Serve a directory of game files over HTTP."""
    import uvicorn

    try:
        app = server.create_app(game_dir=game_dir, ttl_seconds=ttl, static_dir=static_dir)
    except StoryworldError as exc:
        raise _fail(exc)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.argument("story_path", type=click.Path(exists=True, path_type=Path))
@click.option("--genre", default="other")
@click.option("-o", "--out", type=click.Path(path_type=Path), default=None,
              help="Defaults to stdout.")
def segment(story_path, genre, out):
    """Write a story's sentence segmentation (for out-of-process taggers)."""
    try:
        story = _load_story(story_path, genre, None, None)
    except StoryworldError as exc:
        raise _fail(exc)
    doc = {
        "story_id": story.id,
        "sentences": [
            {"index": i, "start": span.start, "end": span.end, "text": story.text[span.start:span.end]}
            for i, span in enumerate(story.sentences)
        ],
    }
    payload = json.dumps(doc, indent=2, ensure_ascii=False)
    if out is None:
        click.echo(payload)
    else:
        out.write_text(payload, "utf-8")
        click.echo(f"wrote {out}")


@main.command()
@click.argument("story_path", type=click.Path(exists=True, path_type=Path))
@click.option("--method", type=click.Choice(["neural", "rules", "random"]), required=True)
@click.option("--describe-method", type=click.Choice(["neural", "template"]), default="template",
              show_default=True)
@click.option("--genre", default="other")
@click.option("--title", default=None)
@click.option("--backend", "backend_spec", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--seed", type=int, required=True)
@click.option("--triples", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--annotations", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--grammar", "grammar_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--max-locations", type=int, default=None)
@click.option("--max-entities-per-location", type=int, default=None)
@click.option("--max-tokens", type=int, default=60, show_default=True)
@click.option("--temperature", type=float, default=0.7, show_default=True)
@click.option("-o", "--out", type=click.Path(path_type=Path), required=True)
def pipeline(story_path, method, describe_method, genre, title, backend_spec, config_path, seed,
             triples, annotations, grammar_path, max_locations, max_entities_per_location,
             max_tokens, temperature, out):
    """Run every phase: story to playable game file.

    Intermediate artifacts land next to the output as OUT.graph.json and
    OUT.descriptions.json; output equals chaining the stage subcommands
    with the same seeds.
    """
    if method in ("neural", "random") and (backend_spec is None or seed is None):
        raise click.UsageError(f"--method {method} requires --backend and --seed")
    if method == "rules" and triples is None:
        raise click.UsageError("--method rules requires --triples")
    if describe_method == "neural" and backend_spec is None:
        raise click.UsageError("--describe-method neural requires --backend")
    if (max_locations is None) != (max_entities_per_location is None):
        raise click.UsageError("--max-locations and --max-entities-per-location go together")

    try:
        story = _load_story(story_path, genre, None, title)
        if method == "rules":
            graph = rules.rules_graph_from_files(story, triples, annotations)
        else:
            backend = backends.resolve_backend(backend_spec)
            config = _extraction_config(config_path, seed, None)
            vertices = extraction.extract_vertices(story, backend, config)
            if method == "neural":
                graph = extraction.construct_graph(story, vertices, backend, config)
            else:
                graph = extraction.random_connect(vertices, config.seed)
        if max_locations is not None:
            graph = kg.prune(graph, max_locations, max_entities_per_location, seed)

        grammar = flavor.load_grammar(grammar_path) if grammar_path else flavor.default_grammar()
        if describe_method == "template":
            descriptions = flavor.describe_with_templates(graph, grammar, seed)
        else:
            backend = backends.resolve_backend(backend_spec)
            params = backends.GenerationParams(
                max_tokens=max_tokens, temperature=temperature, stop=("\n",), seed=seed
            )
            descriptions = flavor.describe_graph_neural(story, graph, backend, params, grammar)

        world = gamegen.compile_game(
            graph,
            descriptions,
            gamegen.GameMetadata(
                story_id=story.id, genre=story.genre.value, title=story.title,
                provenance=graph.provenance.value,
            ),
        )

        graph_out = out.with_suffix(".graph.json")
        descriptions_out = out.with_suffix(".descriptions.json")
        kg.save_graph(graph, graph_out)
        flavor.save_descriptions(descriptions, descriptions_out)
        gamegen.save_game(world, out)
    except StoryworldError as exc:
        raise _fail(exc)
    for path in (graph_out, descriptions_out, out):
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
