"""Sidecar command line: serve the models, or adapt open-IE output."""

from __future__ import annotations

from pathlib import Path

import click


@click.group()
def main():
    """storyworld model sidecar."""


@main.command()
@click.option("--qa-model", default="twmkn9/albert-base-v2-squad2", show_default=True,
              help="Extractive QA checkpoint (hub id or local path).")
@click.option("--gen-model", default="gpt2-medium", show_default=True,
              help="Causal LM checkpoint (hub id or local path).")
@click.option("--device", default="cpu", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8500, show_default=True)
def serve(qa_model, gen_model, device, host, port):
    """Serve /qa, /generate, and /health."""
    import uvicorn

    from .app import create_app
    from .models import ModelService

    try:
        service = ModelService(qa_model, gen_model, device=device)
    except Exception as exc:
        raise click.ClickException(f"cannot load models: {exc}")
    uvicorn.run(create_app(service), host=host, port=port)


@main.command("adapt-triples")
@click.argument("native_path", type=click.Path(exists=True, path_type=Path))
@click.option("--sentences", "sentences_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Sentence spans from `storyworld segment`.")
@click.option("-o", "--out", type=click.Path(path_type=Path), required=True)
def adapt_triples_cmd(native_path, sentences_path, out):
    """Convert native open-IE output into the triple schema (JSON lines)."""
    from .adapter import AdapterError, adapt_triples, write_triples

    try:
        rows = adapt_triples(native_path, sentences_path)
    except AdapterError as exc:
        raise click.ClickException(str(exc))
    write_triples(rows, out)
    click.echo(f"wrote {len(rows)} triples to {out}")


if __name__ == "__main__":
    main()
