"""Command line entry points: serve the HTTP API, run headless policy
simulations against a gold-labeled corpus, and generate synthetic corpora."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .corpus import parse_query
from .datagen import SynthConfig, generate
from .evaluation import GoldCorpus, SimulationConfig, run_simulation
from .learning.features import EmbeddingTable
from .policy import PolicyConfig, parse_schedule


@click.group()
def main():
    """Human-in-the-loop text classification, self-hosted."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data-root", type=click.Path(), default=None)
@click.option("--port", type=int, default=None)
@click.option("--embeddings", type=click.Path(exists=True), default=None)
def serve(config_path, data_root, port, embeddings):
    """Start the HTTP service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(config_path)
    if data_root:
        config.data_root = Path(data_root)
    if port:
        config.port = port
    if embeddings:
        config.embedding_path = Path(embeddings)
    uvicorn.run(create_app(config), host="127.0.0.1", port=config.port)


def _parse_seeds(raw: str) -> tuple[int, ...]:
    # A bare count means seeds 0..n-1; a comma list is taken verbatim.
    if "," in raw:
        return tuple(int(s) for s in raw.split(",") if s.strip())
    return tuple(range(int(raw)))


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--gold-column", default="gold", show_default=True)
@click.option("--text-column", default="text", show_default=True)
@click.option("--query", required=True, help='Seed query, e.g. "health | medicine".')
@click.option("--iterations", default=6, show_default=True)
@click.option("--batch", default=30, show_default=True)
@click.option("--seed-target", default=30, show_default=True, help="Positives collected in the seed phase.")
@click.option("--schedule", default="", help='Model schedule, e.g. "light:0-4,heavy:5-6".')
@click.option("--strategy", type=click.Choice(["uncertainty", "random"]), default="uncertainty", show_default=True)
@click.option("--seeds", default="5", show_default=True, help="Seed count, or a comma list of seeds.")
@click.option("--test-fraction", default=0.3, show_default=True)
@click.option("--embeddings", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write per-seed rows as CSV.")
def simulate(
    corpus_path,
    gold_column,
    text_column,
    query,
    iterations,
    batch,
    seed_target,
    schedule,
    strategy,
    seeds,
    test_fraction,
    embeddings,
    out_path,
):
    """Benchmark the labeling policy on a corpus with gold labels."""
    corpus = GoldCorpus.from_csv(
        Path(corpus_path).read_bytes(), gold_column, text_column=text_column
    )
    policy = PolicyConfig(
        al_strategy=strategy,
        model_schedule=parse_schedule(schedule) if schedule else (),
    )
    cfg = SimulationConfig(
        corpus=corpus,
        query=parse_query(query),
        seeds=_parse_seeds(seeds),
        policy=policy,
        seed_positive_target=seed_target,
        batch_size=batch,
        iterations=iterations,
        test_fraction=test_fraction,
        embeddings=EmbeddingTable.load(embeddings) if embeddings else None,
    )
    result = run_simulation(cfg)
    if out_path:
        Path(out_path).write_text(result.to_csv(), "utf-8")
        click.echo(f"wrote {out_path}", err=True)
    click.echo(result.summary_csv(), nl=False)


@main.command("synth-corpus")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--elements", default=3000, show_default=True)
@click.option("--prior", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--embeddings-out", type=click.Path(), default=None)
def synth_corpus(out_path, elements, prior, seed, embeddings_out):
    """Generate a synthetic gold-labeled corpus for the simulator."""
    synth = generate(SynthConfig(n_elements=elements, positive_prior=prior, seed=seed))
    Path(out_path).write_bytes(synth.to_csv())
    click.echo(f"wrote {out_path} ({elements} elements, prior {prior})", err=True)
    click.echo(f'seed query: "{" | ".join(synth.query.terms)}"', err=True)
    if embeddings_out:
        synth.embeddings.save(embeddings_out)
        click.echo(f"wrote {embeddings_out}", err=True)


if __name__ == "__main__":
    sys.exit(main())
