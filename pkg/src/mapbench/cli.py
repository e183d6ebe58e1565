"""Command-line interface: run benchmarks, compare and ingest reports,
export circuits, and pre-build reference caches."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .circuit import build_random_circuit, load_noise_model
from .errors import MapbenchError
from .linalg import RngStream
from .protocol import (
    ProtocolConfig,
    compare_reports,
    config_hash,
    ingest_external_histograms,
    read_report,
    run_benchmark,
    write_report,
)
from .qasm import export_qasm
from .rmt import (
    DEFAULT_REFERENCE_SAMPLES,
    DEFAULT_REFERENCE_SEED,
    MPParams,
    load_or_build_reference,
)


def _default_cache_dir() -> Path:
    env = os.environ.get("MAPBENCH_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "mapbench"


def _build_config(config_file, **overrides) -> ProtocolConfig:
    data = {}
    if config_file:
        data = json.loads(Path(config_file).read_text())
        data.pop("noise", None)  # noise comes from --noise-file
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return ProtocolConfig(**data)


@click.group()
def main():
    """Benchmark quantum devices with random dynamical maps."""


@main.command()
@click.option("--qubits", "-n", type=int, default=None, help="System qubit count.")
@click.option("--depth", "-d", type=int, default=None, help="Circuit depth per block.")
@click.option("--reps", "-t", type=int, default=None, help="Explicit iteration count.")
@click.option("--epsilon", type=float, default=None, help="Tolerance for automatic t.")
@click.option("--ensemble", "-M", type=int, default=None, help="Number of random maps.")
@click.option("--shots", type=int, default=None, help="Shots per member.")
@click.option("--exact", is_flag=True, help="Exact output probabilities (no shots).")
@click.option("--rank", "-r", type=int, default=None, help="Target Kraus rank.")
@click.option("--noise-file", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option(
    "--mode",
    type=click.Choice(["abstract-channel", "circuit"]),
    default=None,
)
@click.option(
    "--construction",
    type=click.Choice(["ginibre", "stinespring", "choi"]),
    default=None,
    help="Random-map construction for abstract-channel mode.",
)
@click.option("--fresh-ancilla", is_flag=True, default=None)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--cache-dir", type=click.Path(), default=None)
@click.option("--out", "-o", type=click.Path(), default="mapbench-report.json", show_default=True)
def run(qubits, depth, reps, epsilon, ensemble, shots, exact, rank, noise_file,
        seed, mode, construction, fresh_ancilla, config_file, workers, cache_dir, out):
    """Generate an ensemble, drive it to steady state, and score it."""
    if exact and shots is not None:
        raise click.UsageError("--shots and --exact are mutually exclusive")
    cfg = _build_config(
        config_file,
        n_system=qubits,
        depth=depth,
        repetitions=reps,
        epsilon=epsilon,
        ensemble_size=ensemble,
        shots=None if exact else shots,
        rank=rank,
        master_seed=seed,
        mode=mode,
        construction=construction,
        fresh_ancilla=fresh_ancilla,
    )
    if noise_file:
        cfg = ProtocolConfig(
            **{**_config_kwargs(cfg), "noise": load_noise_model(noise_file)}
        )
    cache = Path(cache_dir) if cache_dir else _default_cache_dir()
    report = run_benchmark(cfg, workers=workers, cache_dir=cache)
    path = write_report(report, out)
    click.echo(f"KS vs reference: {report.ks_vs_reference:.4f}")
    click.echo(f"report written to {path}")


def _config_kwargs(cfg: ProtocolConfig) -> dict:
    from dataclasses import fields

    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


@main.command()
@click.argument("report_a", type=click.Path(exists=True))
@click.argument("report_b", type=click.Path(exists=True))
@click.option("--out", "-o", type=click.Path(), default=None)
def compare(report_a, report_b, out):
    """Two-sample comparison of the pooled outputs of two reports."""
    a = read_report(report_a)
    b = read_report(report_b)
    summary = compare_reports(a, b)
    text = json.dumps(summary, indent=1)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"comparison written to {out}")
    else:
        click.echo(text)


@main.command()
@click.argument("histograms", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--qubits", "-n", type=int, default=None)
@click.option("--rank", "-r", type=int, default=None)
@click.option("--depth", "-d", type=int, default=None)
@click.option("--reps", "-t", type=int, default=None)
@click.option("--ensemble", "-M", type=int, default=None)
@click.option("--shots", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None,
              help="Config of the run the histograms belong to (for hash matching).")
@click.option("--cache-dir", type=click.Path(), default=None)
@click.option("--out", "-o", type=click.Path(), default="mapbench-ingest.json", show_default=True)
def ingest(histograms, qubits, rank, depth, reps, ensemble, shots, seed,
           config_file, cache_dir, out):
    """Score externally produced shot histograms against the reference.

    Files carrying a config hash in their metadata are checked against the
    config assembled here, so results cannot silently be scored against the
    wrong ensemble description.
    """
    cfg = _build_config(
        config_file,
        n_system=qubits,
        rank=rank,
        depth=depth,
        repetitions=reps,
        ensemble_size=ensemble if ensemble is not None else len(histograms),
        shots=shots,
        master_seed=seed,
    )
    cache = Path(cache_dir) if cache_dir else _default_cache_dir()
    report = ingest_external_histograms(list(histograms), cfg, cache_dir=cache)
    path = write_report(report, out)
    click.echo(f"KS vs reference: {report.ks_vs_reference:.4f}")
    click.echo(f"report written to {path}")


@main.command("export-qasm")
@click.option("--qubits", "-n", type=int, required=True)
@click.option("--depth", "-d", type=int, default=3, show_default=True)
@click.option("--rank", "-r", type=int, default=2, show_default=True)
@click.option("--reps", "-t", type=int, default=10, show_default=True)
@click.option("--ensemble", "-M", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", "-o", type=click.Path(), default="qasm-out", show_default=True)
def export_qasm_cmd(qubits, depth, rank, reps, ensemble, seed, out_dir):
    """Export the ensemble's circuits as OpenQASM 3, one file per member.

    Streams match `run` with the same seed, so ingested results line up
    with the simulated ensemble member by member.
    """
    cfg = ProtocolConfig(
        n_system=qubits, rank=rank, depth=depth, ensemble_size=ensemble,
        repetitions=reps, master_seed=seed,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    for i in range(1, ensemble + 1):
        stream = RngStream(seed).child(i).child(0)
        circ = build_random_circuit(qubits, depth, stream, n_ancilla=cfg.n_ancilla)
        prog = export_qasm(circ, reps, metadata={
            "config_hash": digest, "master_seed": seed, "member": i,
        })
        path = out / f"member_{i:04d}.qasm"
        path.write_text(prog.source)
    click.echo(f"{ensemble} program(s) written to {out} (config hash {digest})")


@main.command()
@click.option("--qubits", "-n", type=int, required=True)
@click.option("--rank", "-r", type=int, default=2, show_default=True)
@click.option("--samples", type=int, default=DEFAULT_REFERENCE_SAMPLES, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_REFERENCE_SEED, show_default=True)
@click.option("--cache-dir", type=click.Path(), default=None)
def reference(qubits, rank, samples, seed, cache_dir):
    """Pre-build the cached reference output distribution."""
    cache = Path(cache_dir) if cache_dir else _default_cache_dir()
    params = MPParams(1 << qubits, rank)
    ref = load_or_build_reference(params, samples, seed, cache_dir=cache)
    click.echo(
        f"reference N={params.N} r={params.r} ready: {ref.sample_count} samples, "
        f"mean {ref.samples.mean():.6f}"
    )


def entry() -> None:
    try:
        main(standalone_mode=True)
    except MapbenchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entry()
