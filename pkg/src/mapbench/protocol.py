"""Benchmark orchestration: ensemble generation, steady-state driving,
scoring against the reference law, and report serialization.

Member i of an ensemble draws every bit of randomness from the stream
(master_seed, i), with separate substreams for map construction, shot
sampling, and optional random initial states, so changing the shot count
never changes the circuits. Reports are regenerable byte-for-byte from the
configuration plus master seed (set SOURCE_DATE_EPOCH to pin the
timestamp), independent of worker width.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import circuit as circ_mod
from . import qasm as qasm_mod
from .channel import (
    KrausChannel,
    iterate,
    random_choi_channel,
    random_ginibre_kraus,
    random_stinespring,
)
from .circuit import NoiseModel, QubitNoise, build_random_circuit
from .errors import (
    ConfigMismatch,
    IncompatibleConfigs,
    InvalidParams,
    MalformedHistogram,
    MapbenchError,
    ProtocolError,
)
from .linalg import RngStream, basis_state
from .rmt import (
    DEFAULT_REFERENCE_SAMPLES,
    DEFAULT_REFERENCE_SEED,
    MPParams,
    empirical_cdf,
    ks_distance,
    load_or_build_reference,
    normal_probability_points,
)
from .spectral import analyze_spectrum, convergence_iterations, steady_state

SCHEMA_VERSION = 1
PACKAGE_VERSION = "0.1.0"

MODE_CHANNEL = "abstract-channel"
MODE_CIRCUIT = "circuit"
CONSTRUCTIONS = ("ginibre", "stinespring", "choi")


@dataclass(frozen=True)
class ProtocolConfig:
    """Full description of a benchmark run."""

    n_system: int
    rank: int = 2
    depth: int = 3
    ensemble_size: int = 100
    repetitions: int | None = None  # None resolves via epsilon
    epsilon: float = 1e-3
    shots: int | None = None  # None = exact diagonals
    mode: str = MODE_CIRCUIT
    construction: str = "ginibre"
    noise: NoiseModel | None = None
    master_seed: int = 0
    fresh_ancilla: bool = False
    random_initial_state: bool = False
    reference_samples: int = DEFAULT_REFERENCE_SAMPLES
    reference_seed: int = DEFAULT_REFERENCE_SEED

    def __post_init__(self):
        if self.n_system < 1:
            raise InvalidParams("n_system must be >= 1")
        if self.ensemble_size < 1:
            raise InvalidParams("ensemble_size must be >= 1")
        if self.mode not in (MODE_CHANNEL, MODE_CIRCUIT):
            raise InvalidParams(f"unknown mode {self.mode!r}")
        if self.construction not in CONSTRUCTIONS:
            raise InvalidParams(f"unknown construction {self.construction!r}")
        if self.rank < 1:
            raise InvalidParams("rank must be >= 1")
        if self.mode == MODE_CIRCUIT:
            if self.rank & (self.rank - 1):
                raise InvalidParams(
                    f"circuit mode realizes rank with ancilla qubits; {self.rank} is not a power of 2"
                )
            if self.depth < 1:
                raise InvalidParams("depth must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise InvalidParams("shots must be >= 1 or None for exact output")

    @property
    def dim(self) -> int:
        return 1 << self.n_system

    @property
    def n_ancilla(self) -> int:
        return max(1, int(round(math.log2(self.rank))))

    def resolve_repetitions(self) -> int:
        if self.repetitions is not None:
            if self.repetitions < 0:
                raise InvalidParams("repetitions must be >= 0")
            return self.repetitions
        return convergence_iterations(self.rank, self.epsilon)


@dataclass(frozen=True, eq=False)
class MemberResult:
    index: int
    gap: float | None = None
    lambda2_modulus: float | None = None
    steady_eigenvalues: np.ndarray | None = field(default=None, repr=False)
    probabilities: np.ndarray | None = field(default=None, repr=False)
    histogram: dict | None = None
    spectrum: np.ndarray | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    config: ProtocolConfig
    members: tuple[MemberResult, ...]
    pooled_steady_eigenvalues: np.ndarray = field(repr=False)
    pooled_probabilities: np.ndarray = field(repr=False)
    cdf_points: np.ndarray = field(repr=False)
    quantile_points: np.ndarray = field(repr=False)
    ks_vs_reference: float
    output_mean: float
    output_variance: float
    reference_info: dict
    provenance: dict


def config_hash(cfg: ProtocolConfig) -> str:
    return hashlib.sha256(
        json.dumps(_config_to_dict(cfg), sort_keys=True).encode()
    ).hexdigest()[:16]


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
    else:
        t = _dt.datetime.now(_dt.timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def _haar_pure_state(dim: int, rng: RngStream) -> np.ndarray:
    gen = rng.generator()
    v = gen.standard_normal(dim) + 1j * gen.standard_normal(dim)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def _build_channel(cfg: ProtocolConfig, stream: RngStream) -> KrausChannel:
    builders = {
        "ginibre": random_ginibre_kraus,
        "stinespring": random_stinespring,
        "choi": random_choi_channel,
    }
    return builders[cfg.construction](cfg.n_system, cfg.rank, stream)


def _readout_table(cfg: ProtocolConfig) -> tuple[QubitNoise, ...] | None:
    if cfg.noise is None:
        return None
    # table indexed by system qubit; physical qubit = n_ancilla + j
    return tuple(cfg.noise.qubit(cfg.n_ancilla + j) for j in range(cfg.n_system))


def _run_member(cfg: ProtocolConfig, index: int, t: int) -> MemberResult:
    stream = RngStream(cfg.master_seed).child(index)
    build_stream = stream.child(0)
    shot_stream = stream.child(1)
    init_stream = stream.child(2)
    try:
        if cfg.mode == MODE_CHANNEL:
            ch = _build_channel(cfg, build_stream)
            circuit = None
        else:
            circuit = build_random_circuit(
                cfg.n_system, cfg.depth, build_stream, n_ancilla=cfg.n_ancilla
            )
            ch = circ_mod.circuit_to_channel(circuit, cfg.noise)
        spec = analyze_spectrum(ch)
        steady = steady_state(ch)

        rho0 = (
            _haar_pure_state(cfg.dim, init_stream)
            if cfg.random_initial_state
            else basis_state(cfg.dim, 0)
        )
        if cfg.mode == MODE_CHANNEL:
            rho_t = iterate(ch, rho0, t)
        else:
            state = circ_mod.initial_state(circuit)
            state.rho = np.kron(rho0, circ_mod.ancilla_product_state(cfg.n_ancilla, 0.0))
            for _ in range(t):
                state = circ_mod.simulate_step(
                    state, circuit, cfg.noise, fresh_ancilla=cfg.fresh_ancilla
                )
            rho_t = state.system_state()

        histogram = None
        if cfg.shots is None:
            probs = np.clip(np.diagonal(rho_t).real, 0.0, None)
        else:
            histogram = circ_mod.sample_shots(
                rho_t, cfg.shots, _readout_table(cfg), shot_stream
            )
            probs = np.zeros(cfg.dim)
            for key, count in histogram.items():
                probs[int(key, 2)] = count / cfg.shots
        lam2 = 1.0 - spec.gap
        return MemberResult(
            index=index,
            gap=spec.gap,
            lambda2_modulus=lam2,
            steady_eigenvalues=steady.eigenvalues,
            probabilities=probs,
            histogram=histogram,
            spectrum=spec.eigenvalues,
        )
    except MapbenchError as exc:
        return MemberResult(index=index, error=f"{type(exc).__name__}: {exc}")


def _aggregate(
    cfg: ProtocolConfig,
    members: tuple[MemberResult, ...],
    cache_dir,
) -> BenchmarkReport:
    ok = [m for m in members if not m.failed]
    failed = [m for m in members if m.failed]
    if len(failed) > 0.05 * len(members):
        details = "; ".join(f"#{m.index}: {m.error}" for m in failed[:5])
        raise ProtocolError(
            f"{len(failed)}/{len(members)} members failed (> 5% tolerance): {details}"
        )
    if not ok:
        raise ProtocolError("no successful members to aggregate")
    steady = [m.steady_eigenvalues for m in ok if m.steady_eigenvalues is not None]
    pooled_steady = np.sort(np.concatenate(steady)) if steady else np.empty(0)
    pooled_probs = np.sort(np.concatenate([m.probabilities for m in ok]))
    params = MPParams(cfg.dim, cfg.rank)
    reference = load_or_build_reference(
        params, cfg.reference_samples, cfg.reference_seed, cache_dir=cache_dir
    )
    ks = ks_distance(pooled_probs, reference)
    cdf = empirical_cdf(pooled_probs)
    quantiles = (
        normal_probability_points(pooled_probs)
        if pooled_probs.size >= 10
        else np.empty((0, 2))
    )
    return BenchmarkReport(
        config=cfg,
        members=members,
        pooled_steady_eigenvalues=pooled_steady,
        pooled_probabilities=pooled_probs,
        cdf_points=cdf,
        quantile_points=quantiles,
        ks_vs_reference=ks,
        output_mean=float(pooled_probs.mean()),
        output_variance=float(pooled_probs.var(ddof=1)),
        reference_info={
            "N": params.N,
            "r": params.r,
            "seed": cfg.reference_seed,
            "sample_count": cfg.reference_samples,
        },
        provenance={
            "package": "mapbench",
            "version": PACKAGE_VERSION,
            "schema_version": SCHEMA_VERSION,
            "generated_at": _timestamp(),
            "config_hash": config_hash(cfg),
        },
    )


def run_benchmark(cfg: ProtocolConfig, workers: int = 1, cache_dir=None) -> BenchmarkReport:
    """Run the full protocol and score the pooled outputs.

    Members are independent tasks over a thread pool of the requested width;
    aggregation is an ordered reduction by member index, so results do not
    depend on completion order or worker count.
    """
    t = cfg.resolve_repetitions()
    indices = list(range(1, cfg.ensemble_size + 1))
    if workers <= 1:
        members = tuple(_run_member(cfg, i, t) for i in indices)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = tuple(pool.map(lambda i: _run_member(cfg, i, t), indices))
    return _aggregate(cfg, members, cache_dir)


def compare_reports(a: BenchmarkReport, b: BenchmarkReport) -> dict:
    """Two-sample comparison of pooled outputs plus spectral summaries."""
    if a.config.dim != b.config.dim or a.config.rank != b.config.rank:
        raise IncompatibleConfigs(
            f"(N, r) mismatch: ({a.config.dim}, {a.config.rank}) vs "
            f"({b.config.dim}, {b.config.rank})"
        )
    ks = ks_distance(a.pooled_probabilities, b.pooled_probabilities)
    deciles = np.arange(0.1, 0.95, 0.1)
    qa = np.quantile(a.pooled_probabilities, deciles)
    qb = np.quantile(b.pooled_probabilities, deciles)
    gaps_a = [m.gap for m in a.members if m.gap is not None]
    gaps_b = [m.gap for m in b.members if m.gap is not None]
    summary = {
        "two_sample_ks": float(ks),
        "quantile_deltas": [
            {"quantile": float(q), "delta": float(d)}
            for q, d in zip(deciles, qb - qa)
        ],
        "mean_gap_a": float(np.mean(gaps_a)) if gaps_a else None,
        "mean_gap_b": float(np.mean(gaps_b)) if gaps_b else None,
        "ks_vs_reference_a": a.ks_vs_reference,
        "ks_vs_reference_b": b.ks_vs_reference,
        "variance_a": a.output_variance,
        "variance_b": b.output_variance,
    }
    if summary["mean_gap_a"] is not None and summary["mean_gap_b"] is not None:
        summary["mean_gap_delta"] = summary["mean_gap_b"] - summary["mean_gap_a"]
    return summary


def ingest_external_histograms(files, cfg: ProtocolConfig, cache_dir=None) -> BenchmarkReport:
    """Build a report from externally produced shot histograms.

    This is the scoring path for hardware runs of exported programs: each
    file holds one circuit's counts; frequencies are pooled and scored
    against the same cached reference as direct simulation.
    """
    paths = [Path(f) for f in files]
    if not paths:
        raise MalformedHistogram("no histogram files given")
    members = []
    for i, path in enumerate(paths, start=1):
        hist, meta = qasm_mod.load_histogram_file(path)
        width = len(next(iter(hist)))
        if width != cfg.n_system:
            raise ConfigMismatch(
                f"{path}: bitstring width {width} != n_system {cfg.n_system}"
            )
        declared = meta.get("config_hash")
        if declared is not None and declared != config_hash(cfg):
            raise ConfigMismatch(f"{path}: config hash {declared} does not match run config")
        shots = sum(hist.values())
        probs = np.zeros(cfg.dim)
        for key, count in hist.items():
            probs[int(key, 2)] = count / shots
        members.append(
            MemberResult(index=i, probabilities=probs, histogram=dict(sorted(hist.items())))
        )
    return _aggregate(cfg, tuple(members), cache_dir)


# ---------------------------------------------------------------------------
# serialization


def _config_to_dict(cfg: ProtocolConfig) -> dict:
    # asdict recurses into the nested NoiseModel/QubitNoise dataclasses
    return asdict(cfg)


def _config_from_dict(data: dict) -> ProtocolConfig:
    data = dict(data)
    noise = data.get("noise")
    if noise is not None:
        noise = dict(noise)
        noise["qubit_noise"] = tuple(
            QubitNoise(**q) for q in noise.get("qubit_noise", ())
        )
        data["noise"] = NoiseModel(**noise)
    return ProtocolConfig(**data)


def _member_to_dict(m: MemberResult) -> dict:
    return {
        "index": m.index,
        "error": m.error,
        "gap": None if m.gap is None else float(m.gap),
        "lambda2_modulus": None if m.lambda2_modulus is None else float(m.lambda2_modulus),
        "steady_eigenvalues": (
            None if m.steady_eigenvalues is None else [float(x) for x in m.steady_eigenvalues]
        ),
        "probabilities": (
            None if m.probabilities is None else [float(x) for x in m.probabilities]
        ),
        "histogram": m.histogram,
    }


def report_to_dict(report: BenchmarkReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "provenance": report.provenance,
        "config": _config_to_dict(report.config),
        "reference": report.reference_info,
        "aggregates": {
            "ks_vs_reference": float(report.ks_vs_reference),
            "output_mean": float(report.output_mean),
            "output_variance": float(report.output_variance),
            "member_count": len(report.members),
            "failed_members": [m.index for m in report.members if m.failed],
            "pooled_output_count": int(report.pooled_probabilities.size),
            "pooled_steady_count": int(report.pooled_steady_eigenvalues.size),
        },
        "members": [_member_to_dict(m) for m in report.members],
    }


def report_from_dict(data: dict) -> BenchmarkReport:
    cfg = _config_from_dict(data["config"])
    members = []
    for md in data["members"]:
        members.append(
            MemberResult(
                index=md["index"],
                error=md.get("error"),
                gap=md.get("gap"),
                lambda2_modulus=md.get("lambda2_modulus"),
                steady_eigenvalues=(
                    None
                    if md.get("steady_eigenvalues") is None
                    else np.asarray(md["steady_eigenvalues"])
                ),
                probabilities=(
                    None if md.get("probabilities") is None else np.asarray(md["probabilities"])
                ),
                histogram=md.get("histogram"),
            )
        )
    ok = [m for m in members if not m.failed]
    steady = [m.steady_eigenvalues for m in ok if m.steady_eigenvalues is not None]
    pooled_steady = np.sort(np.concatenate(steady)) if steady else np.empty(0)
    pooled_probs = np.sort(np.concatenate([m.probabilities for m in ok]))
    return BenchmarkReport(
        config=cfg,
        members=tuple(members),
        pooled_steady_eigenvalues=pooled_steady,
        pooled_probabilities=pooled_probs,
        cdf_points=empirical_cdf(pooled_probs),
        quantile_points=(
            normal_probability_points(pooled_probs)
            if pooled_probs.size >= 10
            else np.empty((0, 2))
        ),
        ks_vs_reference=float(data["aggregates"]["ks_vs_reference"]),
        output_mean=float(data["aggregates"]["output_mean"]),
        output_variance=float(data["aggregates"]["output_variance"]),
        reference_info=data["reference"],
        provenance=data["provenance"],
    )


def write_report(report: BenchmarkReport, path) -> Path:
    """Write the JSON report plus its CSV sidecars next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report_to_dict(report), indent=1) + "\n")
    stem = path.with_suffix("")
    with open(f"{stem}.spectrum.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "channel_index"])
        for m in report.members:
            if m.spectrum is None:
                continue
            for z in m.spectrum:
                writer.writerow([repr(float(z.real)), repr(float(z.imag)), m.index])
    with open(f"{stem}.steady_eigenvalues.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "channel_index"])
        for m in report.members:
            if m.steady_eigenvalues is None:
                continue
            for x in m.steady_eigenvalues:
                writer.writerow([repr(float(x)), m.index])
    with open(f"{stem}.probabilities.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probability", "channel_index"])
        for m in report.members:
            if m.probabilities is None:
                continue
            for x in m.probabilities:
                writer.writerow([repr(float(x)), m.index])
    with open(f"{stem}.cdf.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "cumulative_probability"])
        for v, p in report.cdf_points:
            writer.writerow([repr(float(v)), repr(float(p))])
    with open(f"{stem}.quantiles.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theoretical_quantile", "sample_quantile"])
        for tq, sq in report.quantile_points:
            writer.writerow([repr(float(tq)), repr(float(sq))])
    return path


def read_report(path) -> BenchmarkReport:
    return report_from_dict(json.loads(Path(path).read_text()))
