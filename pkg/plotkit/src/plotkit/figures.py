"""Render benchmark reports into the five standard figure kinds.

Inputs are the documented mapbench artifacts only: the report JSON, its CSV
sidecars (``<stem>.spectrum.csv`` etc.) and, for CDF/QQ overlays, a cached
reference ``.npz``. Theoretical overlays are always computed here from the
report's (N, r) metadata, never hard-coded.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("girko", "mp-hist", "output-hist", "cdf", "qq")

_SIDECAR = {
    "girko": ("spectrum", ["re", "im", "channel_index"]),
    "mp-hist": ("steady_eigenvalues", ["value", "channel_index"]),
    "output-hist": ("probabilities", ["probability", "channel_index"]),
    "cdf": ("cdf", ["value", "cumulative_probability"]),
    "qq": ("quantiles", ["theoretical_quantile", "sample_quantile"]),
}


class SchemaError(Exception):
    """An input file is missing, malformed, or lacks a required field."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    report_path: Path
    out_path: Path
    reference_path: Path | None = None
    bins: int = 40
    dpi: int = 130
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"kind: unknown figure kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "report_path", Path(self.report_path))
        object.__setattr__(self, "out_path", Path(self.out_path))
        if self.reference_path is not None:
            object.__setattr__(self, "reference_path", Path(self.reference_path))


def mp_support_edges(n_dim: int, rank: int) -> tuple[float, float]:
    """Support edges of the rescaled spectral density for (N, r)."""
    root = 1.0 / math.sqrt(rank)
    return (1.0 - root) ** 2 / n_dim, (1.0 + root) ** 2 / n_dim


def mp_density(n_dim: int, rank: int, xs: np.ndarray) -> np.ndarray:
    lo, hi = mp_support_edges(n_dim, rank)
    kappa = 1.0 / (n_dim * rank)
    out = np.zeros_like(xs)
    inside = (xs > lo) & (xs < hi)
    x = xs[inside]
    out[inside] = np.sqrt((hi - x) * (x - lo)) / (2.0 * math.pi * kappa * x)
    return out


def _load_report(path: Path) -> dict:
    if not path.exists():
        raise SchemaError(f"report_path: {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"report_path: {path} is not readable JSON: {exc}") from exc
    ref = data.get("reference")
    if not isinstance(ref, dict):
        raise SchemaError("reference: missing from report")
    for key in ("N", "r"):
        if not isinstance(ref.get(key), int) or ref[key] < 1:
            raise SchemaError(f"reference.{key}: missing or invalid in report")
    return data


def _load_csv(path: Path, header: list[str]) -> np.ndarray:
    if not path.exists():
        raise SchemaError(f"{path.name}: sidecar does not exist")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path.name}: file is empty")
    if rows[0] != header:
        raise SchemaError(f"{path.name}: header {rows[0]} != expected {header}")
    if len(rows) == 1:
        raise SchemaError(f"{path.name}: no data rows")
    try:
        return np.asarray([[float(x) for x in row] for row in rows[1:]])
    except ValueError as exc:
        raise SchemaError(f"{path.name}: non-numeric cell: {exc}") from exc


def _load_reference_samples(path: Path | None, what: str) -> np.ndarray | None:
    if path is None:
        return None
    if not path.exists():
        raise SchemaError(f"reference_path: {path} does not exist")
    try:
        data = np.load(path)
        samples = np.asarray(data["samples"], dtype=float)
    except Exception as exc:
        raise SchemaError(f"reference_path: {path} is not a reference cache: {exc}") from exc
    if samples.size == 0:
        raise SchemaError("reference_path: samples array is empty")
    return np.sort(samples)


def _sidecar_path(spec: FigureSpec) -> Path:
    name, _ = _SIDECAR[spec.kind]
    return spec.report_path.with_suffix("").parent / (
        spec.report_path.with_suffix("").name + f".{name}.csv"
    )


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns metadata about what was drawn.

    The returned dict always holds ``out_path`` and, for mp-hist, the
    computed overlay support edges (``lambda_minus``, ``lambda_plus``).
    """
    report = _load_report(spec.report_path)
    n_dim = report["reference"]["N"]
    rank = report["reference"]["r"]
    table = _load_csv(_sidecar_path(spec), _SIDECAR[spec.kind][1])
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    meta: dict = {"out_path": str(spec.out_path), "kind": spec.kind}

    if spec.kind == "girko":
        radius = 1.0 / math.sqrt(rank)
        theta = np.linspace(0.0, 2.0 * math.pi, 256)
        ax.scatter(table[:, 0], table[:, 1], s=6, alpha=0.5, label="eigenvalues")
        ax.plot(np.cos(theta), np.sin(theta), "k-", lw=1, label="unit circle")
        ax.plot(radius * np.cos(theta), radius * np.sin(theta), "r--", lw=1,
                label=f"radius {radius:.3f}")
        ax.set_aspect("equal")
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        meta["disk_radius"] = radius

    elif spec.kind == "mp-hist":
        lo, hi = mp_support_edges(n_dim, rank)
        values = table[:, 0]
        ax.hist(values, bins=spec.bins, density=True, alpha=0.6, label="eigenvalues")
        xs = np.linspace(max(lo * 0.5, 0.0), hi * 1.1, 500)
        ax.plot(xs, mp_density(n_dim, rank, xs), "r-", lw=1.5, label="theory")
        for edge in (lo, hi):
            ax.axvline(edge, color="r", ls=":", lw=1)
        ax.set_xlabel("eigenvalue")
        ax.set_ylabel("density")
        meta["lambda_minus"] = lo
        meta["lambda_plus"] = hi

    elif spec.kind == "output-hist":
        values = table[:, 0]
        ax.hist(values, bins=spec.bins, density=True, alpha=0.6, label="outputs")
        ref = _load_reference_samples(spec.reference_path, spec.kind)
        if ref is not None:
            ax.hist(ref, bins=spec.bins, density=True, histtype="step",
                    color="r", label="reference")
            meta["reference_samples"] = int(ref.size)
        ax.set_xlabel("output probability")
        ax.set_ylabel("density")

    elif spec.kind == "cdf":
        ax.step(table[:, 0], table[:, 1], where="post", label="empirical")
        ref = _load_reference_samples(spec.reference_path, spec.kind)
        if ref is not None:
            ax.plot(ref, np.arange(1, ref.size + 1) / ref.size, "r-", lw=1,
                    label="reference")
            meta["reference_samples"] = int(ref.size)
        ax.set_xlabel("output probability")
        ax.set_ylabel("cumulative probability")
        ax.set_ylim(0.0, 1.02)

    elif spec.kind == "qq":
        ax.scatter(table[:, 0], table[:, 1], s=8, alpha=0.6, label="quantiles")
        span = [table[:, 0].min(), table[:, 0].max()]
        ax.plot(span, span, "k--", lw=1, label="identity")
        ref = _load_reference_samples(spec.reference_path, spec.kind)
        if ref is not None:
            # standardized reference quantiles at the same plotting positions
            n = table.shape[0]
            probs = (np.arange(1, n + 1) - 0.5) / n
            q = np.quantile(ref, probs)
            ax.plot(table[:, 0], (q - ref.mean()) / ref.std(ddof=1), "r-", lw=1,
                    label="reference")
        ax.set_xlabel("normal quantile")
        ax.set_ylabel("standardized sample quantile")

    ax.legend(loc="best", fontsize=8)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, dpi=spec.dpi, metadata={"Software": "plotkit"})
    plt.close(fig)
    return meta
