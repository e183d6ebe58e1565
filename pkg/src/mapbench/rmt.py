"""Random-matrix reference layer: spectral densities, reference sampling,
and the statistical distances used for scoring.

The theoretical output-probability reference has no closed form; it is
defined as the Monte Carlo law of diagonal entries of fixed-trace Wishart
matrices, cached to disk keyed by (N, r, seed, sample count) so scoring is
deterministic and cheap after the first build.
"""

from __future__ import annotations

import math
import os
import tempfile
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtri

from .errors import InvalidParams
from .linalg import RngStream, sample_ginibre

DEFAULT_REFERENCE_SEED = 20240
DEFAULT_REFERENCE_SAMPLES = 1_000_000

_build_lock = threading.Lock()
_memory_cache: dict[tuple, "ReferenceOutputDistribution"] = {}


@dataclass(frozen=True)
class MPParams:
    """Dimension/rank pair with the derived density parameters.

    kappa = 1/(N r); the support edges are (1 +- 1/sqrt(r))^2 / N.
    """

    N: int
    r: int
    kappa: float = field(init=False)
    lambda_minus: float = field(init=False)
    lambda_plus: float = field(init=False)

    def __post_init__(self):
        if self.N < 1 or self.r < 1:
            raise InvalidParams(f"N and r must be >= 1, got N={self.N}, r={self.r}")
        object.__setattr__(self, "kappa", 1.0 / (self.N * self.r))
        root = 1.0 / math.sqrt(self.r)
        object.__setattr__(self, "lambda_minus", (1.0 - root) ** 2 / self.N)
        object.__setattr__(self, "lambda_plus", (1.0 + root) ** 2 / self.N)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted sample carrier for CDF/KS work."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if arr.size == 0:
            raise InvalidParams("empirical distribution needs at least one sample")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True, eq=False)
class ReferenceOutputDistribution:
    """Monte Carlo reference for steady-state output probabilities."""

    params: MPParams
    samples: np.ndarray = field(repr=False)
    sample_count: int
    seed: int


def mp_pdf(params: MPParams, lam: float) -> float:
    """Rescaled Marchenko-Pastur density; zero outside the support."""
    lo, hi = params.lambda_minus, params.lambda_plus
    if params.r == 1 and lam == 0.0:
        raise InvalidParams("density diverges at the lower edge when r = 1")
    if lam <= lo or lam >= hi:
        return 0.0
    return math.sqrt((hi - lam) * (lam - lo)) / (2.0 * math.pi * params.kappa * lam)


def _cdf_integrand(params: MPParams):
    lo = params.lambda_minus
    delta = params.lambda_plus - lo
    norm = delta * delta / (math.pi * params.kappa)

    def f(theta: float) -> float:
        s, c = math.sin(theta), math.cos(theta)
        return norm * (s * c) ** 2 / (lo + delta * s * s)

    return f


def mp_cdf(params: MPParams, lam: float) -> float:
    """CDF of the density by adaptive quadrature.

    The inverse-square-root edge singularities are removed with the
    substitution lam = lambda_minus + (lambda_plus - lambda_minus) sin^2(t),
    after which the integrand is smooth and Gauss-Kronrod quadrature at
    absolute tolerance 1e-9 is reliable.
    """
    lo, hi = params.lambda_minus, params.lambda_plus
    if lam <= lo:
        return 0.0
    if lam >= hi:
        return 1.0
    theta = math.asin(math.sqrt((lam - lo) / (hi - lo)))
    val, _ = quad(_cdf_integrand(params), 0.0, theta, epsabs=1e-9, limit=200)
    return min(max(val, 0.0), 1.0)


def mp_moment(params: MPParams, m: int) -> float:
    """Analytic m-th moment of the rescaled density.

    Evaluated exactly as kappa^m * sum_l Narayana(m, l) r^l with integer
    binomials; the m = 1 case reduces to 1/N and m = 2 gives the variance
    1/(N^2 r) on top of the squared mean.
    """
    if m < 1:
        raise InvalidParams(f"moment order must be >= 1, got {m}")
    r = params.r
    s = sum(math.comb(m, l - 1) * math.comb(m, l) * r**l for l in range(1, m + 1))
    return s / (m * (params.N * r) ** m)


def sample_fixed_trace_wishart(N: int, r: int, rng) -> np.ndarray:
    """Trace-normalized Wishart matrix G G^dag / Tr(G G^dag), G of shape N x Nr."""
    if N < 1 or r < 1:
        raise InvalidParams(f"N and r must be >= 1, got N={N}, r={r}")
    g = sample_ginibre(N, N * r, rng)
    w = g @ g.conj().T
    return w / np.trace(w).real


def _wishart_diagonal_entries(N: int, r: int, count: int, gen: np.random.Generator) -> np.ndarray:
    """<0|W|0> for `count` independent fixed-trace Wishart matrices.

    The entry is a ratio of squared-entry sums of the underlying Ginibre
    matrix, so no matrix products are needed; sampling stays vectorized in
    chunks to bound memory.
    """
    out = np.empty(count)
    m = N * r
    chunk = max(1, min(count, 1 << 21) // max(1, N * m))
    done = 0
    while done < count:
        b = min(chunk, count - done)
        re = gen.standard_normal((b, N, m))
        im = gen.standard_normal((b, N, m))
        sq = (re * re + im * im) / 2.0
        out[done : done + b] = sq[:, 0, :].sum(axis=1) / sq.sum(axis=(1, 2))
        done += b
    return out


def reference_output_distribution(
    params: MPParams, sample_count: int, rng
) -> ReferenceOutputDistribution:
    """Sample the reference law of single output probabilities.

    Each sample is a diagonal entry of an independently drawn fixed-trace
    Wishart matrix; basis invariance makes the (0, 0) entry representative
    of any computational-basis outcome.
    """
    if sample_count < 10_000:
        raise InvalidParams(f"sample_count must be >= 1e4, got {sample_count}")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    gen = stream.generator()
    samples = np.sort(_wishart_diagonal_entries(params.N, params.r, sample_count, gen))
    if samples[0] < 0.0 or samples[-1] > 1.0:
        raise InvalidParams("reference samples escaped [0, 1]")
    mean = samples.mean()
    se = samples.std(ddof=1) / math.sqrt(sample_count)
    if abs(mean - 1.0 / params.N) > 5.0 * se:
        raise InvalidParams(
            f"reference mean {mean:.6g} deviates from 1/N by more than 5 SE"
        )
    return ReferenceOutputDistribution(
        params=params,
        samples=samples,
        sample_count=sample_count,
        seed=stream.master_seed,
    )


def reference_cache_path(cache_dir, params: MPParams, sample_count: int, seed: int) -> Path:
    return Path(cache_dir) / f"ref_N{params.N}_r{params.r}_seed{seed}_n{sample_count}.npz"


def load_or_build_reference(
    params: MPParams,
    sample_count: int = DEFAULT_REFERENCE_SAMPLES,
    seed: int = DEFAULT_REFERENCE_SEED,
    cache_dir=None,
) -> ReferenceOutputDistribution:
    """Fetch the reference from cache, building and persisting it if absent.

    Within a process, concurrent requests for the same key compute once.
    Across processes the write is atomic and the content is a pure function
    of the key, so a racing double build converges to identical bytes.
    """
    key = (params.N, params.r, seed, sample_count, str(cache_dir))
    with _build_lock:
        if key in _memory_cache:
            return _memory_cache[key]
        ref = None
        path = None
        if cache_dir is not None:
            path = reference_cache_path(cache_dir, params, sample_count, seed)
            if path.exists():
                data = np.load(path)
                ref = ReferenceOutputDistribution(
                    params=MPParams(int(data["N"]), int(data["r"])),
                    samples=data["samples"],
                    sample_count=int(data["sample_count"]),
                    seed=int(data["seed"]),
                )
        if ref is None:
            ref = reference_output_distribution(params, sample_count, RngStream(seed))
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz.tmp")
                os.close(fd)
                try:
                    with open(tmp, "wb") as fh:
                        np.savez(
                            fh,
                            N=params.N,
                            r=params.r,
                            seed=seed,
                            sample_count=sample_count,
                            samples=ref.samples,
                        )
                    os.replace(tmp, path)
                finally:
                    if os.path.exists(tmp):
                        os.unlink(tmp)
        _memory_cache[key] = ref
        return ref


def _samples_of(d) -> np.ndarray:
    if isinstance(d, EmpiricalDistribution):
        return d.samples
    if isinstance(d, ReferenceOutputDistribution):
        return d.samples
    arr = np.sort(np.asarray(d, dtype=float).ravel())
    if arr.size == 0:
        raise InvalidParams("empty sample set")
    return arr


def ks_distance(a, b) -> float:
    """Exact two-sample Kolmogorov-Smirnov distance by a sorted-merge sweep."""
    xa = _samples_of(a)
    xb = _samples_of(b)
    grid = np.concatenate([xa, xb])
    grid.sort(kind="mergesort")
    fa = np.searchsorted(xa, grid, side="right") / xa.size
    fb = np.searchsorted(xb, grid, side="right") / xb.size
    return float(np.max(np.abs(fa - fb)))


def ks_distance_to_cdf(d, cdf) -> float:
    """Exact one-sample KS distance against a continuous CDF callable."""
    xs = _samples_of(d)
    n = xs.size
    fs = np.asarray([cdf(x) for x in xs], dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(fs - i / n)), np.max(np.abs(fs - (i - 1) / n))))


def empirical_cdf(d) -> np.ndarray:
    """Right-continuous step CDF as (value, cumulative probability) rows."""
    xs = _samples_of(d)
    values, counts = np.unique(xs, return_counts=True)
    cum = np.cumsum(counts) / xs.size
    return np.column_stack([values, cum])


def normal_probability_points(d) -> np.ndarray:
    """Standard-normal quantiles paired with standardized sample quantiles.

    Plotting positions are (i - 0.5)/n, which stay clear of the 0/1
    infinities of the inverse normal. A zero-variance sample is flagged with
    a warning and returned unstandardized rather than crashing.
    """
    xs = _samples_of(d)
    n = xs.size
    if n < 10:
        raise InvalidParams(f"need at least 10 samples, got {n}")
    probs = (np.arange(1, n + 1) - 0.5) / n
    theoretical = ndtri(probs)
    mean = xs.mean()
    std = xs.std(ddof=1)
    if std == 0.0:
        warnings.warn("zero-variance sample; quantiles left unstandardized")
        std = 1.0
    return np.column_stack([theoretical, (xs - mean) / std])
