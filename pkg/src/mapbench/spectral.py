"""Spectral analysis of channels: gap, disk statistics, steady states.

The leading eigenvalue of a trace-preserving channel sits at 1; the rest of
the spectrum of a random rank-r channel fills a disk of radius 1/sqrt(r),
which controls how fast iteration converges to the steady state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import KrausChannel, to_superoperator
from .errors import DegenerateFixedSpace, InvalidParams, NoFixedPoint, RankOne, Singular
from .linalg import eig_general, eig_hermitian, hermitize, unvec

# An eigenvalue counts as "on the unit circle" inside this window; the
# assertion window on the leading eigenvalue is tighter so noisy channels
# degrade gracefully instead of silently passing.
UNIT_CIRCLE_WINDOW = 1e-6
LEADING_ATOL = 1e-7


@dataclass(frozen=True, eq=False)
class ChannelSpectrum:
    """Full superoperator spectrum with summary statistics."""

    eigenvalues: np.ndarray = field(repr=False)  # descending modulus
    leading: complex
    gap: float
    girko_radius: float


@dataclass(frozen=True, eq=False)
class SteadyStateDecomposition:
    """Steady state with its eigendecomposition (eigenvalues descending)."""

    state: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)


def _leading_index(ev: np.ndarray) -> int:
    return int(np.argmin(np.abs(ev - 1.0)))


def analyze_spectrum(ch: KrausChannel) -> ChannelSpectrum:
    """Eigenvalues of the channel's superoperator plus gap and disk radius."""
    ev, _ = eig_general(to_superoperator(ch))
    lead = _leading_index(ev)
    leading = complex(ev[lead])
    if abs(leading - 1.0) > LEADING_ATOL:
        raise NoFixedPoint(f"closest eigenvalue to 1 is {leading:.6g}")
    gap = 1.0 - abs(ev[1]) if ev.size > 1 else 1.0
    gap = min(max(gap, 0.0), 1.0)
    return ChannelSpectrum(
        eigenvalues=ev,
        leading=leading,
        gap=gap,
        girko_radius=1.0 / math.sqrt(ch.rank),
    )


def steady_state(ch: KrausChannel) -> SteadyStateDecomposition:
    """Extract the unique fixed point of the channel and eigendecompose it.

    The fixed-point eigenvector carries an arbitrary complex gauge, so its
    global phase is rotated to make the trace real and positive before
    Hermitizing; only then is the trace normalization well defined. A second
    eigenvalue on the unit circle (rotating point or extra fixed point) is an
    error: the ensemble statistics assume a unique steady state, and a silent
    arbitrary choice would corrupt them.
    """
    ev, vecs = eig_general(to_superoperator(ch))
    on_circle = np.abs(ev) >= 1.0 - UNIT_CIRCLE_WINDOW
    n_circle = int(on_circle.sum())
    if n_circle == 0:
        raise NoFixedPoint("no eigenvalue within 1e-6 of the unit circle")
    if n_circle > 1:
        raise DegenerateFixedSpace(
            f"{n_circle} eigenvalues on the unit circle; steady state not unique"
        )
    lead = _leading_index(ev)
    if abs(ev[lead] - 1.0) > LEADING_ATOL:
        raise NoFixedPoint(f"closest eigenvalue to 1 is {ev[lead]:.6g}")

    x = unvec(vecs[:, lead], ch.dim)
    tr = np.trace(x)
    if abs(tr) < 1e-12:
        raise NoFixedPoint("fixed-point eigenvector has numerically zero trace")
    x = x * (np.conj(tr) / abs(tr))
    herm_err = float(np.max(np.abs(x - x.conj().T)))
    if herm_err > 1e-7 * max(float(np.max(np.abs(x))), 1e-300):
        raise NoFixedPoint(f"fixed-point eigenvector not Hermitian: error {herm_err:.3e}")
    rho = hermitize(x)
    rho = rho / np.trace(rho).real

    w, v = eig_hermitian(rho)
    if w[0] < -1e-9:
        raise Singular(f"steady state has eigenvalue {w[0]:.3e} < -1e-9")
    w = np.maximum(w, 0.0)
    order = np.argsort(-w)
    return SteadyStateDecomposition(state=rho, eigenvalues=w[order], eigenvectors=v[:, order])


def convergence_iterations(rank: int, epsilon: float) -> int:
    """Iterations needed to reach tolerance epsilon: ceil(log eps / log gamma)."""
    if rank < 2:
        raise RankOne("rank-1 channels are unitary and never mix")
    if not 0.0 < epsilon < 1.0:
        raise InvalidParams(f"epsilon must be in (0, 1), got {epsilon}")
    gamma = 1.0 / math.sqrt(rank)
    return math.ceil(math.log(epsilon) / math.log(gamma))


def girko_fraction(spectra: list[ChannelSpectrum], slack: float) -> float:
    """Pooled fraction of non-leading eigenvalues inside the slackened disk."""
    if not spectra:
        raise InvalidParams("empty spectrum list")
    inside = 0
    total = 0
    for sp in spectra:
        ev = sp.eigenvalues
        rest = np.abs(np.delete(ev, _leading_index(ev)))
        inside += int(np.sum(rest <= sp.girko_radius + slack))
        total += rest.size
    return inside / total if total else 1.0


def write_spectra_csv(spectra: list[ChannelSpectrum], path) -> None:
    """Dump pooled eigenvalues as (re, im, channel index) rows."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "channel_index"])
        for idx, sp in enumerate(spectra):
            for z in sp.eigenvalues:
                writer.writerow([repr(float(z.real)), repr(float(z.imag)), idx])
