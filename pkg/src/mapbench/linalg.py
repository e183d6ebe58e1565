"""Dense complex linear algebra and random-matrix sampling.

Matrices are plain ``numpy.ndarray`` values with ``complex128`` dtype and
row-major layout. All operations are pure: randomness enters only through an
explicit :class:`RngStream` (or a live ``numpy.random.Generator`` for callers
that manage their own stream state). Nothing here touches global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonConvergence, NotHermitian, Singular

# Module-wide default tolerances. The checks below take explicit overrides
# where a caller needs something tighter or looser.
HERMITICITY_ATOL = 1e-10
TRACE_ATOL = 1e-10
PSD_EIG_FLOOR = -1e-9
UNITARITY_ATOL = 1e-10
EIG_RESIDUAL_RTOL = 1e-8

# Residual verification of every eigenpair is O(n^3) per call, so it is off by
# default and switched on by the test suite.
_check_eig_residuals = False


def set_residual_checks(enabled: bool) -> None:
    global _check_eig_residuals
    _check_eig_residuals = enabled


@dataclass(frozen=True)
class RngStream:
    """Identity of a reproducible, splittable random stream.

    Streams are keyed by ``(master_seed, path)`` and realized with the Philox
    counter-based bit generator, so equal keys give bit-identical sequences
    and distinct paths give statistically independent ones regardless of
    which thread draws from them. ``child(i)`` derives an independent
    substream, which is how ensembles assign one stream per member.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def child(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng: RngStream | np.random.Generator | int) -> np.random.Generator:
    """Materialize a Generator; RngStream and plain ints give fresh streams."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def sample_ginibre(rows: int, cols: int, rng) -> np.ndarray:
    """Complex Gaussian matrix with unit-variance entries.

    Real and imaginary parts are independent N(0, 1/2), so E|z|^2 = 1. Any
    overall scale cancels in the normalized constructions built on top of
    this, but the unit-variance convention keeps circular-law checks clean.
    """
    if rows < 1 or cols < 1:
        raise DimensionMismatch(f"invalid shape ({rows}, {cols})")
    g = as_generator(rng)
    re = g.standard_normal((rows, cols))
    im = g.standard_normal((rows, cols))
    return (re + 1j * im) / np.sqrt(2.0)


def sample_haar_unitary(dim: int, rng) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix.

    The R-diagonal is phase-normalized; without that correction the raw QR
    factor is not Haar-distributed.
    """
    g = sample_ginibre(dim, dim, rng)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return q


def _sort_descending_modulus(ev: np.ndarray) -> np.ndarray:
    # primary: modulus desc; ties: real desc, then imag desc
    return np.lexsort((-ev.imag, -ev.real, -np.abs(ev)))


def eig_general(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a general complex square matrix.

    Returns eigenvalues sorted by descending modulus (ties by descending real
    part, then descending imaginary part) and the matching eigenvector
    columns. Backed by LAPACK's Hessenberg-reduction + shifted-QR solver,
    which bounds the iteration count at 30 sweeps per eigenvalue.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {m.shape}")
    try:
        ev, vec = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"QR iteration failed for dim {m.shape[0]}: {exc}") from exc
    order = _sort_descending_modulus(ev)
    ev = ev[order]
    vec = vec[:, order]
    if _check_eig_residuals:
        scale = np.linalg.norm(m)
        resid = np.linalg.norm(m @ vec - vec * ev, axis=0)
        bound = EIG_RESIDUAL_RTOL * max(scale, 1e-300) * np.linalg.norm(vec, axis=0)
        if np.any(resid > bound):
            raise NonConvergence(
                f"eigenpair residual {resid.max():.3e} exceeds bound {bound.min():.3e}"
            )
    return ev, vec


def eig_hermitian(m: np.ndarray, atol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix; real ascending eigenvalues."""
    m = np.asarray(m, dtype=complex)
    herm_err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if herm_err > atol:
        raise NotHermitian(f"max |m - m^dag| = {herm_err:.3e} exceeds {atol:.1e}")
    w, v = np.linalg.eigh(m)
    return w, v


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def partial_trace(m: np.ndarray, dims: list[int], keep: list[int]) -> np.ndarray:
    """Trace out every subsystem not in ``keep``.

    ``dims`` lists the tensor factors from most significant to least, i.e.
    the full space is ``dims[0] x dims[1] x ...`` in Kronecker order. The
    kept factors stay in their original relative order.
    """
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionMismatch(f"matrix shape {m.shape} != prod(dims) {total}")
    keep = sorted(set(int(k) for k in keep))
    if not keep or any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"invalid keep set {keep} for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    traced = 0
    for sub in range(n):
        if sub in keep:
            continue
        axis = sub - traced
        t = np.trace(t, axis1=axis, axis2=axis + (n - traced))
        traced += 1
    d_keep = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d_keep, d_keep)


def inv_sqrt_psd(m: np.ndarray, rel_floor: float = 1e-12) -> np.ndarray:
    """Inverse square root of a Hermitian positive-definite matrix."""
    w, v = eig_hermitian(m)
    if w[0] <= rel_floor * w[-1]:
        raise Singular(f"min eigenvalue {w[0]:.3e} below {rel_floor:.1e} * max")
    return (v / np.sqrt(w)) @ v.conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m).flatten(order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape((dim, dim), order="F")


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b (both Hermitian)."""
    w = np.linalg.eigvalsh(hermitize(np.asarray(a) - np.asarray(b)))
    return 0.5 * float(np.sum(np.abs(w)))


def check_density_matrix(
    rho: np.ndarray,
    herm_atol: float = HERMITICITY_ATOL,
    trace_atol: float = TRACE_ATOL,
    eig_floor: float = PSD_EIG_FLOOR,
) -> None:
    """Raise unless rho is Hermitian, unit trace and PSD within tolerance."""
    rho = np.asarray(rho)
    herm_err = float(np.max(np.abs(rho - rho.conj().T)))
    if herm_err > herm_atol:
        raise NotHermitian(f"density matrix Hermiticity error {herm_err:.3e}")
    tr_err = abs(np.trace(rho) - 1.0)
    if tr_err > trace_atol:
        raise DimensionMismatch(f"density matrix trace error {tr_err:.3e}")
    w = np.linalg.eigvalsh(hermitize(rho))
    if w[0] < eig_floor:
        raise Singular(f"density matrix min eigenvalue {w[0]:.3e}")


def is_unitary(u: np.ndarray, atol: float = UNITARITY_ATOL) -> bool:
    u = np.asarray(u)
    eye = np.eye(u.shape[0])
    return bool(np.max(np.abs(u.conj().T @ u - eye)) <= atol)


def basis_state(dim: int, index: int) -> np.ndarray:
    """Computational-basis density matrix |index><index|."""
    rho = np.zeros((dim, dim), dtype=complex)
    rho[index, index] = 1.0
    return rho
