"""CPTP quantum channels in Kraus form and random-channel constructions.

Conventions fixed here and relied on everywhere else:

* vectorization is column-stacking, so the superoperator of a channel with
  Kraus operators ``K_i`` is ``sum_i conj(K_i) (x) K_i``;
* the Choi matrix lives on (input (x) output) with the input factor major,
  is unnormalized (``Choi = sum_ij |i><j| (x) E(|i><j|)``), and trace
  preservation reads ``Tr_out(Choi) = I``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotCP, NotTP, Singular
from .linalg import (
    RngStream,
    eig_hermitian,
    inv_sqrt_psd,
    partial_trace,
    sample_ginibre,
    sample_haar_unitary,
    unvec,
    vec,
)

TP_ATOL = 1e-10
CHOI_EIG_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A trace-preserving quantum channel as a list of Kraus operators."""

    dim: int
    kraus_ops: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        object.__setattr__(self, "kraus_ops", ops)
        n = self.dim
        if not ops:
            raise DimensionMismatch("channel needs at least one Kraus operator")
        if len(ops) > n * n:
            raise DimensionMismatch(f"rank {len(ops)} exceeds dim^2 = {n * n}")
        for k in ops:
            if k.shape != (n, n):
                raise DimensionMismatch(f"Kraus operator shape {k.shape} != ({n}, {n})")
        tp = sum(k.conj().T @ k for k in ops)
        err = float(np.max(np.abs(tp - np.eye(n))))
        if err > TP_ATOL:
            raise NotTP(f"trace-preservation violated: max |sum K^dag K - I| = {err:.3e}")

    @property
    def rank(self) -> int:
        return len(self.kraus_ops)


def apply_kraus(kraus_ops, mat: np.ndarray) -> np.ndarray:
    """Linear action sum_i K_i M K_i^dag; valid for any matrix input."""
    out = np.zeros_like(np.asarray(mat, dtype=complex))
    for k in kraus_ops:
        out += k @ mat @ k.conj().T
    return out


def apply(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.dim, ch.dim):
        raise DimensionMismatch(f"state shape {rho.shape} != ({ch.dim}, {ch.dim})")
    return apply_kraus(ch.kraus_ops, rho)


def iterate(ch: KrausChannel, rho: np.ndarray, t: int) -> np.ndarray:
    """t-fold composition of the channel; t = 0 returns the input."""
    if t < 0:
        raise DimensionMismatch(f"iteration count must be >= 0, got {t}")
    out = np.asarray(rho, dtype=complex)
    for _ in range(t):
        out = apply(ch, out)
    return out


def random_ginibre_kraus(n_qubits: int, rank: int, rng: RngStream) -> KrausChannel:
    """Random channel from normalized Ginibre matrices: K_i = G_i S^{-1/2}.

    S = sum_i G_i^dag G_i, so trace preservation holds by construction. A
    singular S is retried with fresh randomness at most 3 times; repeated
    failure indicates an RNG bug and is surfaced rather than looped over.
    """
    if rank < 1:
        raise DimensionMismatch(f"rank must be >= 1, got {rank}")
    n = 2**n_qubits
    if rank > n * n:
        raise DimensionMismatch(f"rank {rank} exceeds dim^2 = {n * n}")
    g = rng.generator() if isinstance(rng, RngStream) else rng
    last = None
    for _ in range(3):
        gs = [sample_ginibre(n, n, g) for _ in range(rank)]
        s = sum(x.conj().T @ x for x in gs)
        try:
            root = inv_sqrt_psd(s)
        except Singular as exc:
            last = exc
            continue
        return KrausChannel(n, tuple(x @ root for x in gs))
    raise Singular(f"normalization matrix singular after 3 attempts: {last}")


def random_stinespring(n_qubits: int, rank: int, rng: RngStream) -> KrausChannel:
    """Random channel from a Haar unitary on system (x) environment.

    The environment has dimension ``rank``; the Kraus operators are the
    blocks ``K_i = <e_i| U |e_0>`` of the dilation unitary, with the
    environment as the least significant tensor factor.
    """
    if rank < 1:
        raise DimensionMismatch(f"rank must be >= 1, got {rank}")
    n = 2**n_qubits
    if rank > n * n:
        raise DimensionMismatch(f"rank {rank} exceeds dim^2 = {n * n}")
    u = sample_haar_unitary(n * rank, rng)
    blocks = u.reshape(n, rank, n, rank)
    return KrausChannel(n, tuple(blocks[:, i, :, 0] for i in range(rank)))


def random_choi_channel(n_qubits: int, rank: int, rng: RngStream) -> KrausChannel:
    """Random channel from a rank-constrained random Choi matrix.

    A Wishart matrix GG^dag on input (x) output is projected onto the
    trace-preserving slice by the standard symmetric normalization
    ``C = (Q^{-1/2} (x) I) W (Q^{-1/2} (x) I)`` with ``Q = Tr_out(W)``.
    """
    if rank < 1:
        raise DimensionMismatch(f"rank must be >= 1, got {rank}")
    n = 2**n_qubits
    if rank > n * n:
        raise DimensionMismatch(f"rank {rank} exceeds dim^2 = {n * n}")
    g = rng.generator() if isinstance(rng, RngStream) else rng
    gm = sample_ginibre(n * n, rank, g)
    w = gm @ gm.conj().T
    q = partial_trace(w, [n, n], keep=[0])
    root = inv_sqrt_psd(q)
    proj = np.kron(root, np.eye(n))
    return from_choi(proj @ w @ proj)


def to_superoperator(ch: KrausChannel) -> np.ndarray:
    """N^2 x N^2 matrix acting on column-stacked states."""
    return sum(np.kron(k.conj(), k) for k in ch.kraus_ops)


def to_choi(ch: KrausChannel) -> np.ndarray:
    """Unnormalized Choi matrix on input (x) output."""
    n2 = ch.dim * ch.dim
    choi = np.zeros((n2, n2), dtype=complex)
    for k in ch.kraus_ops:
        v = vec(k).reshape(-1, 1)
        choi += v @ v.conj().T
    return choi


def from_choi(choi: np.ndarray, eig_cutoff: float = CHOI_EIG_CUTOFF) -> KrausChannel:
    """Extract Kraus operators from a Choi matrix by eigendecomposition.

    Eigenvalues below ``eig_cutoff`` are dropped; keeping numerically-zero
    directions would inflate the declared rank and break rank-dependent
    spectral predictions downstream.
    """
    choi = np.asarray(choi, dtype=complex)
    n2 = choi.shape[0]
    n = int(round(np.sqrt(n2)))
    if choi.shape != (n2, n2) or n * n != n2:
        raise DimensionMismatch(f"Choi matrix shape {choi.shape} is not (N^2, N^2)")
    w, v = eig_hermitian(choi)
    if w[0] < -1e-9:
        raise NotCP(f"Choi matrix has eigenvalue {w[0]:.3e} < -1e-9")
    tr_out = partial_trace(choi, [n, n], keep=[0])
    tp_err = float(np.max(np.abs(tr_out - np.eye(n))))
    if tp_err > 1e-8:
        raise NotTP(f"Tr_out(Choi) deviates from identity by {tp_err:.3e}")
    ops = []
    for i in range(n2 - 1, -1, -1):
        if w[i] < eig_cutoff:
            break
        ops.append(np.sqrt(w[i]) * unvec(v[:, i], n))
    return KrausChannel(n, tuple(ops))


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """Channel applying ``inner`` first, then ``outer``.

    The product Kraus family is reduced through the Choi form so the stored
    rank never exceeds N^2.
    """
    if outer.dim != inner.dim:
        raise DimensionMismatch(f"dims {outer.dim} != {inner.dim}")
    prods = tuple(a @ b for a in outer.kraus_ops for b in inner.kraus_ops)
    n2 = outer.dim**2
    choi = np.zeros((n2, n2), dtype=complex)
    for k in prods:
        v = vec(k).reshape(-1, 1)
        choi += v @ v.conj().T
    return from_choi(choi)


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel(u.shape[0], (np.asarray(u, dtype=complex),))


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel(dim, (np.eye(dim, dtype=complex),))


def depolarizing_channel(dim: int) -> KrausChannel:
    """Completely depolarizing channel rho -> I/N, rank N^2."""
    ops = []
    for i in range(dim):
        for j in range(dim):
            k = np.zeros((dim, dim), dtype=complex)
            k[i, j] = 1.0 / np.sqrt(dim)
            ops.append(k)
    return KrausChannel(dim, tuple(ops))


def channel_to_dict(ch: KrausChannel) -> dict:
    """JSON-compatible form: row-major interleaved re/im entry arrays."""
    ops = []
    for k in ch.kraus_ops:
        flat = k.reshape(-1)
        inter = np.empty(2 * flat.size)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        ops.append(inter.tolist())
    return {"dim": ch.dim, "rank": ch.rank, "kraus_ops": ops}


def channel_from_dict(data: dict) -> KrausChannel:
    n = int(data["dim"])
    ops = []
    for entry in data["kraus_ops"]:
        arr = np.asarray(entry, dtype=float)
        if arr.size != 2 * n * n:
            raise DimensionMismatch(f"entry array length {arr.size} != 2*N^2")
        ops.append((arr[0::2] + 1j * arr[1::2]).reshape(n, n))
    ch = KrausChannel(n, tuple(ops))
    if "rank" in data and int(data["rank"]) != ch.rank:
        raise DimensionMismatch(f"declared rank {data['rank']} != {ch.rank} operators")
    return ch


def channel_to_json(ch: KrausChannel) -> str:
    return json.dumps(channel_to_dict(ch))


def channel_from_json(text: str) -> KrausChannel:
    return channel_from_dict(json.loads(text))
