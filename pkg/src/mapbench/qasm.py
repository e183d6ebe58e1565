"""OpenQASM 3 export with two-qubit gate decomposition, plus the shot
histogram file format.

Every 4x4 gate is compiled to the {CX, U} basis through its Cartan form:
three CX gates sandwiched between single-qubit rotations. The decomposition
is verified on the spot by rebuilding the matrix; a residual above 1e-8 (up
to global phase) raises instead of emitting a bad program.

Bit order is little-endian everywhere: qubit 0 is the least significant
classical bit, i.e. the rightmost character of a histogram bitstring.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import CircuitIR
from .errors import DecompositionFailure, InvalidParams, MalformedHistogram

# Magic (Bell-like) basis: conjugation maps SO(4) onto SU(2) x SU(2) and
# diagonalizes the two-qubit interaction generators.
MAGIC = np.array(
    [
        [1, 1j, 0, 0],
        [0, 0, 1j, 1],
        [0, 0, 1j, -1],
        [1, -1j, 0, 0],
    ],
    dtype=complex,
) / math.sqrt(2)
MAGIC_DAG = MAGIC.conj().T

# Local two-qubit constants; basis index is 2*bit(high wire) + bit(low wire).
SWAP_LOCAL = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
CX_HI_LO = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CX_LO_HI = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)

DECOMP_ATOL = 1e-8


@dataclass(frozen=True)
class QasmProgram:
    source: str
    n_qubits: int
    n_bits: int
    metadata: dict


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def u_gate_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """Matrix of the OpenQASM 3 builtin U(theta, phi, lam)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Angles (theta, phi, lam) with U(theta, phi, lam) ~ u up to phase."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    su = u * np.exp(-0.5j * np.angle(det))
    a, b = su[0, 0], su[1, 0]
    theta = 2.0 * math.atan2(abs(b), abs(a))
    if abs(b) < 1e-12:
        return theta, 0.0, -2.0 * float(np.angle(a))
    if abs(a) < 1e-12:
        return theta, 2.0 * float(np.angle(b)), 0.0
    ang_a, ang_b = float(np.angle(a)), float(np.angle(b))
    return theta, ang_b - ang_a, -ang_a - ang_b


def _cluster_boundaries(values: np.ndarray, tol: float) -> list[int]:
    cuts = [0]
    for i in range(1, values.size):
        if values[i] - values[i - 1] > tol:
            cuts.append(i)
    cuts.append(values.size)
    return cuts


def _diag_orthogonal_symmetric(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonalize a complex symmetric unitary with a real orthogonal basis.

    Real and imaginary parts are commuting real symmetric matrices, so a
    two-stage eigh (refining within eigenvalue clusters of the real part)
    produces a shared real eigenbasis even with degeneracies.
    """
    re, im = m.real, m.imag
    w, p = np.linalg.eigh(re)
    cuts = _cluster_boundaries(w, 1e-7)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo == 1:
            continue
        block = p[:, lo:hi]
        _, v = np.linalg.eigh(block.T @ im @ block)
        p[:, lo:hi] = block @ v
    d = p.T @ m @ p
    eigs = np.diagonal(d).copy()
    if np.max(np.abs(d - np.diag(eigs))) > 1e-8:
        raise DecompositionFailure("simultaneous diagonalization residual too large")
    return eigs, p


def _match_order(eigs_ref: np.ndarray, eigs: np.ndarray, p: np.ndarray):
    """Reorder columns of p so its eigenvalues align with eigs_ref by phase."""
    remaining = list(range(eigs.size))
    order = []
    for target in eigs_ref:
        best = min(
            remaining,
            key=lambda j: abs(np.exp(1j * np.angle(eigs[j])) - np.exp(1j * np.angle(target))),
        )
        remaining.remove(best)
        order.append(best)
    return eigs[order], p[:, order]


def _so4_factor(mat: np.ndarray, what: str) -> np.ndarray:
    if np.max(np.abs(mat.imag)) > 1e-7:
        raise DecompositionFailure(f"{what} is not real: residual {np.max(np.abs(mat.imag)):.2e}")
    real = mat.real
    if np.max(np.abs(real.T @ real - np.eye(4))) > 1e-7:
        raise DecompositionFailure(f"{what} is not orthogonal")
    return real


def _split_local(m4: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an exact tensor product into (high-wire, low-wire) factors."""
    k = m4.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(k)
    if s[1] > 1e-7 * s[0]:
        raise DecompositionFailure(f"matrix is not a tensor product: s1/s0 = {s[1] / s[0]:.2e}")
    # k = flat(hi) outer flat(lo) with a plain transpose, so the right factor
    # is the vh row itself, not its conjugate
    a = u[:, 0].reshape(2, 2) * math.sqrt(s[0])
    b = vh[0, :].reshape(2, 2) * math.sqrt(s[0])
    return a, b


def decompose_two_qubit(gate: np.ndarray) -> list[tuple]:
    """Compile a 4x4 unitary to CX and U gates on local wires 0 (low) and 1
    (high).

    Returns ops in circuit order: ``("u", wire, (theta, phi, lam))`` and
    ``("cx", control, target)``. The canonical interaction angles come from
    the eigenvalue phases of u u^T in the magic basis; the single-qubit
    dressings are recovered by simultaneous orthogonal diagonalization. The
    result is always verified against the input up to global phase.
    """
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (4, 4):
        raise DecompositionFailure(f"expected a 4x4 matrix, got {gate.shape}")
    if np.max(np.abs(gate.conj().T @ gate - np.eye(4))) > 1e-9:
        raise DecompositionFailure("input is not unitary")
    su = gate * np.exp(-0.25j * np.angle(np.linalg.det(gate)))
    # Pre-composing a SWAP keeps the interior circuit's determinant bookkeeping
    # consistent; it cancels against swapped placement of the trailing locals.
    target = np.exp(0.25j * math.pi) * (SWAP_LOCAL @ su)

    u_m = MAGIC_DAG @ target @ MAGIC
    gamma = u_m @ u_m.T
    angles = np.sort(np.angle(np.linalg.eigvals(gamma)))
    x, y, z = angles[0], angles[1], angles[2]
    alpha, beta, delta = (x + y) / 2, (x + z) / 2, (z + y) / 2

    interior = [
        ("cx", 0, 1),
        ("u", 1, (0.0, 0.0, delta)),  # rz(delta) up to phase
        ("u", 0, (beta, 0.0, 0.0)),  # ry(beta)
        ("cx", 1, 0),
        ("u", 0, (alpha, 0.0, 0.0)),  # ry(alpha)
        ("cx", 0, 1),
    ]
    v = (
        SWAP_LOCAL
        @ CX_LO_HI
        @ np.kron(np.eye(2), _ry(alpha))
        @ CX_HI_LO
        @ np.kron(_rz(delta), _ry(beta))
        @ CX_LO_HI
    )
    v_m = MAGIC_DAG @ v @ MAGIC

    eig_u, p = _diag_orthogonal_symmetric(u_m @ u_m.T)
    eig_v, q = _diag_orthogonal_symmetric(v_m @ v_m.T)
    _, q = _match_order(eig_u, eig_v, q)
    if np.linalg.det(p) < 0:
        p = p @ np.diag([1, 1, 1, -1])
    if np.linalg.det(q) < 0:
        q = q @ np.diag([1, 1, 1, -1])
    g = p @ q.T
    h = _so4_factor(v_m.conj().T @ g.T @ u_m, "inner local factor")

    ab = MAGIC @ g @ MAGIC_DAG
    cd = MAGIC @ h @ MAGIC_DAG
    a_hi, b_lo = _split_local(ab)
    c_hi, d_lo = _split_local(cd)

    ops: list[tuple] = []
    ops.append(("u", 1, zyz_angles(c_hi)))
    ops.append(("u", 0, zyz_angles(d_lo)))
    ops.extend(interior)
    # the SWAP absorbed above exchanges which wire receives each outer factor
    ops.append(("u", 0, zyz_angles(a_hi)))
    ops.append(("u", 1, zyz_angles(b_lo)))

    rebuilt = rebuild_local(ops)
    err = phase_aligned_error(gate, rebuilt)
    if err > DECOMP_ATOL:
        raise DecompositionFailure(f"round-trip error {err:.3e} exceeds {DECOMP_ATOL:.1e}")
    return ops


def rebuild_local(ops: list[tuple]) -> np.ndarray:
    """Multiply an op list back into a 4x4 matrix (wire 0 low, wire 1 high)."""
    acc = np.eye(4, dtype=complex)
    for op in ops:
        if op[0] == "u":
            _, wire, (theta, phi, lam) = op
            m = u_gate_matrix(theta, phi, lam)
            full = np.kron(m, np.eye(2)) if wire == 1 else np.kron(np.eye(2), m)
        elif op[0] == "cx":
            _, ctrl, tgt = op
            if (ctrl, tgt) == (0, 1):
                full = CX_LO_HI
            elif (ctrl, tgt) == (1, 0):
                full = CX_HI_LO
            else:
                raise InvalidParams(f"bad cx wires {(ctrl, tgt)}")
        else:
            raise InvalidParams(f"unknown op {op[0]!r}")
        acc = full @ acc
    return acc


def phase_aligned_error(target: np.ndarray, candidate: np.ndarray) -> float:
    """Max entrywise deviation after aligning the global phase."""
    overlap = np.trace(candidate.conj().T @ target)
    if abs(overlap) < 1e-12:
        return float(np.max(np.abs(target - candidate)))
    phase = overlap / abs(overlap)
    return float(np.max(np.abs(target - candidate * phase)))


def _format_angle(x: float) -> str:
    # repr gives the shortest round-tripping literal, keeping export
    # deterministic for identical inputs
    return repr(float(x))


def export_qasm(circ: CircuitIR, repetitions: int, metadata: dict | None = None) -> QasmProgram:
    """Emit OpenQASM 3 for `repetitions` blocks of the circuit.

    Each block ends with an ancilla measure immediately followed by a reset
    of the same qubit, and the program closes with one measurement of every
    system qubit into the output register (classical bit j <- system qubit
    j, little-endian).
    """
    if repetitions < 1:
        raise InvalidParams(f"repetitions must be >= 1, got {repetitions}")
    m = circ.n_qubits
    n_anc = circ.n_ancilla
    lines = ["OPENQASM 3.0;", 'include "stdgates.inc";']
    meta = dict(metadata or {})
    for key in sorted(meta):
        lines.append(f"// {key}: {meta[key]}")
    lines.append(f"qubit[{m}] q;")
    lines.append(f"bit[{circ.n_system}] out;")
    if n_anc:
        lines.append(f"bit[{n_anc}] mid;")
    gate_ops = []
    for layer in circ.layers:
        layer_ops = []
        for (a, b), gate in layer:
            for op in decompose_two_qubit(gate):
                if op[0] == "u":
                    _, wire, (theta, phi, lam) = op
                    qubit = b if wire == 1 else a
                    layer_ops.append(
                        f"U({_format_angle(theta)}, {_format_angle(phi)}, "
                        f"{_format_angle(lam)}) q[{qubit}];"
                    )
                else:
                    _, ctrl, tgt = op
                    cq = b if ctrl == 1 else a
                    tq = b if tgt == 1 else a
                    layer_ops.append(f"cx q[{cq}], q[{tq}];")
        gate_ops.append(layer_ops)
    for rep in range(repetitions):
        lines.append(f"// block {rep + 1}")
        for layer_ops in gate_ops:
            lines.extend(layer_ops)
        for op in circ.terminal_ops:
            lines.append(f"mid[{op.ancilla}] = measure q[{op.ancilla}];")
            lines.append(f"reset q[{op.ancilla}];")
    for j in range(circ.n_system):
        lines.append(f"out[{j}] = measure q[{n_anc + j}];")
    source = "\n".join(lines) + "\n"
    return QasmProgram(
        source=source,
        n_qubits=m,
        n_bits=circ.n_system + n_anc,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# histogram files


def save_histogram_file(path, histogram: dict[str, int], metadata: dict | None = None) -> None:
    payload = {"histogram": dict(sorted(histogram.items())), "metadata": metadata or {}}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_histogram_file(path) -> tuple[dict[str, int], dict]:
    """Parse a histogram file, returning (counts, metadata).

    Accepts either the canonical ``{"histogram": {...}, "metadata": {...}}``
    layout or a bare bitstring->count object. All failures raise
    MalformedHistogram with the offending location.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedHistogram(f"{path}: unreadable: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedHistogram(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise MalformedHistogram(f"{path}: top level must be a JSON object")
    meta = {}
    if "histogram" in data:
        hist_obj = data["histogram"]
        meta = data.get("metadata") or {}
        if not isinstance(meta, dict):
            raise MalformedHistogram(f"{path}: metadata must be an object")
    else:
        hist_obj = data
    if not isinstance(hist_obj, dict) or not hist_obj:
        raise MalformedHistogram(f"{path}: histogram must be a non-empty object")
    width = None
    hist: dict[str, int] = {}
    for key, value in hist_obj.items():
        if not isinstance(key, str) or not key or set(key) - {"0", "1"}:
            raise MalformedHistogram(f"{path}: key {key!r} is not a bitstring")
        if width is None:
            width = len(key)
        elif len(key) != width:
            raise MalformedHistogram(
                f"{path}: key {key!r} width {len(key)} != {width}"
            )
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            raise MalformedHistogram(f"{path}: count for {key!r} must be a positive integer")
        hist[key] = value
    return hist, meta


def parse_histograms(path) -> dict[str, int]:
    """Histogram file -> bitstring count map (qubit 0 = least significant bit)."""
    hist, _ = load_histogram_file(path)
    return hist
