"""Layered-circuit IR, noise channels, and a density-matrix simulator with
mid-circuit measurement and reset.

Qubit indexing is little-endian: qubit 0 is the least significant bit of a
basis index, and the ancillas occupy qubits 0 .. n_ancilla-1 so that they
enter the first brickwork sublayer. A two-qubit gate attached to the pair
(a, b) is a 4x4 matrix indexed by ``2*bit(b) + bit(a)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import KrausChannel, from_choi
from .errors import (
    DimensionMismatch,
    InvalidParams,
    InvalidState,
    OutOfRange,
)
from .linalg import RngStream, as_generator, partial_trace, sample_haar_unitary

STATE_ATOL = 1e-8


@dataclass(frozen=True)
class MeasureReset:
    ancilla: int


@dataclass(frozen=True, eq=False)
class CircuitIR:
    """Brickwork circuit over ancilla + system qubits.

    ``layers`` is a sequence of sublayers; each sublayer is a tuple of
    ``((low_qubit, high_qubit), unitary_4x4)`` gates on disjoint pairs.
    ``terminal_ops`` lists the measure/reset of every ancilla, executed after
    all layers.
    """

    n_system: int
    n_ancilla: int
    layers: tuple = field(repr=False)
    terminal_ops: tuple = ()

    def __post_init__(self):
        m = self.n_system + self.n_ancilla
        if self.n_system < 1 or self.n_ancilla < 0:
            raise DimensionMismatch("need n_system >= 1 and n_ancilla >= 0")
        norm_layers = []
        for layer in self.layers:
            used = set()
            norm_layer = []
            for pair, gate in layer:
                a, b = int(pair[0]), int(pair[1])
                if a == b or not (0 <= a < m and 0 <= b < m):
                    raise DimensionMismatch(f"invalid qubit pair {pair} for {m} qubits")
                if a in used or b in used:
                    raise DimensionMismatch(f"overlapping pairs in one sublayer at {pair}")
                used.update((a, b))
                gate = np.asarray(gate, dtype=complex)
                if gate.shape != (4, 4):
                    raise DimensionMismatch(f"gate shape {gate.shape} != (4, 4)")
                norm_layer.append(((a, b), gate))
            norm_layers.append(tuple(norm_layer))
        object.__setattr__(self, "layers", tuple(norm_layers))
        ops = tuple(self.terminal_ops)
        seen = [op.ancilla for op in ops]
        if sorted(seen) != list(range(self.n_ancilla)):
            raise DimensionMismatch(
                f"terminal ops must measure each ancilla exactly once, got {seen}"
            )
        object.__setattr__(self, "terminal_ops", ops)

    @property
    def n_qubits(self) -> int:
        return self.n_system + self.n_ancilla


@dataclass(frozen=True)
class QubitNoise:
    """Per-qubit relaxation times (microseconds) and readout flip rates."""

    t1: float | None = None
    t2: float | None = None
    readout_p10: float = 0.0  # P(read 1 | prepared 0)
    readout_p01: float = 0.0  # P(read 0 | prepared 1)

    def __post_init__(self):
        if self.t1 is not None and self.t1 <= 0:
            raise InvalidParams(f"T1 must be positive, got {self.t1}")
        if self.t2 is not None and self.t2 <= 0:
            raise InvalidParams(f"T2 must be positive, got {self.t2}")
        if self.t1 is not None and self.t2 is not None and self.t2 > 2 * self.t1 + 1e-12:
            raise InvalidParams(f"T2 = {self.t2} exceeds 2*T1 = {2 * self.t1}")
        for p in (self.readout_p10, self.readout_p01):
            if not 0.0 <= p <= 1.0:
                raise InvalidParams(f"readout probability {p} outside [0, 1]")


@dataclass(frozen=True)
class NoiseModel:
    """Gate, reset, relaxation and readout error parameters.

    ``depolarizing`` is the per-gate error weight: 0 leaves the state
    untouched and 1 replaces the gate's qubit pair with the maximally mixed
    state. ``reset_error`` is the probability p that a reset ancilla ends in
    |1> instead of |0>. Durations are in microseconds and drive the per-qubit
    T1/T2 relaxation; qubits beyond the ``qubit_noise`` table relax not at
    all.
    """

    depolarizing: float = 0.0
    reset_error: float = 0.0
    gate_duration: float = 0.0
    measurement_duration: float = 1.0
    qubit_noise: tuple[QubitNoise, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.depolarizing <= 1.0:
            raise OutOfRange(f"depolarizing weight {self.depolarizing} outside [0, 1]")
        if not 0.0 <= self.reset_error <= 0.5:
            raise OutOfRange(f"reset error {self.reset_error} outside [0, 0.5]")
        if self.gate_duration < 0 or self.measurement_duration < 0:
            raise InvalidParams("durations must be nonnegative")
        object.__setattr__(self, "qubit_noise", tuple(self.qubit_noise))

    def qubit(self, q: int) -> QubitNoise:
        if q < len(self.qubit_noise):
            return self.qubit_noise[q]
        return QubitNoise()


def load_noise_model(path) -> NoiseModel:
    """Read a noise model from its JSON file format.

    Per-qubit rows mirror device calibration tables: T1/T2 in microseconds,
    a symmetric ``readout`` rate or explicit ``readout_p10``/``readout_p01``,
    and an optional ``reset_p10``. Row 0 is the ancilla; its ``reset_p10``
    supplies ``reset_error`` when no explicit value is given.
    """
    data = json.loads(Path(path).read_text())
    rows = []
    reset_from_row = None
    for idx, q in enumerate(data.get("qubits", [])):
        sym = q.get("readout")
        rows.append(
            QubitNoise(
                t1=q.get("t1_us"),
                t2=q.get("t2_us"),
                readout_p10=q.get("readout_p10", sym if sym is not None else 0.0),
                readout_p01=q.get("readout_p01", sym if sym is not None else 0.0),
            )
        )
        if idx == 0 and q.get("reset_p10") is not None:
            reset_from_row = float(q["reset_p10"])
    reset = data.get("reset_error")
    if reset is None:
        reset = reset_from_row if reset_from_row is not None else 0.0
    return NoiseModel(
        depolarizing=float(data.get("depolarizing", 0.0)),
        reset_error=float(reset),
        gate_duration=float(data.get("gate_duration_us", 0.0)),
        measurement_duration=float(data.get("measurement_duration_us", 1.0)),
        qubit_noise=tuple(rows),
    )


@dataclass
class SimState:
    """Single-owner density matrix over ancilla + system qubits."""

    rho: np.ndarray
    n_system: int
    n_ancilla: int
    rng: np.random.Generator | None = None

    @property
    def n_qubits(self) -> int:
        return self.n_system + self.n_ancilla

    def system_state(self) -> np.ndarray:
        """Marginal over the system qubits (ancillas traced out)."""
        if self.n_ancilla == 0:
            return self.rho
        m = self.n_qubits
        # system qubits are the high bits, i.e. the leading tensor factors
        return partial_trace(self.rho, [2] * m, keep=list(range(self.n_system)))


def initial_state(circ: CircuitIR, rng=None) -> SimState:
    dim = 1 << circ.n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    gen = None if rng is None else as_generator(rng)
    return SimState(rho=rho, n_system=circ.n_system, n_ancilla=circ.n_ancilla, rng=gen)


def build_random_circuit(
    n_system: int, depth: int, rng: RngStream, n_ancilla: int = 1
) -> CircuitIR:
    """Brickwork circuit of independent Haar SU(4) gates plus ancilla reset.

    Each depth unit applies an even-pair sublayer (0,1), (2,3), ... and then
    an odd-pair sublayer (1,2), (3,4), ... across the combined register;
    empty sublayers (two-qubit register) are omitted.
    """
    if n_system < 1 or depth < 1 or n_ancilla < 1:
        raise InvalidParams("need n_system >= 1, depth >= 1, n_ancilla >= 1")
    m = n_system + n_ancilla
    gen = as_generator(rng)
    layers = []
    for _ in range(depth):
        for start in (0, 1):
            sub = []
            for a in range(start, m - 1, 2):
                sub.append(((a, a + 1), sample_haar_unitary(4, gen)))
            if sub:
                layers.append(tuple(sub))
    ops = tuple(MeasureReset(a) for a in range(n_ancilla))
    return CircuitIR(n_system=n_system, n_ancilla=n_ancilla, layers=tuple(layers), terminal_ops=ops)


def embed_two_qubit(gate: np.ndarray, a: int, b: int, m: int) -> np.ndarray:
    """Lift a 4x4 gate on qubits (a low, b high) to the full 2^m space."""
    dim = 1 << m
    full = np.zeros((dim, dim), dtype=complex)
    mask = ~((1 << a) | (1 << b))
    for x in range(dim):
        base = x & mask
        col = (((x >> b) & 1) << 1) | ((x >> a) & 1)
        for out in range(4):
            y = base | ((out & 1) << a) | (((out >> 1) & 1) << b)
            full[y, x] = gate[out, col]
    return full


# Embedded layer unitaries are reused heavily (every simulation step and
# every matrix-unit probe of the same circuit), so compile them once per
# CircuitIR instance. Keyed by identity; the instance is retained so ids
# cannot be recycled while cached.
_compiled: dict[int, tuple] = {}


def _compiled_layers(circ: CircuitIR) -> list[list[tuple]]:
    hit = _compiled.get(id(circ))
    if hit is not None and hit[0] is circ:
        return hit[1]
    m = circ.n_qubits
    layers = [
        [(pair, embed_two_qubit(gate, pair[0], pair[1], m)) for pair, gate in layer]
        for layer in circ.layers
    ]
    if len(_compiled) > 128:
        _compiled.clear()
    _compiled[id(circ)] = (circ, layers)
    return layers


def _embed_single(op: np.ndarray, q: int, m: int) -> np.ndarray:
    left = np.eye(1 << (m - 1 - q))
    right = np.eye(1 << q)
    return np.kron(np.kron(left, op), right)


def _arrange_qubits(rho: np.ndarray, target_of_bit: list[int], m: int) -> np.ndarray:
    """Permute qubits so current bit j lands at position target_of_bit[j]."""
    dim = 1 << m
    x = np.arange(dim)
    old = np.zeros(dim, dtype=np.int64)
    for j, tgt in enumerate(target_of_bit):
        old |= ((x >> tgt) & 1) << j
    return rho[np.ix_(old, old)]


def faulty_reset_state(p: float) -> np.ndarray:
    """Reset target state: |0><0| with probability weight 1-p, |1><1| with p."""
    if not 0.0 <= p <= 0.5:
        raise OutOfRange(f"reset error {p} outside [0, 0.5]")
    return np.diag([1.0 - p, p]).astype(complex)


def depolarize(rho: np.ndarray, weight: float, qubits) -> np.ndarray:
    """Mix the selected qubits toward maximally mixed with the given weight.

    weight 0 is the identity map; weight 1 replaces the marginal of the
    selected qubits with I/2^k while preserving the rest of the state.
    """
    if not 0.0 <= weight <= 1.0:
        raise OutOfRange(f"depolarizing weight {weight} outside [0, 1]")
    qs = sorted(set(int(q) for q in qubits))
    m = int(round(np.log2(rho.shape[0])))
    if qs and (qs[0] < 0 or qs[-1] >= m):
        raise DimensionMismatch(f"qubits {qs} outside register of {m}")
    if weight == 0.0 or not qs:
        return np.array(rho, dtype=complex)
    k = len(qs)
    if k == m:
        mixed = np.eye(1 << m, dtype=complex) * (np.trace(rho) / (1 << m))
        return (1.0 - weight) * rho + weight * mixed
    rest_positions = [p for p in range(m) if p not in qs]
    keep_factors = [m - 1 - p for p in rest_positions]
    rest = partial_trace(rho, [2] * m, keep=sorted(keep_factors))
    combined = np.kron(rest, np.eye(1 << k, dtype=complex) / (1 << k))
    target = qs + rest_positions  # combined bit j<k is mixed qubit j
    replaced = _arrange_qubits(combined, target, m)
    return (1.0 - weight) * rho + weight * replaced


def thermal_relax(
    rho: np.ndarray,
    t1: float | None,
    t2: float | None,
    duration: float,
    qubit: int,
) -> np.ndarray:
    """Amplitude plus phase damping on one qubit for the given duration.

    gamma = 1 - exp(-duration/T1); the pure-dephasing rate is
    1/T2 - 1/(2 T1), which must be nonnegative (T2 <= 2 T1).
    """
    if duration < 0:
        raise InvalidParams(f"duration must be >= 0, got {duration}")
    rate1 = 0.0 if t1 is None else 1.0 / t1
    rate2 = 0.0 if t2 is None else 1.0 / t2
    if t2 is not None and rate2 < rate1 / 2.0 - 1e-15:
        raise InvalidParams(f"T2 = {t2} exceeds 2*T1 = {None if t1 is None else 2 * t1}")
    if duration == 0.0 or (t1 is None and t2 is None):
        return np.array(rho, dtype=complex)
    gamma = 1.0 - np.exp(-duration * rate1)
    phi_rate = max(rate2 - rate1 / 2.0, 0.0)
    f = np.exp(-duration * phi_rate)
    ops = []
    ad0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
    ad1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    d0 = np.sqrt((1.0 + f) / 2.0)
    d1 = np.sqrt((1.0 - f) / 2.0)
    z = np.diag([1.0, -1.0]).astype(complex)
    for a in (ad0, ad1):
        ops.append(d0 * a)
        if d1 > 0:
            ops.append(d1 * (z @ a))
    m = int(round(np.log2(rho.shape[0])))
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for k in ops:
        kk = _embed_single(k, qubit, m)
        out += kk @ rho @ kk.conj().T
    return out


def _relax_all(rho: np.ndarray, noise: NoiseModel, duration: float, qubits) -> np.ndarray:
    if duration <= 0:
        return rho
    for q in qubits:
        qn = noise.qubit(q)
        if qn.t1 is None and qn.t2 is None:
            continue
        rho = thermal_relax(rho, qn.t1, qn.t2, duration, q)
    return rho


def _apply_layers(rho: np.ndarray, circ: CircuitIR, noise: NoiseModel | None) -> np.ndarray:
    m = circ.n_qubits
    for layer in _compiled_layers(circ):
        for (a, b), u in layer:
            rho = u @ rho @ u.conj().T
        if noise is not None:
            for (a, b), _ in layer:
                if noise.depolarizing > 0:
                    rho = depolarize(rho, noise.depolarizing, (a, b))
            rho = _relax_all(rho, noise, noise.gate_duration, range(m))
    return rho


def _collapse_ancillas(
    rho: np.ndarray,
    circ: CircuitIR,
    noise: NoiseModel | None,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Measure the ancillas and return the system block, relaxed for the
    measurement duration.

    With no rng the unbiased average over outcomes is taken (trace out);
    with an rng one joint ancilla outcome is sampled and projected.
    """
    n_sys = circ.n_system
    n_anc = circ.n_ancilla
    if n_anc == 0:
        sys_rho = rho
    else:
        big_n = 1 << n_sys
        r_env = 1 << n_anc
        blocks = rho.reshape(big_n, r_env, big_n, r_env)
        if rng is None:
            sys_rho = np.ascontiguousarray(np.trace(blocks, axis1=1, axis2=3))
        else:
            probs = np.clip(np.einsum("sasa->a", blocks).real, 0.0, None)
            probs = probs / probs.sum()
            outcome = int(rng.choice(r_env, p=probs))
            sys_rho = np.ascontiguousarray(blocks[:, outcome, :, outcome])
            sys_rho = sys_rho / np.trace(sys_rho)
    if noise is not None and noise.measurement_duration > 0:
        for j in range(n_sys):
            qn = noise.qubit(n_anc + j)
            if qn.t1 is not None or qn.t2 is not None:
                sys_rho = thermal_relax(sys_rho, qn.t1, qn.t2, noise.measurement_duration, j)
    return sys_rho


def ancilla_product_state(n_ancilla: int, p: float) -> np.ndarray:
    """Product of n_ancilla reset states with error p."""
    state = np.eye(1, dtype=complex)
    one = faulty_reset_state(p)
    for _ in range(n_ancilla):
        state = np.kron(state, one)
    return state


def apply_iteration(
    sys_mat: np.ndarray,
    circ: CircuitIR,
    noise: NoiseModel | None,
    ancilla_state: np.ndarray | None = None,
) -> np.ndarray:
    """One linear application of the circuit map to a system-space matrix.

    Valid for arbitrary (non-state) inputs; used to probe the map on a
    matrix-unit basis. The ancillas enter in their reset state and are
    measured away, so input and output both live on the system space.
    """
    if ancilla_state is None:
        p = 0.0 if noise is None else noise.reset_error
        ancilla_state = ancilla_product_state(circ.n_ancilla, p)
    full = np.kron(np.asarray(sys_mat, dtype=complex), ancilla_state)
    full = _apply_layers(full, circ, noise)
    return _collapse_ancillas(full, circ, noise, rng=None)


def simulate_step(
    state: SimState,
    circ: CircuitIR,
    noise: NoiseModel | None = None,
    trajectory: bool = False,
    fresh_ancilla: bool = False,
) -> SimState:
    """Apply one full block: all layers, then measure/reset of the ancillas.

    The default measurement semantics is the deterministic unbiased average
    over outcomes (trace out and reattach). ``trajectory=True`` instead
    samples the ancilla outcome, projects and renormalizes, which matches
    the deterministic mode in expectation. ``fresh_ancilla=True`` reattaches
    pristine |0> ancillas regardless of the reset error, modeling the
    variant that brings in new qubits instead of reusing measured ones.
    """
    if state.n_system != circ.n_system or state.n_ancilla != circ.n_ancilla:
        raise DimensionMismatch("simulator state does not match circuit shape")
    if trajectory and state.rng is None:
        raise InvalidParams("trajectory mode needs a SimState with an rng")
    rho = _apply_layers(state.rho, circ, noise)
    sys_rho = _collapse_ancillas(rho, circ, noise, rng=state.rng if trajectory else None)
    p = 0.0 if (noise is None or fresh_ancilla) else noise.reset_error
    rho = np.kron(sys_rho, ancilla_product_state(circ.n_ancilla, p))
    _validate_state(rho)
    return SimState(
        rho=rho, n_system=state.n_system, n_ancilla=state.n_ancilla, rng=state.rng
    )


def _validate_state(rho: np.ndarray) -> None:
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = abs(np.trace(rho) - 1.0)
    if herm > STATE_ATOL or tr > STATE_ATOL:
        raise InvalidState(f"state invariants violated: herm {herm:.2e}, trace {tr:.2e}")
    w_min = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
    if w_min < -1e-9:
        raise InvalidState(f"state has eigenvalue {w_min:.2e} < -1e-9")


def circuit_to_channel(circ: CircuitIR, noise: NoiseModel | None = None) -> KrausChannel:
    """Extract the system-space Kraus channel realized by one circuit block.

    Noiseless circuits compose their layers into a dilation unitary whose
    blocks against the ancilla basis are the Kraus operators (numerically
    zero blocks are dropped). Noisy circuits probe the simulator map on the
    matrix-unit basis, assemble the Choi matrix, and extract Kraus operators
    from it; noise can only grow the Kraus rank.
    """
    big_n = 1 << circ.n_system
    if noise is None:
        m = circ.n_qubits
        u_total = np.eye(1 << m, dtype=complex)
        for layer in _compiled_layers(circ):
            for _, u in layer:
                u_total = u @ u_total
        r_env = 1 << circ.n_ancilla
        blocks = u_total.reshape(big_n, r_env, big_n, r_env)
        ops = []
        for i in range(r_env):
            k = blocks[:, i, :, 0]
            if np.sum(np.abs(k) ** 2) >= 1e-10:
                ops.append(np.ascontiguousarray(k))
        return KrausChannel(big_n, tuple(ops))
    choi = np.zeros((big_n * big_n, big_n * big_n), dtype=complex)
    for i in range(big_n):
        for j in range(big_n):
            unit = np.zeros((big_n, big_n), dtype=complex)
            unit[i, j] = 1.0
            out = apply_iteration(unit, circ, noise)
            block = np.zeros((big_n, big_n), dtype=complex)
            block[i, j] = 1.0
            choi += np.kron(block, out)
    return from_choi(choi)


def sample_shots(
    rho: np.ndarray,
    shots: int,
    readout: tuple[QubitNoise, ...] | None,
    rng,
) -> dict[str, int]:
    """Multinomial measurement of diag(rho) with per-qubit readout flips.

    Bitstring keys read most significant qubit first, so qubit 0 is the
    rightmost character.
    """
    if shots < 1:
        raise InvalidParams(f"shots must be >= 1, got {shots}")
    gen = as_generator(rng)
    dim = rho.shape[0]
    n = int(round(np.log2(dim)))
    probs = np.clip(np.diagonal(rho).real, 0.0, None)
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise InvalidState(f"diagonal mass {total:.6f} is not a distribution")
    probs = probs / total
    counts = gen.multinomial(shots, probs)
    if readout is not None and any(
        q.readout_p10 > 0 or q.readout_p01 > 0 for q in readout[:n]
    ):
        outcomes = np.repeat(np.arange(dim), counts)
        bits = (outcomes[:, None] >> np.arange(n)) & 1
        p10 = np.array([readout[q].readout_p10 if q < len(readout) else 0.0 for q in range(n)])
        p01 = np.array([readout[q].readout_p01 if q < len(readout) else 0.0 for q in range(n)])
        flip_prob = np.where(bits == 0, p10[None, :], p01[None, :])
        flips = gen.random(bits.shape) < flip_prob
        bits = bits ^ flips
        outcomes = (bits << np.arange(n)).sum(axis=1)
        counts = np.bincount(outcomes, minlength=dim)
    return {
        format(idx, f"0{n}b"): int(c) for idx, c in enumerate(counts) if c > 0
    }


def with_reset_error(noise: NoiseModel | None, p: float) -> NoiseModel:
    base = noise if noise is not None else NoiseModel()
    return replace(base, reset_error=p)
