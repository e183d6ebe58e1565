import json

import numpy as np
import pytest

from mapbench.channel import apply
from mapbench.circuit import (
    CircuitIR,
    MeasureReset,
    NoiseModel,
    QubitNoise,
    ancilla_product_state,
    build_random_circuit,
    circuit_to_channel,
    depolarize,
    faulty_reset_state,
    initial_state,
    load_noise_model,
    sample_shots,
    simulate_step,
    thermal_relax,
)
from mapbench.errors import DimensionMismatch, InvalidParams, OutOfRange
from mapbench.linalg import RngStream, basis_state, partial_trace
from mapbench.rmt import ks_distance, sample_fixed_trace_wishart


def random_density(n, rng):
    return sample_fixed_trace_wishart(n, 1, rng)


def test_build_smallest_instance():
    circ = build_random_circuit(1, 1, RngStream(0))
    assert len(circ.layers) == 1
    assert len(circ.layers[0]) == 1
    assert circ.layers[0][0][0] == (0, 1)
    assert circ.terminal_ops == (MeasureReset(0),)


def test_build_brickwork_pattern():
    circ = build_random_circuit(3, 2, RngStream(1))
    # 4 qubits: even sublayer (0,1),(2,3); odd sublayer (1,2); twice
    assert [len(layer) for layer in circ.layers] == [2, 1, 2, 1]
    assert [pair for pair, _ in circ.layers[0]] == [(0, 1), (2, 3)]
    assert [pair for pair, _ in circ.layers[1]] == [(1, 2)]


def test_build_determinism():
    a = build_random_circuit(3, 3, RngStream(2))
    b = build_random_circuit(3, 3, RngStream(2))
    assert len(a.layers) == len(b.layers)
    for la, lb in zip(a.layers, lb_list := b.layers):
        for (pa, ga), (pb, gb) in zip(la, lb):
            assert pa == pb
            assert np.array_equal(ga, gb)


def test_circuit_validation_rejects_overlap():
    gate = np.eye(4, dtype=complex)
    with pytest.raises(DimensionMismatch):
        CircuitIR(2, 1, ((((0, 1), gate), ((1, 2), gate)),), (MeasureReset(0),))


def test_circuit_validation_requires_each_ancilla_measured():
    with pytest.raises(DimensionMismatch):
        CircuitIR(2, 1, ((), ), ())


def test_faulty_reset_endpoints():
    assert np.array_equal(faulty_reset_state(0.0), np.diag([1.0, 0.0]))
    assert np.array_equal(faulty_reset_state(0.5), np.eye(2) / 2)
    assert np.array_equal(faulty_reset_state(0.25), np.diag([0.75, 0.25]))


def test_faulty_reset_out_of_range():
    with pytest.raises(OutOfRange):
        faulty_reset_state(0.6)
    with pytest.raises(OutOfRange):
        faulty_reset_state(-0.1)


def test_depolarize_identity_and_full():
    rho = random_density(8, RngStream(3))
    assert np.array_equal(depolarize(rho, 0.0, (0, 1)), rho)
    full = depolarize(rho, 1.0, (0, 1, 2))
    assert np.max(np.abs(full - np.eye(8) / 8)) <= 1e-12


def test_depolarize_partial_preserves_other_marginal():
    rho = random_density(8, RngStream(4))
    out = depolarize(rho, 1.0, (0, 1))
    # qubit 2 marginal untouched (it is tensor factor 0 of [2, 4])
    want = partial_trace(rho, [2, 4], keep=[0])
    got = partial_trace(out, [2, 4], keep=[0])
    assert np.max(np.abs(got - want)) <= 1e-12
    # the depolarized pair is exactly maximally mixed
    pair = partial_trace(out, [2, 4], keep=[1])
    assert np.max(np.abs(pair - np.eye(4) / 4)) <= 1e-12


def test_depolarize_interpolates_linearly():
    rho = random_density(4, RngStream(5))
    lo = depolarize(rho, 0.0, (0, 1))
    hi = depolarize(rho, 1.0, (0, 1))
    mid = depolarize(rho, 0.3, (0, 1))
    assert np.max(np.abs(mid - (0.7 * lo + 0.3 * hi))) <= 1e-12


def test_depolarize_out_of_range():
    with pytest.raises(OutOfRange):
        depolarize(np.eye(2) / 2, 1.5, (0,))


def test_thermal_relax_zero_duration_is_identity():
    rho = random_density(2, RngStream(6))
    assert np.array_equal(thermal_relax(rho, 300.0, 200.0, 0.0, 0), rho)


def test_thermal_relax_long_duration_decays_to_ground():
    rho = basis_state(2, 1)
    out = thermal_relax(rho, 1.0, 1.0, 50.0, 0)
    assert np.max(np.abs(out - basis_state(2, 0))) <= 1e-6


def test_thermal_relax_population_oracle():
    # exp decay of the excited population: scalar closed form
    out = thermal_relax(basis_state(2, 1), 300.0, 200.0, 0.5, 0)
    want = 1.0 - np.exp(-1.0 / 600.0)
    assert abs(out[0, 0].real - want) <= 1e-12
    assert abs(out[1, 1].real - np.exp(-1.0 / 600.0)) <= 1e-12


def test_thermal_relax_coherence_oracle():
    # off-diagonals shrink by exactly exp(-t/T2)
    plus = np.ones((2, 2), dtype=complex) / 2
    t1, t2, dur = 300.0, 200.0, 0.7
    out = thermal_relax(plus, t1, t2, dur, 0)
    assert abs(out[0, 1] - 0.5 * np.exp(-dur / t2)) <= 1e-12


def test_thermal_relax_rejects_bad_t2():
    with pytest.raises(InvalidParams):
        thermal_relax(np.eye(2) / 2, 100.0, 250.0, 0.1, 0)


def test_thermal_relax_embeds_on_selected_qubit():
    rho = np.kron(basis_state(2, 1), basis_state(2, 1))  # qubits 0 and 1 excited
    out = thermal_relax(rho, 1.0, None, 100.0, 1)
    # qubit 1 relaxed to |0>, qubit 0 untouched
    q0 = partial_trace(out, [2, 2], keep=[1])
    q1 = partial_trace(out, [2, 2], keep=[0])
    assert np.max(np.abs(q1 - basis_state(2, 0))) <= 1e-6
    assert np.max(np.abs(q0 - basis_state(2, 1))) <= 1e-12


def test_simulator_matches_channel_noiseless():
    gen = RngStream(7).generator()
    for n_sys, depth in [(1, 1), (2, 2), (3, 3)]:
        circ = build_random_circuit(n_sys, depth, RngStream(8).child(n_sys * 10 + depth))
        ch = circuit_to_channel(circ)
        for _ in range(3):
            rho = random_density(1 << n_sys, gen)
            state = initial_state(circ)
            state.rho = np.kron(rho, ancilla_product_state(1, 0.0))
            out = simulate_step(state, circ).system_state()
            assert np.max(np.abs(out - apply(ch, rho))) <= 1e-10


def test_simulator_matches_channel_noisy():
    noise = NoiseModel(depolarizing=0.08, reset_error=0.2)
    circ = build_random_circuit(2, 2, RngStream(9))
    ch = circuit_to_channel(circ, noise)
    assert ch.rank > 2  # noise inflates the Kraus rank
    gen = RngStream(10).generator()
    for _ in range(3):
        rho = random_density(4, gen)
        state = initial_state(circ)
        state.rho = np.kron(rho, ancilla_product_state(1, noise.reset_error))
        out = simulate_step(state, circ, noise).system_state()
        assert np.max(np.abs(out - apply(ch, rho))) <= 1e-10


def test_identity_gates_give_identity_channel():
    base = build_random_circuit(2, 2, RngStream(11))
    layers = tuple(
        tuple((pair, np.eye(4, dtype=complex)) for pair, _ in layer) for layer in base.layers
    )
    circ = CircuitIR(2, 1, layers, base.terminal_ops)
    ch = circuit_to_channel(circ)
    assert ch.rank == 1
    assert np.max(np.abs(ch.kraus_ops[0] - np.eye(4))) <= 1e-12


def test_full_depolarizing_mixes_in_one_step():
    noise = NoiseModel(depolarizing=1.0)
    for n_sys in (2, 3):
        circ = build_random_circuit(n_sys, 1, RngStream(12).child(n_sys))
        state = initial_state(circ)
        out = simulate_step(state, circ, noise).system_state()
        n = 1 << n_sys
        assert np.max(np.abs(out - np.eye(n) / n)) <= 1e-12


def test_reset_error_half_gives_mixed_ancilla():
    noise = NoiseModel(reset_error=0.5)
    circ = build_random_circuit(2, 1, RngStream(13))
    state = simulate_step(initial_state(circ), circ, noise)
    anc = partial_trace(state.rho, [4, 2], keep=[1])
    assert np.max(np.abs(anc - np.eye(2) / 2)) <= 1e-12


def test_fresh_ancilla_ignores_reset_error():
    noise = NoiseModel(reset_error=0.4)
    circ = build_random_circuit(2, 1, RngStream(14))
    state = simulate_step(initial_state(circ), circ, noise, fresh_ancilla=True)
    anc = partial_trace(state.rho, [4, 2], keep=[1])
    assert np.max(np.abs(anc - basis_state(2, 0))) <= 1e-12


def test_fresh_and_reuse_identical_noiseless():
    circ = build_random_circuit(2, 2, RngStream(15))
    a = initial_state(circ)
    b = initial_state(circ)
    for _ in range(3):
        a = simulate_step(a, circ, None, fresh_ancilla=False)
        b = simulate_step(b, circ, None, fresh_ancilla=True)
    assert np.array_equal(a.rho, b.rho)


def test_trajectory_mode_agrees_in_expectation():
    circ = build_random_circuit(2, 2, RngStream(16))
    t = 3
    det = initial_state(circ)
    for _ in range(t):
        det = simulate_step(det, circ)
    probs = np.clip(np.diagonal(det.system_state()).real, 0, None)
    probs /= probs.sum()

    n_traj = 10**4
    gen = RngStream(17).generator()
    outcomes = np.empty(n_traj)
    for k in range(n_traj):
        st = initial_state(circ, rng=gen)
        for _ in range(t):
            st = simulate_step(st, circ, trajectory=True)
        p = np.clip(np.diagonal(st.system_state()).real, 0, None)
        p /= p.sum()
        outcomes[k] = gen.choice(4, p=p)
    det_draws = gen.choice(4, p=probs, size=n_traj)
    assert ks_distance(outcomes, det_draws) <= 0.02


def test_sample_shots_pure_state():
    hist = sample_shots(basis_state(4, 0), 100, None, RngStream(18))
    assert hist == {"00": 100}


def test_sample_shots_uniform():
    shots = 10**5
    hist = sample_shots(np.eye(4) / 4, shots, None, RngStream(19))
    assert sum(hist.values()) == shots
    sigma = np.sqrt(0.25 * 0.75 / shots)
    for key in ("00", "01", "10", "11"):
        assert abs(hist.get(key, 0) / shots - 0.25) <= 5 * sigma


def test_sample_shots_readout_flip_rate():
    shots = 10**5
    readout = (QubitNoise(readout_p10=0.013),)
    hist = sample_shots(basis_state(2, 0), shots, readout, RngStream(20))
    sigma = np.sqrt(0.013 * 0.987 / shots)
    assert abs(hist.get("1", 0) / shots - 0.013) <= 5 * sigma


def test_sample_shots_bit_order():
    # qubit 0 is the least significant bit: index 1 = |01> reads "01"
    hist = sample_shots(basis_state(4, 1), 10, None, RngStream(21))
    assert hist == {"01": 10}


def test_noise_model_validation():
    with pytest.raises(OutOfRange):
        NoiseModel(depolarizing=1.2)
    with pytest.raises(OutOfRange):
        NoiseModel(reset_error=0.7)
    with pytest.raises(InvalidParams):
        QubitNoise(t1=100.0, t2=300.0)


def test_noise_model_loader(tmp_path):
    payload = {
        "depolarizing": 0.01,
        "gate_duration_us": 0.2,
        "measurement_duration_us": 1.5,
        "qubits": [
            {"t1_us": 323.4, "t2_us": 457.7, "readout": 0.009, "reset_p10": 0.008},
            {"t1_us": 408.8, "t2_us": 388.2, "readout": 0.014},
            {"t1_us": 299.1, "t2_us": 225.9, "readout_p10": 0.008, "readout_p01": 0.01},
        ],
    }
    path = tmp_path / "noise.json"
    path.write_text(json.dumps(payload))
    nm = load_noise_model(path)
    assert nm.depolarizing == 0.01
    assert nm.reset_error == 0.008  # from the ancilla row
    assert nm.gate_duration == 0.2
    assert nm.qubit(0).t1 == 323.4
    assert nm.qubit(1).readout_p10 == 0.014 and nm.qubit(1).readout_p01 == 0.014
    assert nm.qubit(2).readout_p01 == 0.01
    assert nm.qubit(5).t1 is None  # beyond the table: silent identity


def test_noise_model_loader_explicit_reset_wins(tmp_path):
    path = tmp_path / "noise.json"
    path.write_text(json.dumps({"reset_error": 0.2, "qubits": [{"reset_p10": 0.05}]}))
    assert load_noise_model(path).reset_error == 0.2


def test_two_ancilla_circuit_rank_four():
    circ = build_random_circuit(3, 3, RngStream(22), n_ancilla=2)
    ch = circuit_to_channel(circ)
    assert ch.dim == 8
    assert ch.rank <= 4
    tp = sum(k.conj().T @ k for k in ch.kraus_ops)
    assert np.max(np.abs(tp - np.eye(8))) <= 1e-10
