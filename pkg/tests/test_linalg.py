import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapbench.errors import DimensionMismatch, NotHermitian, Singular
from mapbench.linalg import (
    RngStream,
    basis_state,
    eig_general,
    eig_hermitian,
    inv_sqrt_psd,
    kron,
    partial_trace,
    sample_ginibre,
    sample_haar_unitary,
    trace_distance,
    vec,
    unvec,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)


def test_rng_stream_determinism():
    a = RngStream(123, (4, 5)).generator().standard_normal(16)
    b = RngStream(123, (4, 5)).generator().standard_normal(16)
    assert np.array_equal(a, b)


def test_rng_stream_children_differ():
    s = RngStream(123)
    a = s.child(0).generator().standard_normal(16)
    b = s.child(1).generator().standard_normal(16)
    assert not np.array_equal(a, b)


@given(st.integers(min_value=0, max_value=2**63 - 1), st.integers(min_value=0, max_value=1000))
@settings(max_examples=25, deadline=None)
def test_rng_stream_reproducible_for_any_key(seed, idx):
    s = RngStream(seed).child(idx)
    assert np.array_equal(s.generator().random(4), s.generator().random(4))


def test_ginibre_shape_and_finite():
    g = sample_ginibre(2, 3, RngStream(1))
    assert g.shape == (2, 3)
    assert np.all(np.isfinite(g.real)) and np.all(np.isfinite(g.imag))


def test_ginibre_determinism():
    assert np.array_equal(sample_ginibre(4, 4, RngStream(9)), sample_ginibre(4, 4, RngStream(9)))


def test_ginibre_entry_second_moment():
    # E|z|^2 = 1 with Var(|z|^2) = 1, so the MC mean at n samples has
    # standard error 1/sqrt(n)
    n = 10**5
    g = sample_ginibre(n, 1, RngStream(2))
    mean = np.mean(np.abs(g) ** 2)
    assert abs(mean - 1.0) <= 3.0 / np.sqrt(n)


def test_ginibre_circular_law():
    # eigenvalues of G/sqrt(N) fill the unit disk for large N
    n = 200
    gen = RngStream(3).generator()
    inside = total = 0
    for _ in range(20):
        g = sample_ginibre(n, n, gen)
        ev = np.linalg.eigvals(g / np.sqrt(n))
        inside += int(np.sum(np.abs(ev) <= 1.05))
        total += n
    assert inside / total > 0.99


def test_haar_dim1_is_phase():
    u = sample_haar_unitary(1, RngStream(4))
    assert abs(abs(u[0, 0]) - 1.0) < 1e-12


def test_haar_first_moment():
    # E|U_00|^2 = 1/d; Var(|U_00|^2) = 2/(d^2(d+1)) - 1/d^2 hence the SE below
    d, n = 4, 10**4
    gen = RngStream(5).generator()
    vals = np.empty(n)
    for i in range(n):
        vals[i] = abs(sample_haar_unitary(d, gen)[0, 0]) ** 2
    se = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - 1.0 / d) <= 3 * se


def test_haar_second_moment():
    # E|U_00|^4 = 2/(d(d+1)) = 1/3 for d = 2
    d, n = 2, 10**4
    gen = RngStream(6).generator()
    vals = np.empty(n)
    for i in range(n):
        vals[i] = abs(sample_haar_unitary(d, gen)[0, 0]) ** 4
    se = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - 1.0 / 3.0) <= 3 * se


def test_haar_mean_square_off_diagonal():
    # invariance: any fixed entry has mean square 1/d
    d, n = 3, 10**4
    gen = RngStream(7).generator()
    vals = np.empty(n)
    for i in range(n):
        vals[i] = abs(sample_haar_unitary(d, gen)[1, 2]) ** 2
    se = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - 1.0 / d) <= 5 * se


def test_eig_general_identity():
    ev, _ = eig_general(np.eye(4, dtype=complex))
    assert np.allclose(ev, 1.0)


def test_eig_general_diagonal_ordering():
    ev, _ = eig_general(np.diag([2.0, 1j, -1.0]))
    # descending modulus; ties broken by descending real part
    assert np.allclose(ev, [2.0, 1j, -1.0])


def test_eig_general_residual():
    m = sample_ginibre(8, 8, RngStream(8))
    ev, vecs = eig_general(m)
    scale = np.linalg.norm(m)
    for k in range(8):
        resid = np.linalg.norm(m @ vecs[:, k] - ev[k] * vecs[:, k])
        assert resid <= 1e-8 * scale * np.linalg.norm(vecs[:, k])


def test_eig_general_rejects_nonsquare():
    with pytest.raises(DimensionMismatch):
        eig_general(np.zeros((2, 3)))


def test_eig_hermitian_diagonal():
    w, _ = eig_hermitian(np.diag([0.25, 0.75]).astype(complex))
    assert np.allclose(w, [0.25, 0.75])


def test_eig_hermitian_maximally_mixed():
    n = 8
    w, _ = eig_hermitian(np.eye(n) / n)
    assert np.allclose(w, 1.0 / n)


def test_eig_hermitian_fixed_trace_wishart():
    g = sample_ginibre(8, 8, RngStream(10))
    w_mat = g @ g.conj().T
    w_mat /= np.trace(w_mat).real
    w, _ = eig_hermitian(w_mat)
    assert np.all(w > -1e-12)
    assert abs(w.sum() - 1.0) <= 1e-10


def test_eig_hermitian_reconstruction():
    g = sample_ginibre(256, 256, RngStream(11))
    h = (g + g.conj().T) / 2
    w, v = eig_hermitian(h)
    assert np.max(np.abs((v * w) @ v.conj().T - h)) <= 1e-8
    assert np.max(np.abs(v.conj().T @ v - np.eye(256))) <= 1e-8


def test_eig_hermitian_rejects_nonhermitian():
    with pytest.raises(NotHermitian):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_kron_identity():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_pauli_blocks():
    m = kron(X, Z)
    expected = np.zeros((4, 4), dtype=complex)
    expected[:2, 2:] = Z
    expected[2:, :2] = Z
    assert np.array_equal(m, expected)


def test_kron_mixed_product():
    gen = RngStream(12).generator()
    for _ in range(5):
        a, b, c, d = (sample_ginibre(2, 2, gen) for _ in range(4))
        left = kron(a, b) @ kron(c, d)
        right = kron(a @ c, b @ d)
        assert np.max(np.abs(left - right)) < 1e-12


def _naive_partial_trace(m, dims, keep):
    """Index-summation oracle, deliberately dumb and loop-based."""
    n = len(dims)
    keep = sorted(keep)
    drop = [i for i in range(n) if i not in keep]
    d_keep = int(np.prod([dims[k] for k in keep]))
    out = np.zeros((d_keep, d_keep), dtype=complex)
    idx = [range(d) for d in dims]
    import itertools

    def flat(multi):
        x = 0
        for i, d in enumerate(dims):
            x = x * d + multi[i]
        return x

    def flat_keep(multi):
        x = 0
        for k in keep:
            x = x * dims[k] + multi[k]
        return x

    for row in itertools.product(*idx):
        for col in itertools.product(*idx):
            if any(row[i] != col[i] for i in drop):
                continue
            out[flat_keep(row), flat_keep(col)] += m[flat(row), flat(col)]
    return out


def test_partial_trace_product_state():
    gen = RngStream(13).generator()
    ga = sample_ginibre(2, 2, gen)
    gb = sample_ginibre(4, 4, gen)
    rho_a = ga @ ga.conj().T
    rho_a /= np.trace(rho_a)
    rho_b = gb @ gb.conj().T
    rho_b /= np.trace(rho_b)
    got = partial_trace(kron(rho_a, rho_b), [2, 4], keep=[0])
    assert np.max(np.abs(got - rho_a)) <= 1e-12


def test_partial_trace_bell_state():
    bell = np.zeros((4, 1), dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    rho = bell @ bell.conj().T
    got = partial_trace(rho, [2, 2], keep=[1])
    assert np.max(np.abs(got - np.eye(2) / 2)) <= 1e-12


def test_partial_trace_matches_naive_oracle():
    gen = RngStream(14).generator()
    g = sample_ginibre(8, 8, gen)
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    for keep in ([0], [1], [2], [0, 2], [1, 2], [0, 1, 2]):
        got = partial_trace(rho, [2, 2, 2], keep=keep)
        want = _naive_partial_trace(rho, [2, 2, 2], keep)
        assert np.max(np.abs(got - want)) <= 1e-12


def test_partial_trace_preserves_trace_and_linearity():
    gen = RngStream(15).generator()
    a = sample_ginibre(8, 8, gen)
    b = sample_ginibre(8, 8, gen)
    ta = partial_trace(a, [2, 4], keep=[1])
    tb = partial_trace(b, [2, 4], keep=[1])
    tab = partial_trace(a + 2.5 * b, [2, 4], keep=[1])
    assert abs(np.trace(ta) - np.trace(a)) <= 1e-12
    assert np.max(np.abs(tab - (ta + 2.5 * tb))) <= 1e-12


def test_partial_trace_full_keep_is_identity():
    g = sample_ginibre(4, 4, RngStream(16))
    assert np.max(np.abs(partial_trace(g, [2, 2], keep=[0, 1]) - g)) == 0


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(6), [2, 2], keep=[0])
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(4), [2, 2], keep=[])


def test_inv_sqrt_identity():
    assert np.max(np.abs(inv_sqrt_psd(np.eye(3)) - np.eye(3))) <= 1e-12


def test_inv_sqrt_diagonal():
    got = inv_sqrt_psd(np.diag([4.0, 9.0]))
    assert np.max(np.abs(got - np.diag([0.5, 1.0 / 3.0]))) <= 1e-12


def test_inv_sqrt_defining_property():
    gen = RngStream(17).generator()
    s = sum(g.conj().T @ g for g in (sample_ginibre(8, 8, gen) for _ in range(2)))
    r = inv_sqrt_psd(s)
    assert np.max(np.abs(r @ s @ r - np.eye(8))) <= 1e-8


def test_inv_sqrt_singular_raises():
    with pytest.raises(Singular):
        inv_sqrt_psd(np.diag([1.0, 0.0]))


def test_vec_unvec_roundtrip_column_stacking():
    m = np.arange(4).reshape(2, 2).astype(complex)
    v = vec(m)
    # column stacking: (a, c, b, d)
    assert np.array_equal(v, np.array([0, 2, 1, 3], dtype=complex))
    assert np.array_equal(unvec(v), m)


def test_trace_distance_basics():
    assert trace_distance(basis_state(2, 0), basis_state(2, 0)) <= 1e-15
    assert abs(trace_distance(basis_state(2, 0), basis_state(2, 1)) - 1.0) <= 1e-12


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=30))
@settings(max_examples=50, deadline=None)
def test_trace_distance_diagonal_matches_tv(diag):
    # for commuting (diagonal) states this is total variation distance
    p = np.abs(np.asarray(diag)) + 1e-3
    p = p / p.sum()
    q = np.roll(p, 1)
    got = trace_distance(np.diag(p).astype(complex), np.diag(q).astype(complex))
    assert abs(got - 0.5 * np.abs(p - q).sum()) <= 1e-9
