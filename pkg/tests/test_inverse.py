import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from canonical_gbdt import (
    HamiltonianField, InnerRealization, J_BASE, build_gbdt_data, evolve_triple,
    explicit_transformed_hamiltonian, explicit_transformed_jump, gauge_w0, realization_from_pole,
    reconstruct_u, recover_hamiltonian_and_jump, transformed_hamiltonian, verify_jump,
)
from canonical_gbdt.core import BETA
from canonical_gbdt.exceptions import (
    DegenerateRealizationError, IntervalError, PoleError, SplitFailureError,
)
from canonical_gbdt.inverse import (
    C, K, inverse_identity_residual, j_SIGN, random_realization, split_theta, to_explicit_params,
    u_from_row,
)
from canonical_gbdt.rh import compute_jump

C2 = -1j
ROUND_TRIP_S = (-5.0, -1.7, -0.3, 0.3, 1.7, 5.0)
S_POINTS = (0.25, 0.5, 0.75)


@pytest.fixture
def pole_one():
    return realization_from_pole(1j, np.sqrt(2))


def test_pole_realization_example(pole_one):
    assert pole_one.S0[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert abs(abs(pole_one.u(2.0)) - 1) < 1e-12
    s = 2.0
    assert abs(pole_one.u(s) - C2 * (s + 1j) / (s - 1j)) < 1e-14


def test_second_pole_example():
    real = realization_from_pole(2j, 1.0)
    assert real.S0[0, 0] == pytest.approx(0.25, abs=1e-15)
    assert real.identity_residual() < 1e-15


def test_normalization_constant(pole_one):
    assert abs(C ** 2 - C2) < 1e-15
    assert abs((1 - 1j) / (1 + 1j) - C2) < 1e-15
    assert pole_one.u(np.inf) == C ** 2


def test_K_and_j():
    assert np.linalg.norm(K.conj().T @ K - np.eye(2)) < 1e-15
    assert np.linalg.norm(K @ j_SIGN @ K.conj().T - J_BASE) < 1e-15


def test_degenerate_realizations():
    with pytest.raises(DegenerateRealizationError):
        realization_from_pole(2.0, 1.0)
    with pytest.raises(DegenerateRealizationError):
        realization_from_pole(1j, 0.0)
    with pytest.raises(DegenerateRealizationError):
        InnerRealization([[1j]], [[2.0]], [np.sqrt(2)])  # identity off by a factor 2


def test_random_realizations_are_inner(rng):
    for n in (1, 2, 3):
        real = random_realization(rng, n)
        assert real.identity_residual() < 1e-10
        for s in np.linspace(-10, 10, 20):
            assert abs(abs(real.u(s)) - 1) < 1e-8


def test_split_with_zero_theta2(pole_one):
    data = build_gbdt_data(pole_one)
    np.testing.assert_allclose(data.split.theta1, pole_one.theta / C, atol=1e-15)
    np.testing.assert_array_equal(data.split.A0, pole_one.alpha)
    assert data.B[0, 0] == pytest.approx(-1j)
    assert data.identity.passed


def test_split_relations(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        real = random_realization(rng, n)
        theta2 = rng.normal(size=n) + 1j * rng.normal(size=n)
        split = split_theta(real, theta2)
        assert np.linalg.norm(C * split.theta1 + np.conj(C) * split.theta2 - real.theta) < 1e-12
        data = build_gbdt_data(real, theta2)
        assert data.identity.max < 1e-10


def test_auto_split_avoids_ill_conditioned_alpha():
    # S0 = I, theta = (1, 1); alpha = diag(d, -d) + i/2 ones has cond ~ 1e14
    d = 1e-7
    real = InnerRealization(np.diag([d, -d]) + 0.5j * np.ones((2, 2)), np.eye(2), [1, 1])
    assert np.linalg.cond(real.alpha) > 1e12
    data = build_gbdt_data(real)
    assert np.linalg.norm(data.split.theta2) > 0
    assert np.linalg.cond(data.split.A0) < 1e12
    assert data.identity.passed
    for s in (-2.0, 0.5, 3.0):
        assert abs(reconstruct_u(data.triple, J_BASE, data.B, data.g, s) - real.u(s)) < 1e-6
    with pytest.raises(SplitFailureError):
        build_gbdt_data(real, [0.0, 0.0])


def test_round_trip_n1(pole_one):
    data = build_gbdt_data(pole_one)
    for s in ROUND_TRIP_S:
        u = reconstruct_u(data.triple, J_BASE, data.B, data.g, s)
        assert abs(u - C2 * (s + 1j) / (s - 1j)) < 1e-8
    assert abs(reconstruct_u(data.triple, J_BASE, data.B, data.g, np.inf) - C2) < 1e-15


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_round_trip_random(seed, n):
    rng = np.random.default_rng(seed)
    real = random_realization(rng, n)
    data = build_gbdt_data(real, 0.3 * (rng.normal(size=n) + 1j * rng.normal(size=n)))
    for s in np.linspace(-5, 5, 20):
        err = abs(reconstruct_u(data.triple, J_BASE, data.B, data.g, s) - real.u(s))
        assert err < 1e-8 * max(1.0, abs(real.u(s)))


def test_row_properties(pole_one):
    rec = recover_hamiltonian_and_jump(build_gbdt_data(pole_one), pole_one)
    np.testing.assert_array_equal(rec.r(0.0), BETA)
    for s in np.linspace(-3, 3, 10):
        r = rec.r(s)
        assert abs((r @ J_BASE @ r.conj().T)[0, 0]) < 1e-12


def test_pole_error():
    with pytest.raises(PoleError):
        u_from_row(np.array([[1.0, 1.0]]))


def test_inverse_matrix_realization(rng):
    for n in (1, 2):
        real = random_realization(rng, n)
        split = split_theta(real, 0.5 * (rng.normal(size=n) + 1j * rng.normal(size=n)))
        for s in (-1.3, 0.4, 2.5):
            assert inverse_identity_residual(real, split, s) < 1e-9


def test_interval_error_reports_largest_l():
    # lower half plane pole: S(0) = -1 and S(x) crosses zero inside (0.546, 0.547)
    real = realization_from_pole(-1j, np.sqrt(2))
    data = build_gbdt_data(real)
    with pytest.raises(IntervalError) as info:
        recover_hamiltonian_and_jump(data, real, l=1.0)
    assert info.value.largest_l == pytest.approx(0.546)
    recover_hamiltonian_and_jump(data, real, l=0.5)


def test_recovery_matches_explicit_family(rng):
    real = random_realization(rng, 2)
    data = build_gbdt_data(real, 0.2 * real.theta)
    try:
        rec = recover_hamiltonian_and_jump(data, real)
    except IntervalError:
        pytest.skip("random draw not admissible on [0, 1]")
    p = to_explicit_params(data)
    for x in np.linspace(0, 1, 11):
        assert np.linalg.norm(rec.H_tilde(x) - explicit_transformed_hamiltonian(p, x)) < 1e-9
    for s in S_POINTS:
        assert np.linalg.norm(rec.R_tilde(s) - explicit_transformed_jump(p, s)) < 1e-9


def test_recovery_matches_ode_route(pole_one):
    data = build_gbdt_data(pole_one)
    rec = recover_hamiltonian_and_jump(data, pole_one)
    H = HamiltonianField.base(1.0)
    traj = evolve_triple(data.triple, H, J_BASE, np.linspace(0, 1, 11), tol=1e-12)
    Ht = transformed_hamiltonian(gauge_w0(traj), H)
    for x in traj.grid:
        assert np.linalg.norm(rec.H_tilde(x) - Ht(x)) < 1e-8


def test_recovery_with_resonant_spectrum():
    # B = -1/2 is real, so S(x) is integrated instead of read off the identity
    real = realization_from_pole(2j, np.sqrt(2))
    data = build_gbdt_data(real, [1.0])
    assert abs(data.B[0, 0] + 0.5) < 1e-12
    rec = recover_hamiltonian_and_jump(data, real)
    H = HamiltonianField.base(1.0)
    traj = evolve_triple(data.triple, H, J_BASE, np.linspace(0, 1, 6), tol=1e-12)
    Ht = transformed_hamiltonian(gauge_w0(traj), H)
    for x in traj.grid:
        assert np.linalg.norm(rec.triple_at(x).S - traj.at(x).S) < 1e-8
        assert np.linalg.norm(rec.H_tilde(x) - Ht(x)) < 1e-8


def test_recovered_jump_nilpotent(pole_one):
    rec = recover_hamiltonian_and_jump(build_gbdt_data(pole_one), pole_one)
    for s in np.linspace(0.1, 0.9, 5):
        D = rec.R_tilde(s) - np.eye(2)
        assert np.linalg.norm(D @ D) < 1e-10


def test_full_loop_jump(pole_one):
    rec = recover_hamiltonian_and_jump(build_gbdt_data(pole_one), pole_one)
    jump = compute_jump(rec.H_tilde, J_BASE, S_POINTS, rec.R_tilde)
    assert verify_jump(jump, 1e-4).passed


def test_recovery_rejects_bad_U(pole_one):
    with pytest.raises(ValueError):
        recover_hamiltonian_and_jump(build_gbdt_data(pole_one), pole_one, U=np.diag([2.0, 1.0]))


def test_realization_json(pole_one):
    d = pole_one.to_dict()
    again = InnerRealization.from_dict(d)
    np.testing.assert_array_equal(again.alpha, pole_one.alpha)
    short = InnerRealization.from_dict({"pole": {"re": 0, "im": 1}, "theta": np.sqrt(2)})
    assert short.S0[0, 0] == pytest.approx(1.0)
