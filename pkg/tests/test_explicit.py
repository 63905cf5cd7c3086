import numpy as np
import pytest

from canonical_gbdt import (
    BASE, ExplicitFamilyParams, J_BASE, evolve_triple, explicit_pi, explicit_S,
    explicit_transformed_hamiltonian, explicit_transformed_jump, gauge_w0, transformed_hamiltonian,
)
from canonical_gbdt.core import BETA, check_structure
from canonical_gbdt.exceptions import BranchError, DegenerateSpectrumError
from canonical_gbdt.explicit import (
    explicit_r, explicit_triple, hamiltonian_evaluator, hamiltonian_field, tilde_U,
)

from oracles import H_tilde_one, Pi_one, R_tilde_one, S_one, U_tilde_one, r_one

GRID = np.linspace(0, 1, 101)


def test_base_system_structure():
    assert np.linalg.norm(BETA @ J_BASE @ BETA.conj().T) == 0
    JH = J_BASE @ BASE.H
    assert np.linalg.norm(JH @ JH) == 0
    # exact up to rounding of the pi-scaled entries
    assert np.linalg.norm(BASE.R @ BASE.R - BASE.R_squared) < 1e-14
    np.testing.assert_array_equal(JH, [[-1j, 1], [1, 1j]])


def test_pi_example1_at_zero(example1):
    Pi0 = explicit_pi(example1, 0.0)
    np.testing.assert_allclose(Pi0, 0.5 * np.array([[1j - np.pi, 1 - 1j * np.pi]]), atol=1e-15)
    np.testing.assert_allclose(Pi0, Pi_one(1j, 1.0, 0.0), atol=1e-15)
    assert abs((Pi0 @ J_BASE @ BETA.conj().T)[0, 0] - 1) < 1e-15


def test_pi_projections_hold_everywhere(rng):
    p = ExplicitFamilyParams([1j, -1 + 0.5j, 2 - 1j], rng.normal(size=3) + 1j * rng.normal(size=3),
                             h=[0.3, -0.2j, 1.0])
    for x in np.linspace(0, 1, 11):
        Pi = explicit_pi(p, x)
        np.testing.assert_allclose(Pi @ J_BASE @ BETA.conj().T[:, 0], p.g, atol=1e-12)
        np.testing.assert_allclose(Pi @ BETA.conj().T[:, 0],
                                   2 * (1j * p.g * np.log(p.b - x) + p.h), atol=1e-12)


def test_pi_vanishes_for_zero_parameters():
    p = ExplicitFamilyParams([1j, 2j], [0, 0])
    assert np.linalg.norm(explicit_pi(p, 0.4)) == 0
    assert np.linalg.norm(explicit_S(p, 0.4)) == 0


def test_S_example1(example1):
    assert explicit_S(example1, 0.0)[0, 0] == pytest.approx(np.pi / 2, abs=1e-12)
    for x in GRID:
        S = explicit_S(example1, x)[0, 0]
        assert abs(S - S_one(1j, 1.0, x)) < 1e-10
        assert S != 0


def test_S_satisfies_identity(rng):
    p = ExplicitFamilyParams([1j, -1 + 0.5j], [1.0, 0.5 - 1j], h=[0.1, 0.2])
    for x in (0.0, 0.3, 0.9):
        t = explicit_triple(p, x)
        assert t.identity_residual(J_BASE) < 1e-10
        assert np.linalg.norm(t.S - t.S.conj().T) < 1e-10


def test_parameter_validation():
    with pytest.raises(BranchError):
        ExplicitFamilyParams([0.5], [1.0])
    with pytest.raises(ValueError):
        ExplicitFamilyParams([1j], [1.0], U=np.diag([2.0, 1.0]))
    p = ExplicitFamilyParams([1 + 1j, 1 - 1j], [1.0, 1.0])
    with pytest.raises(DegenerateSpectrumError):
        explicit_S(p, 0.0)


def test_params_json_roundtrip(rng):
    p = ExplicitFamilyParams([1j, -2 + 0.1j], [1.0, 2j], h=[0.5, 0], l=2.0)
    q = ExplicitFamilyParams.from_dict(p.to_dict())
    for name in ("b", "g", "h", "U"):
        np.testing.assert_array_equal(getattr(p, name), getattr(q, name))
    assert q.l == 2.0


def test_tilde_U_matches_example_display(example1):
    np.testing.assert_allclose(tilde_U(example1), U_tilde_one(1j, 1.0), atol=1e-14)


def test_H_tilde_example1_closed_forms(example1):
    for x in GRID:
        np.testing.assert_allclose(explicit_transformed_hamiltonian(example1, x),
                                   H_tilde_one(1j, 1.0, x), atol=1e-10)


def test_H_tilde_closed_vs_ode(base_H, example1):
    traj = evolve_triple(explicit_triple(example1, 0.0), base_H, J_BASE, GRID)
    Ht = transformed_hamiltonian(gauge_w0(traj), base_H)
    err = max(np.linalg.norm(Ht(x) - explicit_transformed_hamiltonian(example1, x)) for x in GRID)
    assert err < 1e-6
    # the triple itself agrees as well
    for x in (0.25, 0.5, 1.0):
        t = traj.at(x)
        np.testing.assert_allclose(t.Pi, explicit_pi(example1, x), atol=1e-6)
        np.testing.assert_allclose(t.S, explicit_S(example1, x), atol=1e-6)


def test_H_tilde_positive_and_nilpotent(example1):
    for x in GRID:
        M = explicit_transformed_hamiltonian(example1, x)
        assert np.linalg.eigvalsh(M)[0] >= -1e-10
        assert np.linalg.norm(M @ J_BASE @ M) < 1e-9
        assert check_structure(M, "hermitian").max < 1e-12


def test_jump_row_example1():
    p = ExplicitFamilyParams([1j], [1.0])
    for s in np.linspace(0.05, 3, 10):
        r = explicit_r(p, s)
        np.testing.assert_allclose(r, r_one(1j, s), atol=1e-12)
        assert abs((r @ J_BASE @ r.conj().T)[0, 0]) < 1e-12
    np.testing.assert_allclose(explicit_r(p, 0.0), BETA, atol=0)


def test_jump_at_zero_and_example(example1):
    np.testing.assert_allclose(explicit_transformed_jump(example1, 0.0),
                               np.eye(2) + np.pi * J_BASE @ BETA.conj().T @ BETA, atol=1e-15)
    for s in (0.25, 0.5, 0.75):
        np.testing.assert_allclose(explicit_transformed_jump(example1, s),
                                   R_tilde_one(1j, s), atol=1e-12)


def test_jump_nilpotent_rank_one(rng):
    U = np.cos(0.4) * np.eye(2) + 1j * np.sin(0.4) * J_BASE
    p = ExplicitFamilyParams([1j, -0.5 + 2j, 3 - 0.2j], rng.normal(size=3) + 0j,
                             h=[0.1j, 0, -0.3], U=U)
    for s in np.linspace(0.05, 0.95, 10):
        D = explicit_transformed_jump(p, s) - np.eye(2)
        assert np.linalg.norm(D @ D) < 1e-10 * max(1.0, np.linalg.norm(D) ** 2)
        assert np.linalg.svd(D, compute_uv=False)[1] < 1e-10 * max(1.0, np.linalg.norm(D))


def test_lean_evaluator_matches_reference(rng):
    U = np.diag([np.exp(0.3), np.exp(-0.3)])
    p = ExplicitFamilyParams([1j, -0.5 + 2j, 3 - 0.2j], rng.normal(size=3) + 1j * rng.normal(size=3),
                             h=[0.1j, 0, -0.3], U=U)
    H = hamiltonian_field(p)
    U_t = tilde_U(p)
    for x in np.linspace(0, 1, 21):
        M = explicit_transformed_hamiltonian(p, x, U_t)
        assert np.linalg.norm(H(x) - M) < 1e-12 * max(1.0, np.linalg.norm(M))


def test_lean_evaluator_rejects_resonant_spectrum():
    with pytest.raises(DegenerateSpectrumError):
        hamiltonian_evaluator([1 + 1j, 1 - 1j], [1.0, 1.0], [0, 0], np.eye(2))
