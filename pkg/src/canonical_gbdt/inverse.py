"""Recovering ``H~`` and ``R~`` from a scalar rational inner function.

The inner function is given through a realization

    u(s) = c^2 (1 + i theta* S0^{-1} (s - alpha)^{-1} theta),   c = (1 - i)/sqrt(2),

with ``alpha S0 - S0 alpha* = i theta theta*``. Splitting
``theta = c theta1 + conj(c) theta2`` yields GBDT data at ``x = 0`` for the
rank-one base system, from which the transformed Hamiltonian and jump follow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import logm

from .core import (
    BETA, H_BASE, J_BASE, COND_LIMIT, GbdtTriple, HamiltonianField, ResidualReport, check_structure,
    guarded_inv, matrix_from_json, matrix_to_json, norm, solve_identity_S, vector_from_json,
    vector_to_json,
)
from .engine import transfer_matrix
from .exceptions import (
    DegenerateRealizationError, IntervalError, PoleError, SingularityError, SplitFailureError,
)
from .explicit import (
    BETA_J, ExplicitFamilyParams, hamiltonian_evaluator, jump_from_row, jump_row,
)

C = (1 - 1j) / np.sqrt(2)
K = np.array([[1, -1], [1, 1]], dtype=complex) / np.sqrt(2)
j_SIGN = np.diag([1.0, -1.0]).astype(complex)
# alpha is rejected only when numerically singular; A(0) must meet COND_LIMIT
SINGULAR_LIMIT = 1e15


@dataclass(frozen=True)
class InnerRealization:
    alpha: np.ndarray
    S0: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=complex))
        S0 = np.atleast_2d(np.asarray(self.S0, dtype=complex))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=complex)).ravel()
        n = alpha.shape[0]
        if alpha.shape != (n, n) or S0.shape != (n, n) or theta.shape != (n,):
            raise ValueError("alpha, S0 (n x n) and theta (n) do not conform")
        if norm(S0 - S0.conj().T) > 1e-12 * max(1.0, norm(S0)):
            raise DegenerateRealizationError("S0 must be Hermitian")
        if np.linalg.cond(S0) > COND_LIMIT:
            raise DegenerateRealizationError("S0 must be invertible")
        if np.linalg.cond(alpha) > SINGULAR_LIMIT:
            raise DegenerateRealizationError("alpha must be invertible")
        for name, v in (("alpha", alpha), ("S0", S0), ("theta", theta)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        res = self.identity_residual()
        if res > 1e-10 * max(1.0, norm(alpha) * norm(S0)):
            raise DegenerateRealizationError(
                f"alpha S0 - S0 alpha* != i theta theta* (residual {res:.3g})")

    @property
    def n(self):
        return self.alpha.shape[0]

    @property
    def c(self):
        return C

    def identity_residual(self):
        a, S, t = self.alpha, self.S0, self.theta
        return norm(a @ S - S @ a.conj().T - 1j * np.outer(t, t.conj()))

    def u(self, s):
        if np.isinf(s):
            return C ** 2
        res = np.linalg.solve(s * np.eye(self.n) - self.alpha, self.theta)
        return C ** 2 * (1 + 1j * self.theta.conj() @ np.linalg.solve(self.S0, res))

    def to_dict(self):
        return {"alpha": matrix_to_json(self.alpha), "S0": matrix_to_json(self.S0),
                "theta": vector_to_json(self.theta)}

    @classmethod
    def from_dict(cls, d):
        if "pole" in d:
            return realization_from_pole(vector_from_json(d["pole"])[0],
                                         vector_from_json(d["theta"])[0])
        return cls(matrix_from_json(d["alpha"]), matrix_from_json(d["S0"]),
                   vector_from_json(d["theta"]))


def realization_from_pole(alpha, theta):
    """Degree-one realization ``u(s) = c^2 (s - conj(alpha)) / (s - alpha)``."""
    alpha, theta = complex(alpha), complex(theta)
    if alpha.imag == 0:
        raise DegenerateRealizationError("the pole must be off the real axis")
    if theta == 0:
        raise DegenerateRealizationError("theta must be nonzero")
    S0 = abs(theta) ** 2 / (2 * alpha.imag)
    return InnerRealization([[alpha]], [[S0]], [theta])


def random_realization(rng, n):
    """A realization with ``S0 > 0``: ``alpha = (X + i theta theta*/2) S0^{-1}``, X Hermitian."""
    for _ in range(1000):
        Y = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        S0 = Y @ Y.conj().T + 0.5 * np.eye(n)
        theta = rng.normal(size=n) + 1j * rng.normal(size=n)
        Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        alpha = ((Z + Z.conj().T) / 2 + 0.5j * np.outer(theta, theta.conj())) @ np.linalg.inv(S0)
        ev = np.linalg.eigvals(alpha)
        if np.linalg.cond(alpha) < 1e4 and ev.imag.min() > 0.05:
            return InnerRealization(alpha, S0, theta)
    raise RuntimeError("could not draw a realization")


@dataclass(frozen=True)
class ThetaSplit:
    theta1: np.ndarray
    theta2: np.ndarray
    A0: np.ndarray

    @property
    def Lambda(self):
        return np.column_stack([self.theta1, self.theta2])


@dataclass(frozen=True)
class GbdtData:
    """Output of :func:`build_gbdt_data`: the split, the triple at 0, ``B`` and ``g``."""

    split: ThetaSplit
    triple: GbdtTriple
    B: np.ndarray
    g: np.ndarray
    identity: ResidualReport


def split_theta(real, theta2):
    theta2 = np.asarray(theta2, dtype=complex).ravel()
    theta1 = (real.theta - np.conj(C) * theta2) / C
    A0 = real.alpha - 1j * C * np.outer(real.theta, theta2.conj()) @ np.linalg.inv(real.S0)
    return ThetaSplit(theta1, theta2, A0)


def build_gbdt_data(real, theta2=None):
    """GBDT data at ``x = 0``: ``A(0) = alpha - i c theta theta2* S0^{-1}``,
    ``S(0) = S0``, ``Pi(0) = [theta1 theta2] K*``, ``B = A(0)^{-1}``, ``g = theta``.

    With ``theta2=None`` the split starts from ``theta2 = 0``. If ``A(0)`` is
    ill conditioned, ``theta2 = eps |theta| v`` is tried, ``v`` the right
    singular vector of ``alpha`` for its smallest singular value, with ``eps``
    halved from 1e-2 (at most 50 times). A multiple of ``theta`` would not
    do: ``alpha v = 0`` forces ``theta* S0^{-1} v = 0``.
    """
    if theta2 is not None:
        split = split_theta(real, theta2)
        if np.linalg.cond(split.A0) > COND_LIMIT:
            raise SplitFailureError("A(0) is singular for the given theta2")
    else:
        split = split_theta(real, np.zeros(real.n))
        direction = np.linalg.norm(real.theta) * np.linalg.svd(real.alpha)[2][-1].conj()
        eps = 1e-2
        tries = 0
        while np.linalg.cond(split.A0) > COND_LIMIT:
            if tries == 50:
                raise SplitFailureError("no admissible theta2 found")
            split = split_theta(real, eps * direction)
            eps /= 2
            tries += 1
    Pi0 = split.Lambda @ K.conj().T
    triple = GbdtTriple(split.A0, real.S0, Pi0, 0.0)
    res = triple.identity_residual(J_BASE)
    identity = ResidualReport.from_values("material_identity", [0.0], [res], 1e-10)
    return GbdtData(split, triple, np.linalg.inv(split.A0), real.theta.copy(), identity)


def r_at(data, s):
    return jump_row(data.B, data.g, data.triple.S, data.triple.Pi, s)


def u_from_row(r):
    r1, r2 = np.conj(np.ravel(r))
    den = r1 - r2
    if abs(den) < 1e-12:
        raise PoleError("r1 = r2: u has a pole here")
    return (r1 + r2) / den


def reconstruct_u(triple, J, B, g, s):
    """``u(s) = (conj r1 + conj r2) / (conj r1 - conj r2)`` evaluated at ``1/s``.

    ``s = inf`` gives ``r(0) = beta`` and hence ``c^2``; ``s = 0`` uses the
    finite limit of ``r`` at infinity.
    """
    if np.asarray(J).shape != (2, 2):
        raise ValueError("reconstruction is defined for m = 2")
    if np.isinf(s):
        return u_from_row(BETA)
    sigma = np.inf if s == 0 else 1.0 / s
    return u_from_row(jump_row(B, g, triple.S, triple.Pi, sigma))


def inverse_identity_residual(real, split, s):
    """Residual of the realization of ``(c W21 + conj(c) W22)^{-1}``.

    ``W(s) = I - i j Lambda* S0^{-1} (A(0) - s)^{-1} Lambda``; the right side is
    ``c (1 - i c theta2* S0^{-1} (alpha - s)^{-1} theta)``.
    """
    n = real.n
    S0_inv = np.linalg.inv(real.S0)
    Lam = split.Lambda
    W = np.eye(2) - 1j * j_SIGN @ Lam.conj().T @ S0_inv @ np.linalg.solve(
        split.A0 - s * np.eye(n), Lam)
    lhs = 1.0 / (C * W[1, 0] + np.conj(C) * W[1, 1])
    rhs = C * (1 - 1j * C * split.theta2.conj() @ S0_inv @ np.linalg.solve(
        real.alpha - s * np.eye(n), real.theta))
    return abs(lhs - rhs)


@dataclass(frozen=True)
class Recovery:
    """Recovered ``H~`` (callable field) and ``R~`` with the choices that produced them."""

    H_tilde: HamiltonianField
    R_tilde: object
    data: GbdtData
    U: np.ndarray
    U_tilde: np.ndarray
    l: float
    S_path: object = None
    log_diff: object = None

    @property
    def theta1(self):
        return self.data.split.theta1

    @property
    def theta2(self):
        return self.data.split.theta2

    def r(self, s):
        return r_at(self.data, s)

    def triple_at(self, x):
        return _triple_at(self.data, x, self.S_path, self.log_diff)

    def to_dict(self):
        return {"theta1": vector_to_json(self.theta1), "theta2": vector_to_json(self.theta2),
                "U": matrix_to_json(self.U), "B": matrix_to_json(self.data.B),
                "g": vector_to_json(self.data.g), "l": self.l,
                "triple0": self.data.triple.to_dict()}


def _log_difference(B):
    """``x -> (log(B - x) - log B) g``-ready matrix function; eigenbasis when well conditioned."""
    n = B.shape[0]
    b, V = np.linalg.eig(B)
    if np.linalg.cond(V) < 1e8:
        Vinv = np.linalg.inv(V)
        log_b = np.log(b)
        return lambda x: V @ np.diag(np.log(b - x) - log_b) @ Vinv
    log_B = logm(B)
    return lambda x: logm(B - x * np.eye(n)) - log_B


def _pi_at(data, x, log_diff=None):
    Pi0 = data.triple.Pi
    proj0 = Pi0 @ BETA.conj().T[:, 0]
    if x == 0:
        proj = proj0
    else:
        L = (log_diff or _log_difference(data.B))(x)
        proj = proj0 + 2j * L @ data.g
    return 0.5 * (np.outer(data.g, BETA_J[0]) + np.outer(proj, BETA[0]))


def _resonant(B):
    """True when ``b_j = conj(b_k)``: the identity then leaves ``S`` undetermined."""
    b = np.linalg.eigvals(B)
    gap = np.abs(b[:, None] - np.conj(b)[None, :])
    return gap.min() < 1e-8 * max(1.0, np.abs(b).max())


def _integrate_S(data, l):
    """Dense solution of ``S' = Pi J H J Pi* - (A S + S A*)`` with the closed form ``Pi``."""
    n = data.B.shape[0]
    JHJ = J_BASE @ H_BASE @ J_BASE
    log_diff = _log_difference(data.B)

    def rhs(x, y):
        S = y.reshape(n, n)
        A = guarded_inv(data.B - x * np.eye(n), "B - xI", x)
        Pi = _pi_at(data, x, log_diff)
        return (Pi @ JHJ @ Pi.conj().T - A @ S - S @ A.conj().T).ravel()

    sol = solve_ivp(rhs, (0.0, l), data.triple.S.astype(complex).ravel(), method="DOP853",
                    rtol=1e-12, atol=1e-12, dense_output=True)
    if sol.status != 0:
        raise SingularityError(f"S equation failed: {sol.message}", x=float(sol.t[-1]))

    def S_at(x):
        S = sol.sol(x).reshape(n, n)
        return (S + S.conj().T) / 2
    return S_at


def _triple_at(data, x, S_path=None, log_diff=None):
    n = data.B.shape[0]
    A = guarded_inv(data.B - x * np.eye(n), "B - xI", x)
    Pi = data.triple.Pi if x == 0 else _pi_at(data, x, log_diff)
    if x == 0:
        S = data.triple.S
    elif S_path is not None:
        S = S_path(x)
    else:
        S = solve_identity_S(A, Pi, J_BASE)
    return GbdtTriple(A, S, Pi, x)


def recover_hamiltonian_and_jump(data, real=None, U=None, l=1.0, scan_points=1001):
    """``H~`` and ``R~`` for the split in ``data`` on ``[0, l]``.

    ``Pi(x)`` follows from ``Pi J beta* = g`` and
    ``Pi beta*(x) = Pi beta*(0) + 2i (log(B - x) - log B) g``; ``S(x)`` solves
    the identity (or is integrated when ``b_j = conj(b_k)`` leaves it
    undetermined). ``det(B - x)`` and ``S(x)`` are scanned on ``scan_points``
    points; failure raises :class:`IntervalError` with the largest usable ``l``.
    """
    if real is not None and norm(data.g - real.theta) > 0:
        raise ValueError("data was not built from this realization")
    U = np.eye(2, dtype=complex) if U is None else np.asarray(U, dtype=complex)
    if check_structure(U, "j_unitary", J_BASE).max > 1e-10:
        raise ValueError("U must be J-unitary")
    S_path = None
    log_diff = _log_difference(data.B)
    if _resonant(data.B):
        try:
            S_path = _integrate_S(data, l)
        except SingularityError as exc:
            raise IntervalError(f"admissibility fails: {exc}", largest_l=0.0) from exc
    xs = np.linspace(0.0, l, scan_points)
    last_ok = 0.0
    prev = None
    for x in xs:
        try:
            t = _triple_at(data, x, S_path, log_diff)
            guarded_inv(t.S, "S", x)
            # a sign change of an eigenvalue between scan points is a zero of det S
            inertia = tuple(np.sign(np.linalg.eigvalsh(t.S)))
            if prev is not None and inertia != prev:
                raise SingularityError("S changes inertia", x=float(x))
            prev = inertia
        except SingularityError as exc:
            raise IntervalError(f"admissibility fails at x={x:g}: {exc}", largest_l=last_ok) from exc
        last_ok = float(x)

    w_inf = transfer_matrix(data.triple, J_BASE, np.inf)
    U_t = J_BASE @ w_inf.conj().T @ J_BASE @ U
    g_row = data.g.conj()[None, :]
    n = data.B.shape[0]

    def R_tilde(s):
        return jump_from_row(r_at(data, s), U)

    def general(x):
        t = _triple_at(data, x, S_path, log_diff)
        q = BETA - 1j * g_row @ np.linalg.solve(t.S, (data.B - x * np.eye(n)) @ t.Pi)
        row = q @ U_t
        Ht = row.conj().T @ row
        return (Ht + Ht.conj().T) / 2

    # the eigenbasis of B gives a much cheaper evaluator when it is usable
    diagonal = None if S_path is not None else _diagonal_form(data)
    H_tilde = general if diagonal is None else hamiltonian_evaluator(*diagonal, U_t)
    field = HamiltonianField.from_callable(H_tilde, 2, l, positive=True)
    return Recovery(field, R_tilde, data, U, U_t, float(l), S_path, log_diff)


def _diagonal_form(data):
    """``(b, g, h)`` in an eigenbasis of ``B``, or None if ``B`` is badly diagonalizable.

    The similarity ``B -> V^{-1} B V`` leaves ``w_A``, ``H~`` and ``R~``
    unchanged; ``g -> V^{-1} g`` and ``h_k = (V^{-1} Pi beta*(0))_k / 2 - i g_k ln b_k``.
    """
    b, V = np.linalg.eig(data.B)
    if np.linalg.cond(V) > 1e8:
        return None
    Vinv = np.linalg.inv(V)
    g = Vinv @ data.g
    proj0 = Vinv @ (data.triple.Pi @ BETA.conj().T[:, 0])
    return b, g, proj0 / 2 - 1j * g * np.log(b)


def to_explicit_params(data, U=None, l=1.0):
    """Diagonalize ``B`` and express ``data`` as explicit-family parameters."""
    form = _diagonal_form(data)
    if form is None:
        raise SingularityError("B is not (numerically) diagonalizable")
    return ExplicitFamilyParams(*form, U, l)
