"""Evolution of the GBDT triple and the objects built from it.

Given ``A(0), S(0), Pi(0)`` with ``A S - S A* = i Pi J Pi*`` and a
Hamiltonian ``H`` the triple is carried along ``x`` by

    A' = A^2,    Pi' = -i A Pi J H,    S' = Pi J H J* Pi* - (A S + S A*),

which keeps the identity for every ``x``. From the evolved triple we get the
transfer matrix function ``w_A(x, z)``, the J-unitary gauge ``w0(x)``, the
transformed Hamiltonian ``w0* H w0`` and the Darboux multiplier ``v(x, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    COND_LIMIT, GbdtTriple, HamiltonianField, ResidualReport, check_structure,
    guarded_inv, norm,
)
from .exceptions import (
    IdentityDriftError, IdentityViolationError, SingularityError, SingularSError,
    SpectrumHitError,
)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10


@dataclass(frozen=True)
class TripleTrajectory:
    grid: np.ndarray
    states: tuple
    H: HamiltonianField
    J: np.ndarray
    integrator_meta: dict = field(default_factory=dict)

    def index(self, x):
        hit = np.flatnonzero(np.isclose(self.grid, x, rtol=0, atol=1e-13))
        if not hit.size:
            raise KeyError(f"x={x} is not a grid point of this trajectory")
        return int(hit[0])

    def at(self, x):
        return self.states[self.index(x)]

    def identity_report(self, tol=1e-7):
        res = [t.identity_residual(self.J) for t in self.states]
        return ResidualReport.from_values("material_identity", self.grid, res, tol)

    def hermitian_report(self, tol=1e-10):
        res = [norm(t.S - t.S.conj().T) for t in self.states]
        return ResidualReport.from_values("S_hermitian", self.grid, res, tol)

    def min_eig_S(self):
        return np.array([np.linalg.eigvalsh(t.S)[0] for t in self.states])

    def to_dict(self):
        return {
            "grid": [float(x) for x in self.grid],
            "states": [t.to_dict() for t in self.states],
            "integrator": dict(self.integrator_meta),
            "identity": self.identity_report().to_dict(),
        }


@dataclass(frozen=True)
class GaugeMatrix:
    """Samples of ``w0(x)`` on a grid; ``U = w0(0)``."""

    grid: np.ndarray
    values: np.ndarray
    U: np.ndarray
    J: np.ndarray
    route: str = "closed"

    def at(self, x):
        hit = np.flatnonzero(np.isclose(self.grid, x, rtol=0, atol=1e-13))
        if not hit.size:
            raise KeyError(f"x={x} is not a grid point of this gauge")
        return self.values[hit[0]]

    def j_unitarity(self, tol=1e-8):
        res = [check_structure(w, "j_unitary", self.J).max for w in self.values]
        return ResidualReport.from_values("gauge_j_unitary", self.grid, res, tol)


def _inertia(S):
    return int(np.sum(np.linalg.eigvalsh(S) < 0))


def evolve_triple(init, H, J, grid, tol=DEFAULT_RTOL, identity_tol=1e-8, method="RK45"):
    """Integrate the triple over ``grid`` (``grid[0]`` must equal ``init.x``).

    When ``A(0)`` is invertible, ``A(x) = (B - x)^{-1}`` with ``B = A(0)^{-1}``
    is used exactly and only ``Pi`` and ``S`` are integrated; otherwise
    ``A' = A^2`` is integrated too. ``S`` is re-Hermitized at every grid point.

    Raises :class:`IdentityViolationError` if ``init`` fails the identity,
    :class:`SingularityError` on blow-up of ``A`` or when ``S`` becomes
    singular (including a change of inertia between grid points), and
    :class:`IdentityDriftError` if the identity residual exceeds
    ``100 * tol`` (scaled by the size of the terms).
    """
    J = np.asarray(J, dtype=complex)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if abs(grid[0] - init.x) > 1e-14:
        raise ValueError("grid must start at the initial point of the triple")
    r0 = init.identity_residual(J)
    if r0 > identity_tol:
        raise IdentityViolationError(
            f"initial triple violates AS - SA* = i Pi J Pi* (residual {r0:.3g})", residual=r0)

    n, m = init.n, init.m
    use_B = np.linalg.cond(init.A) < COND_LIMIT
    B = np.linalg.inv(init.A) + init.x * np.eye(n) if use_B else None
    eye = np.eye(n)

    def A_of(x):
        return np.linalg.inv(B - x * eye)

    def unpack(y):
        k = 0
        if use_B:
            A = None
        else:
            A = y[:n * n].reshape(n, n)
            k = n * n
        Pi = y[k:k + n * m].reshape(n, m)
        S = y[k + n * m:].reshape(n, n)
        return A, Pi, S

    def rhs(x, y):
        A, Pi, S = unpack(y)
        if A is None:
            A = A_of(x)
        JH = J @ H(x)
        dPi = -1j * A @ Pi @ JH
        dS = Pi @ JH @ J.conj().T @ Pi.conj().T - (A @ S + S @ A.conj().T)
        parts = [dPi.ravel(), dS.ravel()]
        if not use_B:
            parts.insert(0, (A @ A).ravel())
        return np.concatenate(parts)

    def pack(t):
        parts = [t.Pi.ravel(), t.S.ravel()]
        if not use_B:
            parts.insert(0, t.A.ravel())
        return np.concatenate(parts).astype(complex)

    states = [init]
    nfev = 0
    inertia = _inertia(init.S)
    y = pack(init)
    for a, b in zip(grid[:-1], grid[1:]):
        if use_B and np.linalg.cond(B - b * eye) > COND_LIMIT:
            raise SingularityError(f"det(B - xI) = 0 near x={b:g}", x=float(b))
        sol = solve_ivp(rhs, (a, b), y, method=method, rtol=tol, atol=DEFAULT_ATOL * tol / DEFAULT_RTOL)
        nfev += sol.nfev
        if sol.status != 0:
            raise SingularityError(f"integration failed at x={sol.t[-1]:g}: {sol.message}",
                                   x=float(sol.t[-1]))
        A, Pi, S = unpack(sol.y[:, -1])
        if A is None:
            A = A_of(b)
        elif not np.all(np.isfinite(A)) or norm(A) > COND_LIMIT:
            raise SingularityError(f"A(x) blows up near x={b:g}", x=float(b))
        S = (S + S.conj().T) / 2
        if np.linalg.cond(S) > COND_LIMIT:
            raise SingularSError(f"S(x) is singular at x={b:g}", x=float(b))
        new_inertia = _inertia(S)
        if new_inertia != inertia:
            raise SingularSError(f"S(x) passes through a singular point in ({a:g}, {b:g})",
                                 x=float(b))
        t = GbdtTriple(A, S, Pi, b)
        res = t.identity_residual(J)
        scale = max(1.0, norm(A @ S) + norm(Pi) ** 2)
        if res > 100 * tol * scale:
            raise IdentityDriftError(
                f"identity drift {res:.3g} at x={b:g} exceeds {100 * tol * scale:.3g}", residual=res)
        states.append(t)
        y = pack(t)

    meta = {"method": method, "rtol": tol, "atol": DEFAULT_ATOL * tol / DEFAULT_RTOL,
            "nfev": int(nfev), "closed_form_A": bool(use_B)}
    return TripleTrajectory(grid, tuple(states), H, J, meta)


def transfer_matrix(t, J, z):
    """``w_A(x, z) = I - i J Pi* S^{-1} (A - lambda I)^{-1} Pi`` with ``lambda = 1/(z - x)``.

    ``z = inf`` gives ``lambda = 0``, i.e. ``w_A(x, inf)``.
    """
    J = np.asarray(J, dtype=complex)
    if np.isinf(z):
        lam = 0.0
    else:
        if abs(z - t.x) == 0:
            raise SpectrumHitError("z coincides with x", x=t.x)
        lam = 1.0 / (z - t.x)
    Sinv = guarded_inv(t.S, "S", t.x, SingularSError)
    R = guarded_inv(t.A - lam * np.eye(t.n), "A - lambda I", t.x, SpectrumHitError)
    return np.eye(t.m) - 1j * J @ t.Pi.conj().T @ Sinv @ R @ t.Pi


def gauge_w0(traj, U=None):
    """``w0(x) = w_A(x, inf) w_A(0, inf)^{-1} U`` on the trajectory grid.

    ``w_A(0, inf)^{-1}`` is taken as ``J w_A(0, inf)* J``. Falls back to
    integrating ``w0' = G0 w0`` when some ``A(x_k)`` is not invertible.
    """
    J = traj.J
    m = J.shape[0]
    U = np.eye(m, dtype=complex) if U is None else np.asarray(U, dtype=complex)
    if check_structure(U, "j_unitary", J).max > 1e-10:
        raise ValueError("U must be J-unitary")
    try:
        w_inf = [transfer_matrix(t, J, np.inf) for t in traj.states]
    except SpectrumHitError:
        return gauge_w0_ode(traj.states[0], traj.H, J, traj.grid, U)
    U_t = J @ w_inf[0].conj().T @ J @ U
    values = np.array([w @ U_t for w in w_inf])
    values[0] = U
    return GaugeMatrix(traj.grid, values, U, J, "closed")


def gauge_generator(t, H, J):
    """``G0 = -J (i M - H J M + M J* H)`` with ``M = Pi* S^{-1} Pi``."""
    M = t.Pi.conj().T @ guarded_inv(t.S, "S", t.x, SingularSError) @ t.Pi
    return -J @ (1j * M - H @ J @ M + M @ J.conj().T @ H)


def gauge_w0_ode(init, H, J, grid, U=None, tol=1e-11):
    """Integrate the gauge equation together with ``A, Pi, S`` from ``init``.

    Independent of :func:`gauge_w0`'s closed representation.
    """
    J = np.asarray(J, dtype=complex)
    n, m = init.n, init.m
    U = np.eye(m, dtype=complex) if U is None else np.asarray(U, dtype=complex)
    sizes = [n * n, n * m, n * n, m * m]
    cuts = np.cumsum(sizes)[:-1]

    def rhs(x, y):
        A, Pi, S, W = (p.reshape(s) for p, s in zip(
            np.split(y, cuts), [(n, n), (n, m), (n, n), (m, m)]))
        Hx = H(x)
        JH = J @ Hx
        t = GbdtTriple(A, S, Pi, x)
        dW = gauge_generator(t, Hx, J) @ W
        return np.concatenate([
            (A @ A).ravel(), (-1j * A @ Pi @ JH).ravel(),
            (Pi @ JH @ J.conj().T @ Pi.conj().T - (A @ S + S @ A.conj().T)).ravel(),
            dW.ravel()])

    y0 = np.concatenate([init.A.ravel(), init.Pi.ravel(), init.S.ravel(), U.ravel()])
    grid = np.asarray(grid, dtype=float)
    sol = solve_ivp(rhs, (grid[0], grid[-1]), y0, method="DOP853", t_eval=grid,
                    rtol=tol, atol=tol)
    if sol.status != 0:
        raise SingularityError(f"gauge integration failed: {sol.message}", x=float(sol.t[-1]))
    values = np.array([sol.y[cuts[2]:, k].reshape(m, m) for k in range(grid.size)])
    values[0] = U
    return GaugeMatrix(grid, values, U, J, "ode")


def transformed_hamiltonian(gauge, H):
    """``H~(x) = w0(x)* H(x) w0(x)`` sampled on the gauge grid."""
    vals = np.array([w.conj().T @ H(x) @ w for x, w in zip(gauge.grid, gauge.values)])
    vals = (vals + np.conj(np.transpose(vals, (0, 2, 1)))) / 2
    return HamiltonianField.tabulated(gauge.grid, vals, positive=H.positive)


def multiplier_v(t, gauge, J, z):
    """``v(x, z) = w0(x)^{-1} w_A(x, z)``, with ``w0^{-1} = J w0* J``."""
    J = np.asarray(J, dtype=complex)
    w0 = gauge.at(t.x)
    return J @ w0.conj().T @ J @ transfer_matrix(t, J, z)


def transformed_solution(v_at, w_at, z, x):
    """``w~(x, z) = v(x, z) w(x, z) v(0, z)^{-1}``; ``w~(0, z) = I``."""
    v0 = np.asarray(v_at(0.0, z))
    if x == 0:
        return np.eye(v0.shape[0], dtype=complex)
    v0_inv = guarded_inv(v0, "v(0, z)", 0.0)
    return np.asarray(v_at(x, z)) @ np.asarray(w_at(x, z)) @ v0_inv
