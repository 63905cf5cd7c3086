"""Fundamental solutions, boundary values on the cut and jump verification."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .core import ResidualReport, guarded_inv, matrix_to_json, norm
from .exceptions import LimitDivergenceError, ProximityError

DEFAULT_ETAS = (1e-2, 1e-3, 1e-4)
ODE_TOL = 1e-12


@dataclass(frozen=True)
class FundamentalSolution:
    z: complex
    grid: np.ndarray
    values: np.ndarray

    def at(self, x):
        hit = np.flatnonzero(np.isclose(self.grid, x, rtol=0, atol=1e-13))
        if not hit.size:
            raise KeyError(f"x={x} is not a grid point")
        return self.values[hit[0]]

    @property
    def end(self):
        return self.values[-1]

    def to_dict(self):
        return {"z": {"re": self.z.real, "im": self.z.imag},
                "grid": [float(x) for x in self.grid],
                "values": [matrix_to_json(v) for v in self.values]}


def base_closed_form(x, z, J, H):
    """``I + i ln(z / (z - x)) J H`` (exact when ``(J H)^2 = 0`` and H is constant)."""
    return np.eye(J.shape[0]) + 1j * np.log(z / (z - x)) * (J @ H)


def _distance_to_interval(z, l):
    s = min(max(z.real, 0.0), l)
    return abs(z - s)


def _window(z, x0, x1):
    """Where steps must stay below eta/10 for this z: ``(lo, hi, cap)`` or None."""
    eta, s = abs(z.imag), z.real
    if eta >= 0.1 or not (x0 < s < x1):
        return None
    return max(x0, s - 10 * eta), min(x1, s + 10 * eta), eta / 10


def _segments(zs, x0, x1):
    """Break ``[x0, x1]`` so every step near ``x = Re z`` stays below ``|Im z| / 10``."""
    windows = [w for w in (_window(z, x0, x1) for z in zs) if w is not None]
    cuts = sorted({x0, x1, *(w[0] for w in windows), *(w[1] for w in windows)})
    segs = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = (lo + hi) / 2
        cap = min([w[2] for w in windows if w[0] <= mid <= w[1]], default=np.inf)
        segs.append((lo, hi, cap))
    return segs


def integrate_fundamental(H, J, z, grid=None, tol=ODE_TOL):
    """Solve ``w' = i (z - x)^{-1} J H(x) w`` with ``w(0) = I`` and sample it on ``grid``."""
    J = np.asarray(J, dtype=complex)
    z = complex(z)
    grid = np.array([0.0, H.l] if grid is None else grid, dtype=float)
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must start at 0 and increase")
    if _distance_to_interval(z, grid[-1]) < 1e-12:
        raise ProximityError(f"z={z} is too close to [0, {grid[-1]:g}]")
    m = J.shape[0]

    def rhs(x, y):
        return (1j / (z - x)) * (J @ H(x) @ y.reshape(m, m)).ravel()

    y = np.eye(m, dtype=complex).ravel()
    out = [np.eye(m, dtype=complex)]
    for a, b in zip(grid[:-1], grid[1:]):
        for lo, hi, cap in _segments([z], a, b):
            sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=tol, atol=tol, max_step=cap)
            if sol.status != 0:
                raise ProximityError(f"integration failed near x={sol.t[-1]:g}: {sol.message}")
            y = sol.y[:, -1]
        out.append(y.reshape(m, m).copy())
    return FundamentalSolution(z, grid, np.array(out))


def extrapolate_zero(etas, values):
    """Polynomial (Neville) extrapolation of ``values(eta)`` to ``eta = 0``.

    Returns the extrapolated value and an error estimate, the distance to
    the best estimate that uses one sample fewer.
    """
    etas = list(etas)
    table = [list(values)]
    while len(table[-1]) > 1:
        prev = table[-1]
        k = len(table)
        table.append([(etas[i + k] * prev[i] - etas[i] * prev[i + 1]) / (etas[i + k] - etas[i])
                      for i in range(len(prev) - 1)])
    best = table[-1][0]
    runner_up = table[-2][-1] if len(table) > 1 else values[-1]
    return best, norm(best - runner_up)


def check_contraction(values, s=None):
    """Raise :class:`LimitDivergenceError` if successive differences grow."""
    diffs = [norm(b - a) for a, b in zip(values[:-1], values[1:])]
    if any(d1 > d0 and d1 > 1e-10 for d0, d1 in zip(diffs[:-1], diffs[1:])):
        where = "" if s is None else f" at s={s:g}"
        raise LimitDivergenceError(f"boundary values{where} do not contract: {diffs}")
    return diffs


def _fundamental_ends(H, J, zs, tol=ODE_TOL):
    """``w(l, z)`` for several ``z`` at once; ``H`` is evaluated once per step for all of them."""
    zs = np.asarray(zs, dtype=complex)
    m = J.shape[0]
    k = zs.size
    for z in zs:
        if _distance_to_interval(z, H.l) < 1e-12:
            raise ProximityError(f"z={z} is too close to [0, {H.l:g}]")

    def rhs(x, y):
        lam = (1j / (zs - x))[:, None, None]
        return (lam * np.matmul(J @ H(x), y.reshape(k, m, m))).ravel()

    y = np.tile(np.eye(m, dtype=complex), (k, 1, 1)).ravel()
    for lo, hi, cap in _segments(zs, 0.0, H.l):
        sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=tol, atol=tol, max_step=cap)
        if sol.status != 0:
            raise ProximityError(f"integration failed near x={sol.t[-1]:g}: {sol.message}")
        y = sol.y[:, -1]
    return y.reshape(k, m, m)


def boundary_values(H, J, s, etas=DEFAULT_ETAS, tol=ODE_TOL):
    """``W+-(s) = lim w(l, s +- i eta)`` as ``eta -> +0``.

    Returns ``(W_plus, W_minus, err_plus, err_minus)``.
    """
    if not 0 < s < H.l:
        raise ValueError(f"s={s} must lie strictly inside (0, {H.l:g})")
    etas = sorted(etas, reverse=True)
    if len(etas) < 3:
        raise ValueError("at least three eta values are needed")
    J = np.asarray(J, dtype=complex)
    zs = [s + sign * 1j * e for sign in (1, -1) for e in etas]
    ends = _fundamental_ends(H, J, zs, tol)
    out = []
    for vals in (ends[:len(etas)], ends[len(etas):]):
        check_contraction(list(vals), s)
        out.append(extrapolate_zero(etas, list(vals)))
    (Wp, ep), (Wm, em) = out
    return Wp, Wm, ep, em


@dataclass(frozen=True)
class JumpData:
    s_grid: np.ndarray
    W_plus: np.ndarray
    W_minus: np.ndarray
    R: np.ndarray
    extrapolation_error: np.ndarray
    eta_sequence: tuple

    @property
    def R_squared(self):
        return np.einsum("kij,kjl->kil", self.R, self.R)

    def with_jump(self, R):
        """Same boundary values against another jump ``R(s)`` (callable)."""
        return JumpData(self.s_grid, self.W_plus, self.W_minus,
                        np.array([R(s) for s in self.s_grid]),
                        self.extrapolation_error, self.eta_sequence)

    def to_dict(self, report=None):
        report = report or verify_jump(self)
        return {
            "eta_sequence": list(self.eta_sequence),
            "samples": [
                {"s": float(s), "W_plus": matrix_to_json(wp), "W_minus": matrix_to_json(wm),
                 "R_squared": matrix_to_json(r2), "residual": res, "extrapolation_error": float(e)}
                for s, wp, wm, r2, res, e in zip(self.s_grid, self.W_plus, self.W_minus,
                                                 self.R_squared, report.residuals,
                                                 self.extrapolation_error)],
            "report": report.to_dict(),
        }

    def write_csv(self, path, report=None):
        report = report or verify_jump(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "residual", "extrapolation_error"])
            for s, r, e in zip(self.s_grid, report.residuals, self.extrapolation_error):
                w.writerow([repr(float(s)), repr(float(r)), repr(float(e))])

    def write_json(self, path, report=None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(report), fh, indent=2, sort_keys=True)


def compute_jump(H, J, s_grid, R, etas=DEFAULT_ETAS):
    """Boundary values of ``w(l, .)`` on ``s_grid`` paired with the jump ``R(s)``."""
    Wp, Wm, err = [], [], []
    for s in s_grid:
        p, m, ep, em = boundary_values(H, J, s, etas)
        Wp.append(p)
        Wm.append(m)
        err.append(max(ep, em))
    return JumpData(np.asarray(s_grid, dtype=float), np.array(Wp), np.array(Wm),
                    np.array([R(s) for s in s_grid]), np.array(err), tuple(etas))


def verify_jump(jump, tol=1e-5):
    """Relative residual ``|W+ - W- R^2| / |W- R^2|`` at each ``s``."""
    res = []
    for Wp, Wm, R2 in zip(jump.W_plus, jump.W_minus, jump.R_squared):
        target = Wm @ R2
        res.append(norm(Wp - target) / norm(target))
    return ResidualReport.from_values("rh_jump", jump.s_grid, res, tol)


def transformed_jump_via_v(v0, R):
    """``s -> v(0, s) R(s) v(0, s)^{-1}``."""
    def R_tilde(s):
        v = np.asarray(v0(s))
        return v @ np.asarray(R(s)) @ guarded_inv(v, "v(0, s)", 0.0)
    return R_tilde


def transformed_boundary_values(v_l, v_0, W):
    """``W~ = v(l, s) W v(0, s)^{-1}`` for one boundary value."""
    return np.asarray(v_l) @ np.asarray(W) @ guarded_inv(v_0, "v(0, s)", 0.0)


def markov_m1(H, J, nodes=201):
    """``M1 = int_0^l J H(x) dx`` by composite Simpson, plus ``i (m22 - m11)`` for m = 2."""
    if nodes < 3:
        raise ValueError("need at least 3 nodes")
    if nodes % 2 == 0:
        nodes += 1
    J = np.asarray(J, dtype=complex)
    xs = np.linspace(0.0, H.l, nodes)
    vals = np.array([J @ H(x) for x in xs])
    M1 = simpson(vals, x=xs, axis=0)
    scalar = 1j * (M1[1, 1] - M1[0, 0]) if M1.shape == (2, 2) else None
    return M1, scalar
