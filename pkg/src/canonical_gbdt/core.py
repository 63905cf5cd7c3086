"""Shared value types, structural checks and the JSON matrix format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_sylvester

from .exceptions import DimensionError, SingularityError

COND_LIMIT = 1e12

# Signature matrix and the rank-one base Hamiltonian used throughout.
J_BASE = np.array([[0, 1], [1, 0]], dtype=complex)
BETA = np.array([[1, 1j]], dtype=complex)
H_BASE = BETA.conj().T @ BETA


def _frozen(a, ndim=2):
    a = np.array(a, dtype=complex)
    if a.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


def norm(M):
    """Frobenius norm (the single norm used for every residual)."""
    return float(np.linalg.norm(M))


def guarded_inv(M, what="matrix", x=None, error=SingularityError):
    """Inverse with a condition-number guard; raises ``error`` beyond 1e12."""
    M = np.asarray(M)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        where = "" if x is None else f" at x={x:g}"
        raise error(f"{what} is singular{where} (cond={cond:.3g})", x=x)
    return np.linalg.inv(M)


def as_signature(J, tol=1e-12):
    """Validate and freeze a signature matrix ``J = J* = J^{-1}``."""
    J = _frozen(J)
    m = J.shape[0]
    if J.shape != (m, m):
        raise DimensionError("signature matrix must be square")
    if norm(J - J.conj().T) > tol or norm(J @ J - np.eye(m)) > tol:
        raise ValueError("J must be a Hermitian involution")
    return J


@dataclass(frozen=True)
class ResidualReport:
    name: str
    grid: tuple
    residuals: tuple
    tol: float

    @classmethod
    def from_values(cls, name, grid, residuals, tol):
        return cls(name, tuple(float(g) if np.isreal(g) else complex(g) for g in grid),
                   tuple(float(r) for r in residuals), float(tol))

    @property
    def max(self):
        return max(self.residuals) if self.residuals else 0.0

    @property
    def passed(self):
        return self.max < self.tol

    def to_dict(self):
        return {
            "name": self.name,
            "grid": [complex_to_json(g) if isinstance(g, complex) else g for g in self.grid],
            "residuals": list(self.residuals),
            "max": self.max,
            "tolerance": self.tol,
            "pass": self.passed,
        }


def check_structure(M, kind, J=None, tol=1e-8):
    """Residual of a structural property of a square matrix.

    ``kind`` is one of ``"hermitian"`` (``|M - M*|``), ``"j_unitary"``
    (``|M* J M - J|``, needs ``J``) or ``"positive"``
    (``max(0, -lambda_min((M + M*)/2))``).
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"square matrix required, got shape {M.shape}")
    if kind == "hermitian":
        r = norm(M - M.conj().T)
    elif kind == "j_unitary":
        if J is None:
            raise ValueError("j_unitary check needs J")
        J = np.asarray(J)
        if J.shape != M.shape:
            raise DimensionError(f"J has shape {J.shape}, M has {M.shape}")
        r = norm(M.conj().T @ J @ M - J)
    elif kind == "positive":
        lam = np.linalg.eigvalsh((M + M.conj().T) / 2)
        r = max(0.0, -float(lam[0]))
    else:
        raise ValueError(f"unknown structure kind {kind!r}")
    return ResidualReport.from_values(kind, [0.0], [r], tol)


class HamiltonianField:
    """Hermitian matrix function ``H(x)`` on ``[0, l]``.

    Use the constructors :meth:`base`, :meth:`from_callable` and
    :meth:`tabulated`; calling the field evaluates ``H(x)``.
    """

    def __init__(self, func, m, l, kind="callback", positive=False):
        self._func = func
        self.m = int(m)
        self.l = float(l)
        self.kind = kind
        self.positive = positive

    @classmethod
    def base(cls, l=1.0):
        """Constant rank-one ``H = beta* beta`` with ``beta = [1, i]``."""
        return cls(lambda x: H_BASE, 2, l, kind="constant-rank-one", positive=True)

    @classmethod
    def from_callable(cls, func, m, l, positive=False):
        return cls(func, m, l, kind="callback", positive=positive)

    @classmethod
    def tabulated(cls, grid, values, positive=False):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=complex)
        if values.shape[0] != grid.shape[0] or values.ndim != 3:
            raise DimensionError("values must have shape (len(grid), m, m)")
        spline = CubicSpline(grid, values, axis=0) if len(grid) > 2 else None

        def func(x):
            hit = np.flatnonzero(np.isclose(grid, x, rtol=0, atol=1e-14))
            if hit.size:
                return values[hit[0]]
            if spline is None:
                return values[0] + (x - grid[0]) / (grid[1] - grid[0]) * (values[1] - values[0])
            return spline(x)

        field = cls(func, values.shape[1], grid[-1], kind="tabulated", positive=positive)
        field.grid = grid
        field.values = values
        return field

    def __call__(self, x):
        return np.asarray(self._func(x), dtype=complex)

    def check(self, grid, tol=1e-12):
        """Hermitian (and, if flagged, positivity) residuals over ``grid``."""
        herm = [check_structure(self(x), "hermitian").max for x in grid]
        rep = ResidualReport.from_values("hamiltonian_hermitian", grid, herm, tol)
        if not self.positive:
            return rep
        pos = [check_structure(self(x), "positive").max for x in grid]
        return rep, ResidualReport.from_values("hamiltonian_positive", grid, pos, tol)


@dataclass(frozen=True)
class GbdtTriple:
    """The matrices ``A(x)``, ``S(x)`` (n x n) and ``Pi(x)`` (n x m) at ``x``."""

    A: np.ndarray
    S: np.ndarray
    Pi: np.ndarray
    x: float = 0.0

    def __post_init__(self):
        A, S, Pi = (_frozen(np.atleast_2d(M)) for M in (self.A, self.S, self.Pi))
        n = A.shape[0]
        if A.shape != (n, n) or S.shape != (n, n) or Pi.shape[0] != n:
            raise DimensionError(
                f"inconsistent triple shapes A{A.shape} S{S.shape} Pi{Pi.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Pi", Pi)
        object.__setattr__(self, "x", float(self.x))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.Pi.shape[1]

    def identity_residual(self, J):
        J = np.asarray(J)
        if J.shape != (self.m, self.m):
            raise DimensionError(f"J has shape {J.shape}, Pi has {self.m} columns")
        A, S, Pi = self.A, self.S, self.Pi
        return norm(A @ S - S @ A.conj().T - 1j * Pi @ J @ Pi.conj().T)

    def to_dict(self):
        return {"x": self.x, "A": matrix_to_json(self.A), "S": matrix_to_json(self.S),
                "Pi": matrix_to_json(self.Pi)}

    @classmethod
    def from_dict(cls, d):
        return cls(matrix_from_json(d["A"]), matrix_from_json(d["S"]),
                   matrix_from_json(d["Pi"]), d.get("x", 0.0))


def check_material_identity(t, J, tol=1e-8):
    """Frobenius residual of ``AS - SA* - i Pi J Pi*`` for one triple."""
    return ResidualReport.from_values("material_identity", [t.x], [t.identity_residual(J)], tol)


def solve_identity_S(A, Pi, J):
    """The unique ``S`` with ``AS - SA* = i Pi J Pi*`` (needs sigma(A) and sigma(A*) disjoint)."""
    A = np.asarray(A, dtype=complex)
    Pi = np.asarray(Pi, dtype=complex)
    S = solve_sylvester(A, -A.conj().T, 1j * Pi @ np.asarray(J) @ Pi.conj().T)
    return (S + S.conj().T) / 2


def random_admissible_triple(rng, n, m=2, J=J_BASE, positive=True, margin=0.05, l=1.0):
    """Random triple at x=0 satisfying the identity exactly (up to rounding).

    ``S(0)`` is drawn (positive definite if ``positive``), ``Pi(0)`` is random
    and ``A(0) = (K + i Pi J Pi*/2) S^{-1}`` with ``K`` Hermitian. Draws are
    repeated until ``B = A(0)^{-1}`` keeps ``margin`` away from ``[0, l]``.
    """
    for _ in range(1000):
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        S = X @ X.conj().T + 0.5 * np.eye(n) if positive else (X + X.conj().T) / 2
        Pi = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
        Y = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        K = (Y + Y.conj().T) / 2
        A = (K + 0.5j * Pi @ J @ Pi.conj().T) @ np.linalg.inv(S)
        if np.linalg.cond(A) > 1e6 or np.linalg.cond(S) > 1e6:
            continue
        b = np.linalg.eigvals(np.linalg.inv(A))
        dist = np.where((b.real >= 0) & (b.real <= l), np.abs(b.imag),
                        np.minimum(np.abs(b), np.abs(b - l)))
        if dist.min() > margin:
            return GbdtTriple(A, S, Pi, 0.0)
    raise RuntimeError("could not draw an admissible triple")


# JSON format: complex -> {"re": float, "im": float}; matrices row-major nested lists.

def complex_to_json(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def complex_from_json(obj):
    if isinstance(obj, dict):
        if set(obj) != {"re", "im"}:
            raise ValueError(f"complex value needs exactly 're' and 'im' keys, got {sorted(obj)}")
        return complex(float(obj["re"]), float(obj["im"]))
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return complex(obj)
    raise ValueError(f"not a complex value: {obj!r}")


def matrix_to_json(M):
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[complex_to_json(v) for v in row] for row in M]


def matrix_from_json(rows):
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError("matrix must be a non-empty list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged matrix rows")
    return np.array([[complex_from_json(v) for v in r] for r in rows], dtype=complex)


def vector_to_json(v):
    return [complex_to_json(x) for x in np.ravel(v)]


def vector_from_json(items):
    if not isinstance(items, list):
        items = [items]
    return np.array([complex_from_json(v) for v in items], dtype=complex)
