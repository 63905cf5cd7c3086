"""Closed-form GBDT family over the rank-one base system.

Base system: ``m = 2``, ``J = [[0, 1], [1, 0]]``, ``H = beta* beta`` with
``beta = [1, i]`` and jump ``R = I + pi J beta* beta``. Parameters are
``B = diag(b)``, the constant ``g = Pi J beta*`` and the shift ``h`` in
``Pi beta* = 2 (i g_k ln(b_k - x) + h_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BETA, J_BASE, GbdtTriple, HamiltonianField, as_signature, check_structure,
    guarded_inv, matrix_from_json, matrix_to_json, vector_from_json, vector_to_json,
)
from .engine import transfer_matrix
from .exceptions import BranchError, DegenerateSpectrumError, SingularSError, SpectrumHitError

BETA_J = BETA @ J_BASE


@dataclass(frozen=True)
class BaseSystem:
    beta: np.ndarray = field(default_factory=lambda: BETA.copy())
    J: np.ndarray = field(default_factory=lambda: J_BASE.copy())

    @property
    def H(self):
        return self.beta.conj().T @ self.beta

    @property
    def R(self):
        return np.eye(2) + np.pi * self.J @ self.H

    @property
    def R_squared(self):
        return np.eye(2) + 2 * np.pi * self.J @ self.H


BASE = BaseSystem()


@dataclass(frozen=True)
class ExplicitFamilyParams:
    b: np.ndarray
    g: np.ndarray
    h: np.ndarray = None
    U: np.ndarray = None
    l: float = 1.0

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=complex))
        g = np.atleast_1d(np.asarray(self.g, dtype=complex))
        h = np.zeros_like(b) if self.h is None else np.atleast_1d(np.asarray(self.h, dtype=complex))
        U = np.eye(2, dtype=complex) if self.U is None else np.asarray(self.U, dtype=complex)
        if not (b.shape == g.shape == h.shape) or b.ndim != 1:
            raise ValueError("b, g and h must be vectors of the same length")
        bad = (b.imag == 0) & (b.real >= 0)
        if np.any(bad):
            raise BranchError(f"b_k must lie outside [0, inf), got {b[bad]}")
        if U.shape != (2, 2) or check_structure(U, "j_unitary", J_BASE).max > 1e-10:
            raise ValueError("U must be a J-unitary 2x2 matrix")
        if not self.l > 0:
            raise ValueError("l must be positive")
        for name, v in (("b", b), ("g", g), ("h", h), ("U", U)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "l", float(self.l))

    @property
    def n(self):
        return self.b.size

    @property
    def B(self):
        return np.diag(self.b)

    def to_dict(self):
        return {"n": self.n, "b": vector_to_json(self.b), "g": vector_to_json(self.g),
                "h": vector_to_json(self.h), "U": matrix_to_json(self.U), "l": self.l}

    @classmethod
    def from_dict(cls, d):
        b = vector_from_json(d["b"])
        if "n" in d and d["n"] != b.size:
            raise ValueError(f"n={d['n']} does not match len(b)={b.size}")
        h = vector_from_json(d["h"]) if "h" in d else None
        U = matrix_from_json(d["U"]) if "U" in d else None
        return cls(b, vector_from_json(d["g"]), h, U, d.get("l", 1.0))


def _log_shift(b, x):
    w = b - x
    if np.any((w.imag == 0) & (w.real <= 0)):
        raise BranchError(f"b - x meets the logarithm cut at x={x:g}")
    return np.log(w)


def explicit_pi(p, x):
    """``Pi(x) = (g beta J + (Pi beta*) beta) / 2``, an n x 2 matrix."""
    proj = 2 * (1j * p.g * _log_shift(p.b, x) + p.h)
    return 0.5 * (np.outer(p.g, BETA_J[0]) + np.outer(proj, BETA[0]))


def _check_nonresonant(b):
    gap = np.abs(b[:, None] - np.conj(b)[None, :])
    if gap.min() < 1e-12 * max(1.0, np.abs(b).max()):
        raise DegenerateSpectrumError("b_j = conj(b_k) for some j, k")


def explicit_S(p, x):
    """Entrywise solution of ``A S - S A* = i Pi J Pi*`` for diagonal ``A``."""
    _check_nonresonant(p.b)
    Pi = explicit_pi(p, x)
    lam = 1.0 / (p.b - x)
    M = Pi @ J_BASE @ Pi.conj().T
    S = 1j * M / (lam[:, None] - np.conj(lam)[None, :])
    return (S + S.conj().T) / 2


def explicit_triple(p, x):
    return GbdtTriple(np.diag(1.0 / (p.b - x)), explicit_S(p, x), explicit_pi(p, x), x)


def tilde_U(p):
    """``U~ = w_A(0, inf)^{-1} U``, computed as ``J w_A(0, inf)* J U``."""
    w_inf = transfer_matrix(explicit_triple(p, 0.0), J_BASE, np.inf)
    return J_BASE @ w_inf.conj().T @ J_BASE @ p.U


def gauge_row(p, x, U_t=None):
    """``beta w0(x) = (beta - i g* S^{-1} (B - x) Pi) U~``."""
    U_t = tilde_U(p) if U_t is None else U_t
    S_inv = guarded_inv(explicit_S(p, x), "S", x, SingularSError)
    q = BETA - 1j * p.g.conj()[None, :] @ S_inv @ np.diag(p.b - x) @ explicit_pi(p, x)
    return q @ U_t


def explicit_transformed_hamiltonian(p, x, U_t=None):
    row = gauge_row(p, x, U_t)
    Ht = row.conj().T @ row
    return (Ht + Ht.conj().T) / 2


def hamiltonian_evaluator(b, g, h, U_t):
    """Lean ``x -> H~(x)`` for diagonal ``B`` (the ODE right-hand sides call it often).

    Uses ``Pi J Pi* = (g p* + p g*) / 2`` with ``p = Pi beta*`` and
    ``y Pi = ((y g) beta J + (y p) beta) / 2`` for a row ``y``.
    """
    b, g, h = (np.asarray(v, dtype=complex).ravel() for v in (b, g, h))
    _check_nonresonant(b)
    U_t = np.asarray(U_t, dtype=complex)
    gc = g.conj()
    a_row, beta = BETA_J[0], BETA[0]

    def H(x):
        w = b - x
        if np.any((w.imag == 0) & (w.real <= 0)):
            raise BranchError(f"b - x meets the logarithm cut at x={x:g}")
        proj = 2 * (1j * g * np.log(w) + h)
        lam = 1.0 / w
        M = 0.5 * (np.outer(g, proj.conj()) + np.outer(proj, gc))
        S = 1j * M / (lam[:, None] - lam.conj()[None, :])
        try:
            y = np.linalg.solve((S + S.conj().T) / 2, g).conj() * w
        except np.linalg.LinAlgError as exc:
            raise SingularSError(f"S is singular at x={x:g}", x) from exc
        if not np.all(np.isfinite(y)):
            raise SingularSError(f"S is singular at x={x:g}", x)
        row = (beta - 0.5j * ((y @ g) * a_row + (y @ proj) * beta)) @ U_t
        return np.outer(row.conj(), row)
    return H


def hamiltonian_field(p):
    """``H~`` as a callback :class:`HamiltonianField` on ``[0, l]``."""
    return HamiltonianField.from_callable(
        hamiltonian_evaluator(p.b, p.g, p.h, tilde_U(p)), 2, p.l, positive=True)


def jump_row(B, g, S0, Pi0, s):
    """``r(s) = beta + i s g* (s - B*)^{-1} B* S(0)^{-1} Pi(0)`` for any square ``B``.

    ``s = inf`` returns the limit ``beta + i g* B* S(0)^{-1} Pi(0)``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    g = np.asarray(g, dtype=complex).ravel()
    n = B.shape[0]
    S0_inv = guarded_inv(S0, "S(0)", 0.0, SingularSError)
    Bh = B.conj().T
    if np.isinf(s):
        core = Bh
    else:
        core = s * guarded_inv(s * np.eye(n) - Bh, "s - B*", error=SpectrumHitError) @ Bh
    return BETA + 1j * g.conj()[None, :] @ core @ S0_inv @ np.asarray(Pi0)


def explicit_r(p, s):
    return jump_row(p.B, p.g, explicit_S(p, 0.0), explicit_pi(p, 0.0), s)


def jump_from_row(r, U):
    """``I + pi J U* r* r U``."""
    ru = np.atleast_2d(r) @ U
    return np.eye(2) + np.pi * J_BASE @ ru.conj().T @ ru


def explicit_transformed_jump(p, s):
    """``R~(s) = I + pi J U* r(s)* r(s) U``."""
    if np.any(np.abs(p.b - s) < 1e-14):
        raise SpectrumHitError(f"s={s:g} is an eigenvalue of B")
    return jump_from_row(explicit_r(p, s), p.U)


def nilpotency_residual(M, J=J_BASE):
    """``|M J M|``; zero exactly when ``(J M)^2 = 0``."""
    return float(np.linalg.norm(M @ as_signature(J) @ M))

