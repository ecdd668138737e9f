"""Dense complex solvers, condition numbers and the local orthonormalisation.

Small matrices go through a one-sided (Hestenes) Jacobi SVD, which keeps
tiny singular values accurate to high relative precision.  Above
``JACOBI_LIMIT`` columns the LAPACK divide-and-conquer SVD is used instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

SATURATION = 1e15
JACOBI_LIMIT = 160
_JACOBI_SWEEPS = 60


class SingularMatrixError(ArithmeticError):
    def __init__(self, pivot: int):
        super().__init__(f"exactly singular pivot at index {pivot}")
        self.pivot = pivot


class GramError(ArithmeticError):
    """Element Gram block is not numerically positive definite."""


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    cond2: float = float("nan")
    rank_used: int = 0

    @property
    def saturated(self) -> bool:
        return not self.cond2 <= SATURATION


def _relative_residual(a, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(a @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def lu_solve(matrix, rhs, with_cond: bool = False) -> SolveReport:
    """Partial-pivoting LU solve; raises :class:`SingularMatrixError`."""
    a = np.asarray(matrix)
    b = np.asarray(rhs)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("lu_solve needs a square matrix")
    with warnings.catch_warnings():
        # a zero pivot is reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    zero = np.flatnonzero(np.diag(lu) == 0)
    if zero.size:
        raise SingularMatrixError(int(zero[0]))
    x = sla.lu_solve((lu, piv), b)
    cond = svd_cond(a)[0] if with_cond else float("nan")
    return SolveReport(x, _relative_residual(a, x, b), cond, a.shape[0])


def _jacobi_svd(a: np.ndarray):
    """One-sided Jacobi on the columns of ``a`` (m >= n); returns U, s, Vh."""
    u = np.array(a, dtype=complex, copy=True)
    m, n = u.shape
    v = np.eye(n, dtype=complex)
    tol = 1e-15 * max(m, 1) ** 0.5
    # round-robin pairings: each round touches every column once
    players = list(range(n + (n % 2)))
    for _ in range(_JACOBI_SWEEPS):
        rotated = False
        for _r in range(len(players) - 1):
            half = len(players) // 2
            ii = np.array([players[i] for i in range(half)])
            jj = np.array([players[-1 - i] for i in range(half)])
            keep = (ii < n) & (jj < n)
            ii, jj = ii[keep], jj[keep]
            if ii.size:
                ai, aj = u[:, ii], u[:, jj]
                alpha = np.sum(np.abs(ai) ** 2, axis=0)
                beta = np.sum(np.abs(aj) ** 2, axis=0)
                gamma = np.sum(ai.conj() * aj, axis=0)
                g = np.abs(gamma)
                act = g > tol * np.sqrt(alpha * beta)
                act &= g > 0
                if act.any():
                    rotated = True
                    ii, jj = ii[act], jj[act]
                    alpha, beta, gamma, g = alpha[act], beta[act], gamma[act], g[act]
                    phase = gamma / g
                    zeta = (beta - alpha) / (2.0 * g)
                    t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = c * t
                    for mat in (u, v):
                        xi = mat[:, ii]
                        xj = mat[:, jj] * phase.conj()
                        mat[:, ii] = c * xi - s * xj
                        mat[:, jj] = s * xi + c * xj
            players = [players[0]] + [players[-1]] + players[1:-1]
        if not rotated:
            break
    sv = np.linalg.norm(u, axis=0)
    order = np.argsort(-sv)
    sv = sv[order]
    u = u[:, order]
    v = v[:, order]
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(sv > 0, u / np.where(sv > 0, sv, 1.0), 0.0)
    return u, sv, v.conj().T


def svd(matrix):
    """Thin SVD (U, s, Vh) with s descending."""
    a = np.asarray(matrix, dtype=complex)
    m, n = a.shape
    if min(m, n) == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((0, n))
    if min(m, n) > JACOBI_LIMIT:
        return sla.svd(a, full_matrices=False, lapack_driver="gesdd")
    if m >= n:
        return _jacobi_svd(a)
    u, s, vh = _jacobi_svd(a.conj().T)
    return vh.conj().T, s, u.conj().T


def svd_cond(matrix) -> tuple[float, np.ndarray]:
    """Spectral condition number and singular values; inf when sigma_min is 0."""
    s = svd(matrix)[1]
    if s.size == 0:
        return 1.0, s
    if s[-1] == 0.0 or not np.isfinite(s[0] / s[-1]):
        return float("inf"), s
    return float(s[0] / s[-1]), s


def truncated_svd_solve(matrix, rhs, rel_threshold: float) -> SolveReport:
    """Minimal-norm solve keeping singular values >= rel_threshold * sigma_max."""
    if not 0.0 <= rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie in [0, 1)")
    a = np.asarray(matrix, dtype=complex)
    b = np.asarray(rhs, dtype=complex)
    u, s, vh = svd(a)
    keep = s > rel_threshold * s[0] if s.size else s.astype(bool)
    keep &= s > 0
    coef = (u[:, keep].conj().T @ b) / s[keep]
    x = vh[keep].conj().T @ coef
    cond = float(s[0] / s[-1]) if s.size and s[-1] > 0 else float("inf")
    return SolveReport(x, _relative_residual(a, x, b), cond, int(keep.sum()))


def local_orthonormalize(matrix, rhs, grams, offsets):
    """Congruence A' = T^H A T, b' = T^H b with T = blockdiag(L_K^{-H}).

    ``grams[K]`` is the Hermitian positive definite boundary Gram matrix of
    element K, ``offsets`` the dof offsets.  Returns (A', b', T); the original
    coefficients are ``T @ c'``.
    """
    n = offsets[-1]
    t = np.zeros((n, n), dtype=complex)
    for kk, g in enumerate(grams):
        g = np.asarray(g, dtype=complex)
        try:
            low = np.linalg.cholesky(0.5 * (g + g.conj().T))
        except np.linalg.LinAlgError:
            raise GramError(f"Gram block of element {kk} is not positive definite") from None
        sl = slice(offsets[kk], offsets[kk + 1])
        t[sl, sl] = sla.solve_triangular(low, np.eye(len(g)), lower=True).conj().T
    a = np.asarray(matrix)
    return t.conj().T @ a @ t, t.conj().T @ np.asarray(rhs), t
