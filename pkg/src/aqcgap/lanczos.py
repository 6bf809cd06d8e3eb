"""Lanczos solver for the low end of a real symmetric operator.

The three-term recurrence runs on a stored basis. Orthogonality is kept by
selective orthogonalization: once a low-end Ritz value converges to
``sqrt(eps)`` its Ritz vector is frozen and every later Lanczos vector is
orthogonalized against it, which suppresses ghost copies at the cheap price
of a handful of dot products per step. Optional deflation vectors are
projected out of every step, which is how callers hunt for additional copies
of a degenerate eigenvalue.

A single start vector only ever sees one direction per eigenspace, so this
routine returns distinct eigenvalues; multiplicities are recovered one level
up by restarting with deflation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError

_EPS = np.finfo(float).eps
_BLOCK = 128
FULL_REORTH_DIM = 2048


@dataclass
class LanczosResult:
    values: np.ndarray
    vectors: np.ndarray  # shape (dim, k)
    residuals: np.ndarray
    iterations: int
    top_value: float = float("nan")
    top_residual: float = float("nan")
    exhausted: bool = False  # Krylov space became invariant before nev values appeared


def start_vector(dim: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


class _Basis:
    """Append-only row storage for Lanczos vectors."""

    def __init__(self, dim: int):
        self.dim = dim
        self.blocks: list[np.ndarray] = []
        self.size = 0

    def append(self, q: np.ndarray) -> None:
        if self.size % _BLOCK == 0:
            self.blocks.append(np.empty((_BLOCK, self.dim)))
        self.blocks[-1][self.size % _BLOCK] = q
        self.size += 1

    def row(self, j: int) -> np.ndarray:
        return self.blocks[j // _BLOCK][j % _BLOCK]

    def orthogonalize(self, w: np.ndarray) -> np.ndarray:
        for b, block in enumerate(self.blocks):
            rows = block[: min(_BLOCK, self.size - b * _BLOCK)]
            w -= rows.T @ (rows @ w)
        return w

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        """Return ``Q^T coeffs`` for coefficient rows over the first ``len(coeffs)`` vectors."""
        count = coeffs.shape[0]
        out = np.zeros((self.dim,) + coeffs.shape[1:])
        for b, block in enumerate(self.blocks):
            lo = b * _BLOCK
            if lo >= count:
                break
            hi = min(lo + _BLOCK, count)
            out += block[: hi - lo].T @ coeffs[lo:hi]
        return out


def _project_out(w: np.ndarray, Z: np.ndarray | None) -> np.ndarray:
    if Z is not None and len(Z):
        w -= (Z @ w) @ Z
    return w


def lanczos_lowest(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    nev: int = 2,
    *,
    tol: float = 1e-12,
    scale: float = 1.0,
    seed: int = 0,
    deflate: np.ndarray | None = None,
    maxiter: int | None = None,
    check_every: int = 10,
    want_top: bool = False,
    top_tol: float | None = None,
    full_reorth: bool | None = None,
) -> LanczosResult:
    """Lowest ``nev`` distinct eigenpairs of a symmetric operator.

    Parameters
    ----------
    matvec : callable
        Applies the operator to a vector of length ``dim``.
    tol : float
        Convergence threshold on the residual norm, relative to ``scale``.
    scale : float
        An estimate (upper bound is fine) of the operator norm. With
        ``want_top`` the Ritz lower bound on the norm replaces it once smaller.
    seed : int
        Seed of the pseudorandom start vector.
    deflate : ndarray, optional
        Orthonormal rows that are projected out of the search space.
    want_top : bool
        Also converge the largest eigenvalue (to ``top_tol``).
    full_reorth : bool, optional
        Orthogonalize every step against the whole basis (twice). Defaults
        to True for ``dim <= 2048``, where it is cheap and makes the
        Krylov space exact once it fills the whole space. A run whose
        explicit residuals miss the estimates is repeated with it switched on.

    Returns
    -------
    LanczosResult
        Values ascending, vectors as columns, explicit residual norms
        ``||A v - lambda v||``.
    """
    if full_reorth is None:
        full_reorth = dim <= FULL_REORTH_DIM
    if maxiter is None:
        maxiter = min(dim, 4000)
    maxiter = max(1, min(maxiter, dim))
    top_tol = tol if top_tol is None else top_tol
    threshold = tol * scale
    lock_threshold = np.sqrt(_EPS) * scale
    breakdown = 64 * _EPS * scale

    Z = None
    if deflate is not None and len(deflate):
        Z = np.atleast_2d(np.asarray(deflate, dtype=float))

    q = _project_out(start_vector(dim, seed), Z)
    q_norm = np.linalg.norm(q)
    if q_norm < 1e-8:
        raise ConvergenceError("start vector lies inside the deflated subspace")
    q /= q_norm

    basis = _Basis(dim)
    basis.append(q)
    alpha = np.empty(maxiter)
    beta = np.empty(maxiter)
    locked = np.empty((0, dim))
    locked_values: list[float] = []

    theta = S = None
    res_est = None
    for j in range(maxiter):
        qj = basis.row(j)
        w = matvec(qj)
        if j > 0:
            w -= beta[j - 1] * basis.row(j - 1)
        a = qj @ w
        w -= a * qj
        alpha[j] = a
        if full_reorth:
            for _ in range(2):
                w = basis.orthogonalize(_project_out(w, Z))
        elif len(locked):
            w -= (locked @ w) @ locked
        w = _project_out(w, Z)
        b = np.linalg.norm(w)
        beta[j] = b
        size = j + 1
        exhausted = b <= breakdown or (full_reorth and size == dim)
        if not exhausted:
            basis.append(w / b)

        if size % check_every and not exhausted and size != maxiter:
            continue
        k = min(nev + 2, size)
        theta, S = _tridiag_eig(alpha[:size], beta[: size - 1], 0, k - 1)
        res_est = np.abs(b * S[-1])
        if want_top:
            top_theta, top_S = _tridiag_eig(alpha[:size], beta[: size - 1], size - 1, size - 1)
            top_est = 0.0 if exhausted else abs(b * top_S[-1, 0])
        if exhausted:
            res_est = np.zeros_like(res_est)

        # freeze newly converged low-end Ritz vectors
        n_locked = len(locked_values)
        if n_locked and np.max(np.abs(theta[:n_locked] - np.asarray(locked_values))) > lock_threshold:
            locked = np.empty((0, dim))
            locked_values = []
            n_locked = 0
        while n_locked < min(len(theta), nev + 1) and res_est[n_locked] < lock_threshold and not exhausted:
            y = basis.combine(S[:, n_locked : n_locked + 1])[:, 0]
            if len(locked):
                y -= locked.T @ (locked @ y)
            y /= np.linalg.norm(y)
            locked = np.vstack([locked, y])
            locked_values.append(float(theta[n_locked]))
            n_locked += 1

        if want_top:
            # Ritz extremes bound ||A|| from below, which makes the test strict
            norm_low = max(abs(theta[0]), abs(top_theta[0]))
            threshold = tol * min(scale, norm_low)
        have = min(nev, len(theta))
        done = exhausted or (have == nev and np.all(res_est[:nev] <= threshold))
        if want_top and done and not exhausted:
            done = top_est <= top_tol * min(scale, norm_low)
        if done:
            result = _finish(matvec, basis, theta, S, have, size, exhausted and have < nev)
            if np.any(result.residuals > 1e3 * max(threshold, _EPS * scale)):
                if not full_reorth:
                    # selective orthogonalization let ghosts through; redo the run exactly
                    return lanczos_lowest(matvec, dim, nev, tol=tol, scale=scale, seed=seed, deflate=deflate,
                                          maxiter=maxiter, check_every=check_every, want_top=want_top,
                                          top_tol=top_tol, full_reorth=True)
                raise ConvergenceError(
                    "Lanczos Ritz pairs lost accuracy (explicit residual far above the estimate)",
                    residuals=result.residuals.tolist(), iterations=size)
            if want_top:
                result.top_value, result.top_residual = float(top_theta[0]), float(top_est)
            return result

    raise ConvergenceError(
        f"Lanczos did not converge in {maxiter} iterations",
        residuals=None if res_est is None else res_est[:nev].tolist(),
        iterations=maxiter,
    )


def _tridiag_eig(d: np.ndarray, e: np.ndarray, lo: int, hi: int):
    """Eigenpairs ``lo..hi`` of a symmetric tridiagonal matrix.

    MRRR occasionally fails on tightly clustered spectra; fall back to the
    bisection driver, then to a dense solve.
    """
    if len(d) == 1:
        return d.copy(), np.ones((1, 1))
    for driver in ("stemr", "stebz"):
        try:
            return eigh_tridiagonal(d, e, select="i", select_range=(lo, hi), lapack_driver=driver)
        except np.linalg.LinAlgError:
            continue
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    w, V = np.linalg.eigh(T)
    return w[lo : hi + 1], V[:, lo : hi + 1]


def _finish(matvec, basis, theta, S, have, size, exhausted) -> LanczosResult:
    V = basis.combine(S[:, :have])
    # Rayleigh-Ritz on the returned vectors restores mutual orthogonality
    V, _ = np.linalg.qr(V)
    HV = np.column_stack([matvec(V[:, i]) for i in range(have)])
    small = V.T @ HV
    values, U = np.linalg.eigh(0.5 * (small + small.T))
    V = V @ U
    HV = HV @ U
    residuals = np.linalg.norm(HV - V * values, axis=0)
    return LanczosResult(values, V, residuals, size, exhausted=exhausted)
