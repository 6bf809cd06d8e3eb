"""Lowest eigenpairs of H(s), gap scans and minimum-gap refinement."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DegenerateGapError, InputError
from .hamiltonian import AnnealSystem, check_s, spins
from .lanczos import lanczos_lowest
from .parallel import map_over_s

DEFAULT_TOL = 1e-12
DEFAULT_S_TOL = 1e-9
DEFAULT_GRID = 257
LOCAL_GRID = 33
DEGENERACY_TOL = 1e-13  # relative to ||H(s)||
MAX_M = 64
DENSE_MAX_N = 12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class EigenSolution:
    s: float
    values: np.ndarray
    vectors: np.ndarray  # columns
    residuals: np.ndarray
    iterations: int = 0
    norm: float = float("nan")  # ||H(s)|| when known


@dataclass
class GapSample:
    s: float
    E0: float
    E1: float
    gap: float
    M: float = float("nan")
    norm: float = float("nan")
    residual: float = 0.0
    iterations: int = 0
    degenerate: bool = False


@dataclass
class GapScan:
    samples: list[GapSample]
    s_star: float
    g_min: float
    bracket: tuple[float, float]
    refinement: list[GapSample] = field(default_factory=list)
    tol: float = DEFAULT_TOL
    s_tol: float = DEFAULT_S_TOL
    stats: dict = field(default_factory=dict)

    @property
    def grid(self) -> np.ndarray:
        return np.array([p.s for p in self.samples])

    def all_samples(self) -> list[GapSample]:
        """Grid and refinement samples merged by s."""
        merged = {p.s: p for p in self.samples}
        for p in self.refinement:
            merged.setdefault(p.s, p)
        return [merged[s] for s in sorted(merged)]

    @property
    def best(self) -> GapSample:
        return min(self.all_samples(), key=lambda p: (p.gap, p.s))

    @property
    def max_norm(self) -> float:
        return max(p.norm for p in self.all_samples())


def uniform_grid(count: int = DEFAULT_GRID) -> np.ndarray:
    if count < 3:
        raise InputError(f"grid needs at least 3 points, got {count}")
    return np.linspace(0.0, 1.0, count)


# -- exact endpoints ----------------------------------------------------------

def _walsh_order(n: int, m: int) -> list[int]:
    out = []
    for weight in range(n + 1):
        for combo in itertools.combinations(range(n), weight):
            out.append(sum(1 << b for b in combo))
            if len(out) == m:
                return out
    return out


def _walsh_vector(y: int, n: int) -> np.ndarray:
    x = np.arange(1 << n, dtype=np.int64)
    v = np.full(1 << n, 1.0 / math.sqrt(1 << n))
    for b in range(n):
        if (y >> b) & 1:
            v *= 1 - 2 * ((x >> b) & 1)
    return v


def _endpoint_solution(system: AnnealSystem, s: float, m: int) -> EigenSolution:
    n, dim = system.n, system.dim
    if s == 0.0:
        ys = _walsh_order(n, m)
        values = np.array([-n + 2.0 * bin(y).count("1") for y in ys])
        vectors = np.column_stack([_walsh_vector(y, n) for y in ys])
        norm = float(n)
    else:
        order = np.argsort(system.diag, kind="stable")[:m]
        values = system.diag[order].copy()
        vectors = np.zeros((dim, len(order)))
        vectors[order, np.arange(len(order))] = 1.0
        norm = system._diag_absmax
    return EigenSolution(s, values, vectors, np.zeros(len(values)), 0, norm)


# -- iterative solves ---------------------------------------------------------

def rayleigh_ritz(system: AnnealSystem, s: float, V: np.ndarray):
    """Best eigenpair approximations of ``H(s)`` within span(V): values, vectors, residual norms."""
    mv = system.matvec(s)
    V, _ = np.linalg.qr(V)
    HV = np.column_stack([mv(V[:, i]) for i in range(V.shape[1])])
    small = V.T @ HV
    values, U = np.linalg.eigh(0.5 * (small + small.T))
    V, HV = V @ U, HV @ U
    return values, V, np.linalg.norm(HV - V * values, axis=0)


def lowest_eigenpairs(system: AnnealSystem, s: float, m: int = 2, tol: float = DEFAULT_TOL,
                      resolve_multiplicity: bool = True, seed: int = 0) -> EigenSolution:
    """The ``m`` lowest eigenpairs of ``H(s)`` counting multiplicity.

    One Lanczos run sees each eigenspace through a single direction. With
    ``resolve_multiplicity`` the solve is repeated from fresh start vectors
    deflated against everything found so far, until no new value falls
    below the current m-th one. Extra copies of the m-th value itself are
    not hunted down; they do not change the m lowest values. The endpoints
    s=0 and s=1 are solved exactly.
    """
    s = check_s(s)
    if not 1 <= m <= MAX_M:
        raise InputError(f"m must lie in 1..{MAX_M}, got {m}")
    if m > system.dim:
        raise InputError(f"m={m} exceeds the dimension {system.dim}")
    if s in (0.0, 1.0):
        return _endpoint_solution(system, s, m)

    mv = system.matvec(s)
    scale = system.norm_bound(s)
    first = lanczos_lowest(mv, system.dim, m, tol=tol, scale=scale, seed=seed)
    values, vectors, iterations = first.values, first.vectors, first.iterations
    if not resolve_multiplicity and len(values) == m:
        return EigenSolution(s, values, vectors, first.residuals, iterations)

    # a restart only matters if it finds a value strictly below the current m-th one
    slack = 100 * tol * scale
    for round_ in range(1, MAX_M + m + 1):
        if vectors.shape[1] >= system.dim:
            break
        cutoff = np.sort(values)[m - 1] if len(values) >= m else np.inf
        want = min(m, system.dim - vectors.shape[1])
        extra = lanczos_lowest(mv, system.dim, want, tol=tol, scale=scale, seed=seed + round_, deflate=vectors.T)
        iterations += extra.iterations
        new = extra.values < cutoff - slack
        if not np.any(new):
            break
        values = np.concatenate([values, extra.values[new]])
        vectors = np.column_stack([vectors, extra.vectors[:, new]])
    values, vectors, residuals = rayleigh_ritz(system, s, vectors)
    return EigenSolution(s, values[:m], vectors[:, :m], residuals[:m], iterations)


def _m_at_zero_limit(system: AnnealSystem) -> float:
    """``M(0+)``, following the E1 branch that leaves s=0.

    E1 is n-fold degenerate at s=0 (the weight-one Walsh vectors ``W``).
    To first order in s the branch that stays lowest is the bottom
    eigenvector of ``W^T diag W``; M is the overlap of ``diag |u>`` with
    it (projection norm if that bottom eigenvalue is itself degenerate).
    """
    W = spins(np.arange(system.dim), system.n) / math.sqrt(system.dim)
    reduced = W.T @ (system.diag[:, None] * W)
    mu, U = np.linalg.eigh(reduced)
    bottom = U[:, mu - mu[0] <= 1e-9 * max(1.0, abs(mu[0]))]
    b = W.T @ system.diag / math.sqrt(system.dim)
    return float(np.linalg.norm(bottom.T @ b))


def _exact_m_at_one(system: AnnealSystem, e1: float, x0: int, tol: float) -> float:
    members = np.flatnonzero(np.abs(system.diag - e1) <= tol)
    hamming_one = [x for x in members if bin(int(x) ^ x0).count("1") == 1]
    return math.sqrt(len(hamming_one))


def sample_point(system: AnnealSystem, s: float, tol: float = DEFAULT_TOL, with_m: bool = True) -> GapSample:
    """Gap, matrix element and ``||H(s)||`` at a single s.

    Interior points use one Lanczos run (E0 is simple there by
    Perron-Frobenius, so the second distinct Ritz value is E1 counting
    multiplicity whenever E1 itself is simple). ``M`` is
    ``|<E1|dH/ds|E0>|`` for that run's vectors. At s=0, where E1 is
    degenerate, M is the one-sided limit along the E1 branch so that the
    sampled curve is continuous.
    """
    s = check_s(s)
    if s == 0.0:
        n = system.n
        m_val = _m_at_zero_limit(system) if with_m else float("nan")
        return GapSample(0.0, -n, -n + 2.0, 2.0, m_val, float(n))
    if s == 1.0:
        order = np.argsort(system.diag, kind="stable")
        e0, e1 = float(system.diag[order[0]]), float(system.diag[order[1]])
        norm = system._diag_absmax
        degenerate = e1 - e0 < DEGENERACY_TOL * norm
        m_val = float("nan")
        if with_m and not degenerate:
            m_val = _exact_m_at_one(system, e1, int(order[0]), 1e-10 * norm)
        return GapSample(1.0, e0, e1, e1 - e0, m_val, norm, degenerate=degenerate)

    mv = system.matvec(s)
    res = lanczos_lowest(mv, system.dim, 2, tol=tol, scale=system.norm_bound(s), seed=0, want_top=True)
    e0, e1 = float(res.values[0]), float(res.values[1])
    norm = max(abs(e0), abs(res.top_value))
    m_val = float("nan")
    if with_m:
        m_val = abs(float(res.vectors[:, 1] @ system.dH(res.vectors[:, 0])))
    gap = e1 - e0
    return GapSample(s, e0, e1, gap, m_val, norm, float(np.max(res.residuals)), res.iterations,
                     degenerate=gap < DEGENERACY_TOL * norm)


def gap(system: AnnealSystem, s: float, tol: float = DEFAULT_TOL) -> GapSample:
    """``(E0, E1, E1 - E0)`` at s, flagged degenerate below ``1e-13 ||H||``."""
    return sample_point(system, s, tol, with_m=False)


# -- minimisation -------------------------------------------------------------

def golden_section(f: Callable[[float], float], lo: float, hi: float, s_tol: float = DEFAULT_S_TOL):
    """Minimise a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x), evaluations)`` where ``x`` is the best point seen and
    ``evaluations`` maps every probed point to its value.
    """
    if not hi > lo:
        raise InputError(f"empty interval [{lo}, {hi}]")
    seen: dict[float, float] = {}

    def ev(x):
        if x not in seen:
            seen[x] = f(x)
        return seen[x]

    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    while b - a > s_tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = ev(d)
    x = min(seen, key=lambda p: (seen[p], p))
    return x, seen[x], seen


def _checked_gap_fn(system, tol, with_m, store):
    def f(s):
        p = sample_point(system, s, tol, with_m)
        store.append(p)
        if p.degenerate:
            raise DegenerateGapError(f"degenerate gap at s={s:.12g}", (s, s))
        return p.gap

    return f


def refine_min_gap(system: AnnealSystem | None, bracket, s_tol: float = DEFAULT_S_TOL,
                   tol: float = DEFAULT_TOL, func: Callable[[float], float] | None = None):
    """Golden-section refinement of the gap minimum inside ``(s_lo, s_mid, s_hi)``.

    ``func`` replaces the gap with an arbitrary scalar function (used to
    self-test the minimiser). Returns ``(s_star, g_min)``.
    """
    lo, mid, hi = (float(b) for b in bracket)
    if not lo <= mid <= hi or lo == hi:
        raise InputError(f"bracket {bracket} is not ordered")
    f = func if func is not None else _checked_gap_fn(system, tol, False, [])
    f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
    if f_mid > min(f_lo, f_hi):
        raise InputError(f"bracket {bracket} does not enclose a minimum: f(mid)={f_mid:.6g}")
    x, fx, _ = golden_section(f, lo, hi, s_tol)
    best = min([(fx, x), (f_mid, mid)])
    return best[1], best[0]


def _bracket(s_values: np.ndarray, i: int) -> tuple[float, float]:
    return float(s_values[max(i - 1, 0)]), float(s_values[min(i + 1, len(s_values) - 1)])


def scan_gap(system: AnnealSystem, grid=None, tol: float = DEFAULT_TOL, s_tol: float = DEFAULT_S_TOL,
             jobs: int | None = None, with_m: bool = True, local_points: int = LOCAL_GRID) -> GapScan:
    """Sample the gap on ``grid`` and refine its minimum.

    The smallest grid sample's neighbours bound a local grid of
    ``local_points`` points; golden section then runs between the local
    minimum's neighbours. Tied grid minima are all refined and the smaller
    result wins.
    """
    grid = uniform_grid() if grid is None else np.asarray(sorted(set(float(g) for g in grid)))
    if grid.size < 3 or grid[0] != 0.0 or grid[-1] != 1.0:
        raise InputError("grid needs at least 3 points and must span [0, 1]")
    samples = map_over_s(sample_point, system, grid, jobs, tol=tol, with_m=with_m)
    scan = GapScan(samples, float("nan"), float("nan"), (float("nan"), float("nan")), tol=tol, s_tol=s_tol)

    degenerate = [p for p in samples if p.degenerate]
    if degenerate:
        idx = [int(np.searchsorted(grid, p.s)) for p in degenerate]
        interval = (float(grid[max(min(idx) - 1, 0)]), float(grid[min(max(idx) + 1, len(grid) - 1)]))
        err = DegenerateGapError(f"degenerate gap on the scan grid in {interval}", interval)
        err.scan = scan
        raise err

    gaps = np.array([p.gap for p in samples])
    g0 = gaps.min()
    ties = np.flatnonzero(gaps <= g0 * (1 + 1e-12))
    results = []
    for i in ties:
        lo, hi = _bracket(grid, int(i))
        local = np.linspace(lo, hi, local_points)
        fresh = [s for s in local if s not in set(grid)]
        local_samples = map_over_s(sample_point, system, fresh, jobs, tol=tol, with_m=with_m)
        scan.refinement.extend(local_samples)
        pool = {p.s: p for p in local_samples}
        pool.update({p.s: p for p in samples if lo <= p.s <= hi})
        if any(p.degenerate for p in local_samples):
            err = DegenerateGapError(f"degenerate gap inside ({lo}, {hi})", (lo, hi))
            err.scan = scan
            raise err
        s_local = np.array(sorted(pool))
        j = int(np.argmin([pool[s].gap for s in s_local]))
        a, b = _bracket(s_local, j)
        store: list[GapSample] = []
        try:
            golden_section(_checked_gap_fn(system, tol, with_m, store), a, b, s_tol)
        finally:
            scan.refinement.extend(store)
        best = min(list(pool.values()) + store, key=lambda p: (p.gap, p.s))
        results.append((best.gap, best.s, (lo, hi)))

    g_min, s_star, bracket = min(results)
    scan.g_min, scan.s_star, scan.bracket = float(g_min), float(s_star), bracket
    everything = scan.all_samples()
    scan.stats = {
        "solves": len(everything),
        "iterations": int(sum(p.iterations for p in everything)),
        "max_residual": float(max(p.residual for p in everything)),
    }
    return scan


# -- dense oracle -------------------------------------------------------------

def dense_matrix(system: AnnealSystem, s: float) -> np.ndarray:
    if system.n > DENSE_MAX_N:
        raise InputError(f"dense oracle limited to n <= {DENSE_MAX_N}, got n={system.n}")
    s = check_s(s)
    dim = system.dim
    H = np.diag(s * system.diag)
    x = np.arange(dim)
    for b in range(system.n):
        H[x, x ^ (1 << b)] -= 1.0 - s
    return H


def dense_oracle_spectrum(system: AnnealSystem, s: float) -> np.ndarray:
    """All eigenvalues of the explicitly built ``H(s)`` (n <= 12)."""
    return np.linalg.eigvalsh(dense_matrix(system, s))


# -- output -------------------------------------------------------------------

def fmt(value: float) -> str:
    return "nan" if value != value else format(float(value), ".17g")


def write_gap_scan(scan: GapScan, csv_path, meta: dict | None = None) -> Path:
    """CSV ``s,E0,E1,gap,M`` over grid and refinement samples plus a JSON sidecar."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["s,E0,E1,gap,M"]
    for p in scan.all_samples():
        lines.append(",".join(fmt(v) for v in (p.s, p.E0, p.E1, p.gap, p.M)))
    csv_path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "s_star": scan.s_star,
        "g_min": scan.g_min,
        "bracket": list(scan.bracket),
        "grid": {"count": len(scan.samples), "points": [p.s for p in scan.samples]},
        "tolerances": {"eigensolver": scan.tol, "s_tol": scan.s_tol, "degeneracy": DEGENERACY_TOL},
        "max_norm": scan.max_norm,
        "solver_stats": scan.stats,
    }
    if meta:
        sidecar.update(meta)
    json_path = csv_path.with_suffix(".json")
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return json_path
