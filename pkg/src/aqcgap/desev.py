"""Decomposed state evolution: weight of an eigenstate on each final energy level."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .graph import VertexPartition
from .hamiltonian import AnnealSystem, check_s
from .lanczos import lanczos_lowest
from .parallel import map_over_s
from .spectra import MAX_M, EigenSolution, fmt, lowest_eigenpairs, rayleigh_ritz

CLUSTER_TOL = 1e-10  # relative to ||H(s)||
DEFAULT_GROUP_TOL = 1e-9
DEFAULT_TOP_M = 7
MAX_PATTERNS = 3
WHICH = {"ground": 0, "first-excited": 1}

BULLET = "•"
TRIANGLE = "△"


@dataclass
class EnergyLevels:
    """Basis states bucketed by (-)energy, best value first."""

    values: np.ndarray
    membership: np.ndarray
    degeneracy: np.ndarray
    k: float = 1.0
    labels: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values)

    def index_of(self, value: float, tol: float = 1e-9) -> int:
        hits = np.flatnonzero(np.abs(self.values - value) <= tol)
        if not len(hits):
            raise KeyError(f"no level with (-)energy {value}")
        return int(hits[0])

    def members(self, level: int) -> np.ndarray:
        return np.flatnonzero(self.membership == level)


def level_text(value: float, k: float) -> str:
    """``5.4`` for k=1, ``5.4/k`` otherwise (the value times k)."""
    if k == 1:
        return f"{round(value, 9):.10g}"
    return f"{round(value * k, 9):.10g}/k"


def minus_energies_direct(system: AnnealSystem) -> np.ndarray:
    """Y for every basis state, evaluated on the selection bits (not via the diagonal)."""
    ising = system.ising
    n, dim = ising.n, system.dim
    out = np.empty(dim)
    chunk = 1 << 16
    for start in range(0, dim, chunk):
        x = np.arange(start, min(start + chunk, dim), dtype=np.int64)
        sel = 1.0 - ((x[:, None] >> np.arange(n)) & 1)
        y = sel @ ising.c / ising.k
        if len(ising.edges):
            y -= (sel[:, ising.edges[:, 0]] * sel[:, ising.edges[:, 1]]) @ ising.J
        out[start : start + len(x)] = y
    return out


def group_levels(system: AnnealSystem, tol: float = DEFAULT_GROUP_TOL) -> EnergyLevels:
    """Bucket basis states by (-)energy; values closer than ``tol`` share a bucket."""
    if not tol > 0:
        raise InputError("grouping tolerance must be positive")
    y = minus_energies_direct(system)
    order = np.argsort(-y, kind="stable")
    ys = y[order]
    starts = np.concatenate([[0], np.flatnonzero(ys[:-1] - ys[1:] > tol) + 1])
    level_of_sorted = np.zeros(len(ys), dtype=np.int64)
    level_of_sorted[starts[1:]] = 1
    level_of_sorted = np.cumsum(level_of_sorted)
    membership = np.empty_like(level_of_sorted)
    membership[order] = level_of_sorted
    degeneracy = np.bincount(membership)
    values = np.array([ys[a] for a in starts])
    labels = [level_text(v, system.k) for v in values]
    return EnergyLevels(values, membership, degeneracy, system.k, labels)


def gamma(state: np.ndarray, levels: EnergyLevels) -> np.ndarray:
    """Probability weight of ``state`` on each level."""
    state = np.asarray(state)
    if state.shape != levels.membership.shape:
        raise InputError(f"state has shape {state.shape}, expected {levels.membership.shape}")
    norm = float(np.linalg.norm(state))
    if abs(norm - 1.0) > 1e-8:
        raise InputError(f"state is not normalized (norm {norm:.12g})")
    return np.bincount(levels.membership, weights=np.abs(state) ** 2, minlength=len(levels))


# -- labels -------------------------------------------------------------------

def format_state_label(x: int, partition: VertexPartition) -> str:
    """Zero-position label: a bullet per V_A zero, a triangle per V_B zero.

    Zeros inside one clique are joined with ``-``.
    """
    n = partition.n
    zeros = [i for i in range(n) if not (int(x) >> i) & 1]
    bullets = BULLET * sum(1 for i in zeros if partition.classes[i] == "A")
    per_clique: dict[int, int] = {}
    for i in zeros:
        if partition.classes[i] == "B":
            per_clique[partition.groups[i]] = per_clique.get(partition.groups[i], 0) + 1
    return bullets + "".join("-".join([TRIANGLE] * per_clique[c]) for c in sorted(per_clique))


def state_pattern(x: int, partition: VertexPartition) -> str:
    """Label with clique segments sorted by size, so symmetric states share one pattern."""
    n = partition.n
    zeros = [i for i in range(n) if not (int(x) >> i) & 1]
    bullets = BULLET * sum(1 for i in zeros if partition.classes[i] == "A")
    sizes = Counter(partition.groups[i] for i in zeros if partition.classes[i] == "B")
    return bullets + "".join("-".join([TRIANGLE] * c) for c in sorted(sizes.values()))


def zero_positions(x: int, n: int) -> str:
    return "{" + ",".join(str(i) for i in range(n) if not (int(x) >> i) & 1) + "}"


def level_patterns(levels: EnergyLevels, level: int, partition: VertexPartition | None, n: int,
                   limit: int = MAX_PATTERNS) -> list[dict]:
    """Most frequent label patterns of a level with their counts."""
    members = levels.members(level)
    if partition is None:
        return [{"pattern": zero_positions(x, n), "count": 1} for x in members[:limit]]
    counts = Counter(state_pattern(x, partition) for x in members)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))
    return [{"pattern": p, "count": c} for p, c in ranked[:limit]]


# -- traces -------------------------------------------------------------------

@dataclass
class DesevPoint:
    s: float
    gamma: np.ndarray
    energy: float
    cluster_dim: int
    degenerate: bool


@dataclass
class DesevSeries:
    s_grid: np.ndarray
    which: str
    gamma: np.ndarray  # (levels, points), every level
    levels: EnergyLevels
    top_m: int
    energies: np.ndarray
    cluster_dims: np.ndarray
    degenerate: np.ndarray

    @property
    def normalization_error(self) -> float:
        return float(np.max(np.abs(self.gamma.sum(axis=0) - 1.0)))

    @property
    def display(self) -> np.ndarray:
        return self.gamma[: self.top_m]

    def series(self, value: float) -> np.ndarray:
        return self.gamma[self.levels.index_of(value)]


def eigen_cluster(system: AnnealSystem, s: float, which: int, tol: float = 1e-12):
    """Lowest eigenpairs covering the (near-)degenerate cluster that holds level ``which``.

    The cluster is every eigenvalue chained to ``E_which`` by steps below
    ``1e-10 ||H(s)||``. While the cluster reaches the highest value found,
    one more eigenpair is pulled in by a Lanczos run deflated against
    everything found so far (its lowest value is the next eigenvalue
    counting multiplicity). Returns ``(solution, lo, hi)`` with the cluster
    occupying columns ``lo..hi``.
    """
    s = check_s(s)
    thr = CLUSTER_TOL * system.norm_bound(s)
    cap = min(MAX_M, system.dim)

    def bounds(vals):
        lo = hi = which
        while lo > 0 and vals[lo] - vals[lo - 1] < thr:
            lo -= 1
        while hi + 1 < len(vals) and vals[hi + 1] - vals[hi] < thr:
            hi += 1
        return lo, hi

    if s in (0.0, 1.0):
        # exact endpoint solutions are cheap; just widen m
        m = which + 2
        while True:
            sol = lowest_eigenpairs(system, s, m, tol)
            lo, hi = bounds(sol.values)
            if hi < len(sol.values) - 1 or m >= cap:
                return sol, lo, hi
            m = min(2 * m, cap)

    # E0 is simple for 0 < s < 1, so the ground state needs no restarts
    sol = lowest_eigenpairs(system, s, which + 2, tol, resolve_multiplicity=which > 0)
    values, vectors, iterations = sol.values, sol.vectors, sol.iterations
    mv = system.matvec(s)
    scale = system.norm_bound(s)
    lo, hi = bounds(values)
    while hi == len(values) - 1 and len(values) < cap:
        extra = lanczos_lowest(mv, system.dim, 1, tol=tol, scale=scale, seed=len(values), deflate=vectors.T)
        iterations += extra.iterations
        values, vectors, residuals = rayleigh_ritz(system, s, np.column_stack([vectors, extra.vectors[:, :1]]))
        lo, hi = bounds(values)
    if len(values) > len(sol.values):
        sol = EigenSolution(s, values, vectors, residuals, iterations)
    return sol, lo, hi


def desev_point(system: AnnealSystem, s: float, which: int, membership: np.ndarray, n_levels: int,
                tol: float = 1e-12) -> DesevPoint:
    sol, lo, hi = eigen_cluster(system, s, which, tol)
    energy, V = float(sol.values[which]), sol.vectors[:, lo : hi + 1]
    weights = np.sum(V * V, axis=1) / V.shape[1]
    g = np.bincount(membership, weights=weights, minlength=n_levels)
    return DesevPoint(float(s), g, energy, V.shape[1], V.shape[1] > 1)


def zoom_cluster(center: float, points: int = 33, inner: float = 1e-6, outer: float = 1e-2) -> np.ndarray:
    """Geometric cluster of ``points`` values centred on ``center``, clipped to [0, 1]."""
    half = (points - 1) // 2
    offsets = np.geomspace(inner, outer, half)
    pts = np.concatenate([center - offsets[::-1], [center], center + offsets])
    return pts[(pts >= 0.0) & (pts <= 1.0)]


def desev_trace(system: AnnealSystem, levels: EnergyLevels, s_grid, which: str = "ground",
                top_m: int = DEFAULT_TOP_M, tol: float = 1e-12, jobs: int | None = None,
                scan=None, zoom: tuple[float, float] | None = None, zoom_points: int = 33) -> DesevSeries:
    """Gamma of the ground or first-excited state at each grid point.

    ``scan`` (a GapScan) adds a geometric cluster of points around its s*;
    ``zoom`` adds a uniform sub-grid on the given window.
    """
    if which not in WHICH:
        raise InputError(f"eigenstate must be one of {sorted(WHICH)}, got {which!r}")
    if top_m < 1:
        raise InputError("top_m must be >= 1")
    grid = [float(s) for s in np.atleast_1d(s_grid)]
    if scan is not None:
        grid.extend(zoom_cluster(scan.s_star, zoom_points))
    if zoom is not None:
        lo, hi = zoom
        if not 0.0 <= lo < hi <= 1.0:
            raise InputError(f"zoom window must satisfy 0 <= lo < hi <= 1, got {zoom}")
        grid.extend(np.linspace(lo, hi, zoom_points))
    grid = np.array(sorted(set(grid)))
    if grid.size == 0 or grid[0] < 0.0 or grid[-1] > 1.0:
        raise InputError("trace grid must lie within [0, 1]")

    points = map_over_s(desev_point, system, grid, jobs, which=WHICH[which],
                        membership=levels.membership, n_levels=len(levels), tol=tol)
    return DesevSeries(
        grid,
        which,
        np.column_stack([p.gamma for p in points]),
        levels,
        min(top_m, len(levels)),
        np.array([p.energy for p in points]),
        np.array([p.cluster_dim for p in points]),
        np.array([p.degenerate for p in points]),
    )


def legend(series: DesevSeries, system: AnnealSystem, partition: VertexPartition | None) -> list[dict]:
    lv = series.levels
    return [
        {
            "index": i,
            "minus_energy": float(lv.values[i]),
            "label": lv.labels[i],
            "degeneracy": int(lv.degeneracy[i]),
            "patterns": level_patterns(lv, i, partition, system.n),
        }
        for i in range(series.top_m)
    ]


def write_desev(series: DesevSeries, system: AnnealSystem, partition: VertexPartition | None, csv_path,
                meta: dict | None = None) -> Path:
    """CSV with one column per displayed level (headed by its (-)energy label) plus a JSON legend."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    top = series.top_m
    lines = ["s," + ",".join(series.levels.labels[:top])]
    for j, s in enumerate(series.s_grid):
        lines.append(",".join([fmt(s)] + [fmt(v) for v in series.gamma[:top, j]]))
    csv_path.write_text("\n".join(lines) + "\n")
    doc = {
        "which": series.which,
        "levels": legend(series, system, partition),
        "total_levels": len(series.levels),
        "normalization_max_error": series.normalization_error,
        "degenerate_points": [float(s) for s, d in zip(series.s_grid, series.degenerate) if d],
        "cluster_tolerance": CLUSTER_TOL,
    }
    if meta:
        doc.update(meta)
    json_path = csv_path.with_suffix(".json")
    json_path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    return json_path
