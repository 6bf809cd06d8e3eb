"""Matrix element M(s), the three running-time measures and sweep reports."""

from __future__ import annotations

import json
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import AqcGapError, DegenerateGapError, InputError
from .graph import CkParams, WeightedGraph, ck_generate
from .hamiltonian import AnnealSystem, check_s
from .parallel import map_over_s
from .desev import eigen_cluster
from .spectra import LOCAL_GRID, GapSample, GapScan, fmt, golden_section, sample_point, scan_gap

MODES = ("projection-norm", "max-over-basis")
TIGHT_TOL = 1e-14
RATIO_S_TOL = 1e-8
TABLE_TOL = 1e-10


@dataclass(frozen=True)
class MatrixElementPolicy:
    """How M is formed when E1 belongs to a (near-)degenerate cluster."""

    degenerate_mode: str = "projection-norm"

    def __post_init__(self):
        if self.degenerate_mode not in MODES:
            raise InputError(f"degenerate_mode must be one of {MODES}, got {self.degenerate_mode!r}")


def _pair(system: AnnealSystem, s: float, tol: float):
    sol, lo, hi = eigen_cluster(system, s, 1, tol)
    if lo == 0:
        raise DegenerateGapError(f"E0 is degenerate at s={s:.12g}; M is undefined", (s, s))
    return sol.vectors[:, 0], sol.vectors[:, lo : hi + 1]


def matrix_element(system: AnnealSystem, s: float, policy: MatrixElementPolicy | None = None,
                   tol: float = 1e-12) -> float:
    """``|<E1| dH/ds |E0>|`` with ``dH/ds = H_problem - H_init``.

    If E1 sits in a near-degenerate cluster the default policy returns the
    norm of the projection of ``dH/ds |E0>`` onto the whole cluster, which
    does not depend on the basis chosen inside it.
    """
    policy = policy or MatrixElementPolicy()
    s = check_s(s)
    v0, V1 = _pair(system, s, tol)
    overlaps = V1.T @ system.dH(v0)
    if policy.degenerate_mode == "projection-norm":
        return float(np.linalg.norm(overlaps))
    return float(np.max(np.abs(overlaps)))


def verify_bitflip_identity(system: AnnealSystem, s: float, tol: float = 1e-12) -> float:
    """``| M(s) - |<E1|H_init|E0>| / s |`` for the same eigenvectors."""
    s = check_s(s)
    if s == 0.0:
        raise InputError("the bit-flip identity divides by s; s=0 is excluded")
    v0, V1 = _pair(system, s, tol)
    direct = np.linalg.norm(V1.T @ system.dH(v0))
    flipped = np.linalg.norm(V1.T @ system.flip_sum(v0)) / s
    return float(abs(direct - flipped))


@dataclass
class ArtReport:
    k: float
    s_star: float
    g_min: float
    M_at_sstar: float
    max_M: float
    s_max_M: float
    max_norm: float
    art1: float
    art2: float
    art3: float
    s_prime: float
    g_at_sprime: float
    M_at_sprime: float
    ratio: float
    policy: str = "projection-norm"
    w_B: float | None = None
    ordering: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def check_ordering(report: ArtReport, rel: float = 1e-9) -> dict:
    """Evaluate ``art2 <= art1 <= art3 * (1 + rel)``."""
    a2_le_a1 = report.art2 <= report.art1
    a1_le_a3 = report.art1 <= report.art3 * (1 + rel)
    return {"art2_le_art1": bool(a2_le_a1), "art1_le_art3": bool(a1_le_a3), "holds": bool(a2_le_a1 and a1_le_a3)}


def _ratio(p: GapSample) -> float:
    return p.M / p.gap**2


def compute_art(system: AnnealSystem, gap_scan: GapScan, grid=None, policy: MatrixElementPolicy | None = None,
                tol: float | None = None, tight_tol: float = TIGHT_TOL, s_tol: float = RATIO_S_TOL,
                jobs: int | None = None) -> ArtReport:
    """ART1, ART2 and ART3 from a refined gap scan.

    The matrix element at s* and s' is re-solved at ``tight_tol`` because
    it can be many orders below the solver noise of a routine scan. Both
    maxima of ART1 run over the scan's samples (grid plus refinement
    clusters), which include s*, so ``art2 <= art1`` holds by construction.
    """
    policy = policy or MatrixElementPolicy()
    tol = gap_scan.tol if tol is None else tol
    samples = gap_scan.all_samples()
    if grid is not None:
        known = {p.s for p in samples}
        extra = [float(s) for s in grid if float(s) not in known]
        samples += map_over_s(sample_point, system, extra, jobs, tol=tol, with_m=True)
        samples.sort(key=lambda p: p.s)
    if any(p.degenerate for p in samples):
        bad = [p.s for p in samples if p.degenerate]
        raise DegenerateGapError(f"degenerate gap at s={bad[0]:.12g}", (min(bad), max(bad)))
    if any(p.M != p.M for p in samples):
        raise InputError("gap scan was run without matrix elements")

    s_star, g_min = gap_scan.s_star, gap_scan.g_min
    M_star = matrix_element(system, s_star, policy, tight_tol)
    max_norm = max(p.norm for p in samples)
    i_max = int(np.argmax([p.M for p in samples]))
    max_M, s_max_M = samples[i_max].M, samples[i_max].s
    if M_star > max_M:
        max_M, s_max_M = M_star, s_star

    # ratio M/g^2: local grid around the best sample, then golden section
    s_all = np.array([p.s for p in samples])
    j = int(np.argmax([_ratio(p) for p in samples]))
    lo, hi = float(s_all[max(j - 1, 0)]), float(s_all[min(j + 1, len(s_all) - 1)])
    local = [s for s in np.linspace(lo, hi, LOCAL_GRID) if s not in set(s_all)]
    local_samples = map_over_s(sample_point, system, local, jobs, tol=tol, with_m=True)
    pool = {p.s: p for p in samples if lo <= p.s <= hi}
    pool.update({p.s: p for p in local_samples})
    s_loc = np.array(sorted(pool))
    jj = int(np.argmax([_ratio(pool[s]) for s in s_loc]))
    a, b = float(s_loc[max(jj - 1, 0)]), float(s_loc[min(jj + 1, len(s_loc) - 1)])
    probes: list[GapSample] = []

    def neg_ratio(s):
        p = sample_point(system, s, tol, True)
        probes.append(p)
        if p.degenerate:
            raise DegenerateGapError(f"degenerate gap at s={s:.12g}", (s, s))
        return -_ratio(p)

    golden_section(neg_ratio, a, b, s_tol)
    candidates = samples + local_samples + probes
    best = max(candidates, key=lambda p: (_ratio(p), -p.s))
    s_prime = best.s
    if s_prime == s_star:
        M_prime, g_prime = M_star, g_min
    else:
        M_prime = matrix_element(system, s_prime, policy, tight_tol)
        g_prime = sample_point(system, s_prime, tight_tol, with_m=False).gap
        if M_star / g_min**2 >= M_prime / g_prime**2:
            s_prime, M_prime, g_prime = s_star, M_star, g_min
    ratio = M_prime / g_prime**2

    report = ArtReport(
        k=system.k,
        s_star=s_star,
        g_min=g_min,
        M_at_sstar=M_star,
        max_M=max_M,
        s_max_M=s_max_M,
        max_norm=max_norm,
        art1=max_M * max_norm / g_min**2,
        art2=M_star * max_norm / g_min**2,
        art3=max_norm * ratio,
        s_prime=s_prime,
        g_at_sprime=g_prime,
        M_at_sprime=M_prime,
        ratio=ratio,
        policy=policy.degenerate_mode,
        stats={"ratio_solves": len(local_samples) + len(probes), "tight_tol": tight_tol, "scan_tol": tol},
    )
    report.ordering = check_ordering(report)
    return report


# -- sweeps -------------------------------------------------------------------

@dataclass
class SweepRow:
    w_B: float | None
    k: float
    scan: GapScan | None = None
    report: ArtReport | None = None
    error: dict | None = None


def sweep_report(graph: WeightedGraph | CkParams, k_list, w_B_list=None, grid=None, *, with_art: bool = True,
                 J: float = 2.0, tol: float = TABLE_TOL, s_tol: float = 1e-9, jobs: int | None = None,
                 policy: MatrixElementPolicy | None = None, log=None) -> list[SweepRow]:
    """Scan, refine and (optionally) ART for every ``(w_B, k)`` pair, in input order.

    ``w_B_list`` requires CK parameters as ``graph``. A failing row records
    its error and the sweep moves on.
    """
    k_list = list(k_list)
    w_list = list(w_B_list) if w_B_list else [None]
    if w_B_list and not isinstance(graph, CkParams):
        raise InputError("w_B overrides need CK parameters, not a fixed graph")
    rows = []
    for w_B in w_list:
        if isinstance(graph, CkParams):
            params = graph if w_B is None else CkParams(graph.r, graph.g, graph.w_A, w_B)
            g, partition = ck_generate(params, J=J)
            w_value = params.w_B
        else:
            g, partition, w_value = graph, None, None
        for k in k_list:
            row = SweepRow(w_value, float(k))
            try:
                system = AnnealSystem.from_graph(g, k, partition)
                row.scan = scan_gap(system, grid, tol=tol, s_tol=s_tol, jobs=jobs, with_m=with_art)
                if with_art:
                    row.report = compute_art(system, row.scan, policy=policy, jobs=jobs)
                    row.report.w_B = w_value
            except (AqcGapError, np.linalg.LinAlgError) as exc:
                row.error = {"type": type(exc).__name__, "message": str(exc),
                             "trace": traceback.format_exc(limit=3)}
            if log:
                log(row)
            rows.append(row)
    return rows


# -- output -------------------------------------------------------------------

TABLE2_COLUMNS = ("k", "s_star", "g_min", "M_sstar", "max_M", "max_normH", "ART2", "ART1")
RATIO_COLUMNS = ("k", "s_prime", "g_sprime", "M_sprime", "ratio", "max_normH", "ART3")


def _k_cell(k: float) -> str:
    return str(int(k)) if float(k).is_integer() else fmt(k)


def _sci(value: float) -> str:
    return "nan" if value != value else f"{value:.2e}"


def table2_lines(reports: list[ArtReport]) -> tuple[list[str], list[str]]:
    """Both Table-2 CSV bodies, 3 significant digits and s to 8 decimals."""
    main = [",".join(TABLE2_COLUMNS)]
    ratio = [",".join(RATIO_COLUMNS)]
    for r in reports:
        main.append(",".join([_k_cell(r.k), f"{r.s_star:.8f}", _sci(r.g_min), _sci(r.M_at_sstar), _sci(r.max_M),
                              _sci(r.max_norm), _sci(r.art2), _sci(r.art1)]))
        ratio.append(",".join([_k_cell(r.k), f"{r.s_prime:.8f}", _sci(r.g_at_sprime), _sci(r.M_at_sprime),
                               _sci(r.ratio), _sci(r.max_norm), _sci(r.art3)]))
    return main, ratio


def write_art_reports(reports: list[ArtReport], out_dir, stem: str = "art", meta: dict | None = None,
                      errors: list[dict] | None = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    main, ratio = table2_lines(reports)
    paths = {"main": out_dir / f"{stem}.csv", "ratio": out_dir / f"{stem}_ratio.csv", "json": out_dir / f"{stem}.json"}
    paths["main"].write_text("\n".join(main) + "\n")
    paths["ratio"].write_text("\n".join(ratio) + "\n")
    doc = {"reports": [r.to_dict() for r in reports], "errors": errors or []}
    if meta:
        doc.update(meta)
    paths["json"].write_text(json.dumps(doc, indent=2) + "\n")
    return paths
