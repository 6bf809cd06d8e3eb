"""Command-line interface: ``aqcgap <command> [options]``.

Exit codes: 0 success, 1 failed verification, 2 input error, 3 solver
failure (non-convergence or an unresolvable degenerate gap). Errors are
also reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .art import (MODES, MatrixElementPolicy, compute_art, sweep_report, write_art_reports)
from .desev import DEFAULT_GROUP_TOL, DEFAULT_TOP_M, WHICH, desev_trace, group_levels, write_desev
from .errors import AqcGapError, ConvergenceError, DegenerateGapError, InputError
from .graph import CkParams, ck_generate, load_graph, parse_number, save_graph
from .hamiltonian import AnnealSystem
from .spectra import DEFAULT_GRID, fmt, scan_gap, uniform_grid, write_gap_scan

TABLE1_WB = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9]
TABLE2_K = [1, 2, 3, 4, 5, 10, 20, 30, 40, 50]


@dataclass
class RunConfig:
    command: str = ""
    graph: str | None = None
    r: int = 3
    g: int = 3
    w_A: float = 1.0
    w_B: float = 1.8
    J: float = 2.0
    k: float = 1.0
    k_list: list = field(default_factory=lambda: list(TABLE2_K))
    w_B_list: list = field(default_factory=lambda: list(TABLE1_WB))
    grid: int = DEFAULT_GRID
    grid_points: list | None = None
    tol: float = 1e-10
    s_tol: float = 1e-9
    group_tol: float = DEFAULT_GROUP_TOL
    out: str = "results"
    jobs: int | None = None
    state: str = "ground"
    top: int = DEFAULT_TOP_M
    zoom: list | None = None
    zoom_points: int = 33
    desev_grid: int = 21
    cluster: bool = False
    policy: str = "projection-norm"

    def validate(self) -> "RunConfig":
        for name in ("tol", "s_tol", "group_tol"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.grid < 3 and not self.grid_points:
            raise InputError("grid count must be >= 3")
        if self.desev_grid < 2:
            raise InputError("desev grid count must be >= 2")
        if self.k < 1 or any(k < 1 for k in self.k_list):
            raise InputError("scaling factor k must be >= 1")
        if self.top < 1:
            raise InputError("--top must be >= 1")
        if self.state not in WHICH:
            raise InputError(f"--state must be one of {sorted(WHICH)}")
        if self.jobs is not None and self.jobs < 1:
            raise InputError("--jobs must be >= 1")
        if self.zoom is not None and len(self.zoom) != 2:
            raise InputError("--zoom takes two values")
        return self

    def s_grid(self) -> np.ndarray:
        if self.grid_points:
            pts = sorted(set([0.0, 1.0] + [float(s) for s in self.grid_points]))
            if pts[0] < 0 or pts[-1] > 1:
                raise InputError("grid points must lie in [0, 1]")
            return np.array(pts)
        return uniform_grid(self.grid)


_NUMERIC = {"w_A", "w_B", "J", "k", "tol", "s_tol", "group_tol"}
_INTEGER = {"r", "g", "grid", "jobs", "top", "zoom_points", "desev_grid"}


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in _NUMERIC:
            return parse_number(value)
        if key in _INTEGER:
            return int(value)
        if key in ("k_list", "w_B_list", "grid_points", "zoom"):
            items = value.split(",") if isinstance(value, str) else value
            return [parse_number(v) for v in items]
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad value for {key}: {value!r}") from exc
    return value


def load_config(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"config file is not valid YAML/JSON: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise InputError("config file must hold a mapping")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return doc


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    values.update({k: v for k, v in vars(args).items() if k in {f.name for f in fields(RunConfig)}})
    values = {k: _coerce(k, v) for k, v in values.items()}
    values["command"] = args.command
    return RunConfig(**values).validate()


# -- helpers ------------------------------------------------------------------

def _system(cfg: RunConfig, k=None, w_B=None):
    if cfg.graph:
        graph, partition = load_graph(cfg.graph)
    else:
        params = CkParams(cfg.r, cfg.g, cfg.w_A, cfg.w_B if w_B is None else w_B)
        graph, partition = ck_generate(params, J=cfg.J)
    return AnnealSystem.from_graph(graph, cfg.k if k is None else k, partition), partition


def _tag(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else format(value, "g")


def _provenance(cfg: RunConfig, system: AnnealSystem | None = None) -> dict:
    meta = {"config": asdict(cfg), "version": __version__}
    if system is not None:
        meta["system"] = system.to_dict()
    return meta


def _say(text: str) -> None:
    print(text, flush=True)


# -- commands -----------------------------------------------------------------

def cmd_ck_gen(cfg: RunConfig, out: str | None) -> int:
    params = CkParams(cfg.r, cfg.g, cfg.w_A, cfg.w_B)
    graph, partition = ck_generate(params, J=cfg.J)
    path = Path(out or f"ck_r{params.r}_g{params.g}.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_graph(path, graph, partition)
    _say(f"wrote {path}: {graph.n} vertices, {len(graph.edges)} edges")
    return 0


def cmd_gap(cfg: RunConfig) -> int:
    system, _ = _system(cfg)
    scan = scan_gap(system, cfg.s_grid(), tol=cfg.tol, s_tol=cfg.s_tol, jobs=cfg.jobs)
    csv = Path(cfg.out) / f"gap_k{_tag(system.k)}.csv"
    sidecar = write_gap_scan(scan, csv, _provenance(cfg, system))
    _say(f"s*={scan.s_star:.8f} g_min={scan.g_min:.3e} max|H|={scan.max_norm:.3e}  ({csv}, {sidecar.name})")
    return 0


def cmd_desev(cfg: RunConfig) -> int:
    system, partition = _system(cfg)
    levels = group_levels(system, cfg.group_tol)
    scan = None
    if cfg.cluster:
        scan = scan_gap(system, cfg.s_grid(), tol=cfg.tol, s_tol=cfg.s_tol, jobs=cfg.jobs, with_m=False)
    series = desev_trace(system, levels, np.linspace(0.0, 1.0, cfg.desev_grid), cfg.state, cfg.top,
                         jobs=cfg.jobs, scan=scan, zoom=tuple(cfg.zoom) if cfg.zoom else None,
                         zoom_points=cfg.zoom_points)
    csv = Path(cfg.out) / f"desev_{cfg.state}_k{_tag(system.k)}.csv"
    meta = _provenance(cfg, system)
    if scan is not None:
        meta["s_star"], meta["g_min"] = scan.s_star, scan.g_min
    legend = write_desev(series, system, partition, csv, meta)
    _say(f"{len(series.s_grid)} points, {len(levels)} levels ({series.top_m} shown), "
         f"normalization error {series.normalization_error:.1e}  ({csv}, {legend.name})")
    return 0


def _art_line(r) -> str:
    return (f"k={_tag(r.k)} s*={r.s_star:.8f} g_min={r.g_min:.2e} M(s*)={r.M_at_sstar:.2e} max M={r.max_M:.2e} "
            f"max|H|={r.max_norm:.2e} ART2={r.art2:.2e} ART1={r.art1:.2e} | s'={r.s_prime:.8f} "
            f"ART3={r.art3:.2e} ordering={'ok' if r.ordering['holds'] else 'VIOLATED'}")


def cmd_art(cfg: RunConfig) -> int:
    system, _ = _system(cfg)
    scan = scan_gap(system, cfg.s_grid(), tol=cfg.tol, s_tol=cfg.s_tol, jobs=cfg.jobs)
    report = compute_art(system, scan, policy=MatrixElementPolicy(cfg.policy), jobs=cfg.jobs)
    report.w_B = None if cfg.graph else cfg.w_B
    paths = write_art_reports([report], cfg.out, f"art_k{_tag(system.k)}", _provenance(cfg, system))
    _say(_art_line(report))
    _say(f"wrote {paths['main']}, {paths['ratio']}, {paths['json']}")
    return 0


def _row_log(row) -> None:
    if row.error:
        _say(f"w_B={row.w_B} k={_tag(row.k)}: FAILED {row.error['type']}: {row.error['message']}")
    elif row.report is not None:
        _say(_art_line(row.report))
    else:
        _say(f"w_B={row.w_B:g} k={_tag(row.k)} s*={row.scan.s_star:.4f} g_min={row.scan.g_min:.2e}")


def cmd_table1(cfg: RunConfig) -> int:
    params = CkParams(cfg.r, cfg.g, cfg.w_A, cfg.w_B)
    rows = sweep_report(params, [cfg.k], cfg.w_B_list, cfg.s_grid(), with_art=False, J=cfg.J, tol=cfg.tol,
                        s_tol=cfg.s_tol, jobs=cfg.jobs, log=_row_log)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["w_B,s_star,g_min"]
    doc = {"rows": [], "errors": []}
    for row in rows:
        if row.error:
            lines.append(f"{fmt(row.w_B)},nan,nan")
            doc["errors"].append({"w_B": row.w_B, **row.error})
            continue
        lines.append(",".join(fmt(v) for v in (row.w_B, row.scan.s_star, row.scan.g_min)))
        doc["rows"].append({"w_B": row.w_B, "k": row.k, "s_star": row.scan.s_star, "g_min": row.scan.g_min,
                            "bracket": list(row.scan.bracket), "solver_stats": row.scan.stats})
    (out / "table1.csv").write_text("\n".join(lines) + "\n")
    doc.update(_provenance(cfg))
    (out / "table1.json").write_text(json.dumps(doc, indent=2) + "\n")
    _say(f"wrote {out / 'table1.csv'}, {out / 'table1.json'}")
    return 0


def cmd_table2(cfg: RunConfig) -> int:
    params = CkParams(cfg.r, cfg.g, cfg.w_A, cfg.w_B)
    rows = sweep_report(params, cfg.k_list, None, cfg.s_grid(), J=cfg.J, tol=cfg.tol, s_tol=cfg.s_tol,
                        jobs=cfg.jobs, policy=MatrixElementPolicy(cfg.policy), log=_row_log)
    reports = [r.report for r in rows if r.report is not None]
    errors = [{"k": r.k, **r.error} for r in rows if r.error]
    paths = write_art_reports(reports, cfg.out, "table2", _provenance(cfg), errors)
    _say(f"wrote {paths['main']}, {paths['ratio']}, {paths['json']}")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_checks

    results = run_checks(jobs=cfg.jobs)
    for name, ok, detail in results:
        _say(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(
        [{"check": n, "passed": ok, "detail": d} for n, ok, d in results], indent=2) + "\n")
    return 0 if all(ok for _, ok, _ in results) else 1


# -- parser -------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, graph: bool = True) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="YAML or JSON file with option values")
    p.add_argument("--out", default=S, help="output directory (default: results)")
    p.add_argument("--jobs", type=int, default=S, help="worker processes (default: $AQCGAP_JOBS or CPU count)")
    p.add_argument("--tol", default=S, help="eigensolver residual tolerance relative to ||H|| (default 1e-10)")
    p.add_argument("--s-tol", dest="s_tol", default=S, help="golden-section tolerance on s (default 1e-9)")
    p.add_argument("--grid", type=int, default=S, help=f"uniform scan grid size (default {DEFAULT_GRID})")
    p.add_argument("--grid-points", dest="grid_points", default=S, help="explicit comma-separated s grid")
    if graph:
        p.add_argument("--graph", default=S, help="graph JSON file (default: CK graph from -r/-g/--wa/--wb)")
        _add_ck(p)
        p.add_argument("--k", default=S, help="weight scaling factor (default 1)")


def _add_ck(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("-r", type=int, default=S, help="clique size (default 3)")
    p.add_argument("-g", type=int, default=S, help="number of cliques (default 3)")
    p.add_argument("--wa", dest="w_A", default=S, help="V_A vertex weight (default 1)")
    p.add_argument("--wb", dest="w_B", default=S, help="V_B vertex weight (default 1.8)")
    p.add_argument("--J", dest="J", default=S, help="uniform edge coupling (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqcgap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ck-gen", help="write a CK graph file")
    _add_ck(p)
    p.add_argument("--config", default=argparse.SUPPRESS)
    p.add_argument("-o", "--output", dest="output", default=None, help="graph file path")

    p = sub.add_parser("gap", help="scan the gap and refine its minimum")
    _add_common(p)

    p = sub.add_parser("desev", help="level weights of the ground or first excited state")
    _add_common(p)
    p.add_argument("--state", choices=sorted(WHICH), default=argparse.SUPPRESS)
    p.add_argument("--top", type=int, default=argparse.SUPPRESS, help=f"levels shown (default {DEFAULT_TOP_M})")
    p.add_argument("--zoom", nargs=2, metavar=("S_LO", "S_HI"), default=argparse.SUPPRESS)
    p.add_argument("--zoom-points", dest="zoom_points", type=int, default=argparse.SUPPRESS)
    p.add_argument("--desev-grid", dest="desev_grid", type=int, default=argparse.SUPPRESS,
                   help="uniform trace points on [0,1] (default 21)")
    p.add_argument("--cluster", action="store_true", default=argparse.SUPPRESS,
                   help="run a gap scan and add a dense point cluster around s*")
    p.add_argument("--group-tol", dest="group_tol", default=argparse.SUPPRESS)

    p = sub.add_parser("art", help="ART1/2/3 for one system")
    _add_common(p)
    p.add_argument("--policy", choices=MODES, default=argparse.SUPPRESS)

    p = sub.add_parser("table1", help="minimum gap versus w_B (k=1)")
    _add_common(p, graph=False)
    _add_ck(p)
    p.add_argument("--k", default=argparse.SUPPRESS)
    p.add_argument("--wb-list", dest="w_B_list", default=argparse.SUPPRESS, help="comma-separated w_B values")

    p = sub.add_parser("table2", help="ART measures versus k (w_B=1.8)")
    _add_common(p, graph=False)
    _add_ck(p)
    p.add_argument("--k-list", dest="k_list", default=argparse.SUPPRESS, help="comma-separated k values")
    p.add_argument("--policy", choices=MODES, default=argparse.SUPPRESS)

    p = sub.add_parser("verify", help="run the oracle and invariant checks")
    p.add_argument("--out", default=argparse.SUPPRESS)
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    return parser


COMMANDS = {"gap": cmd_gap, "desev": cmd_desev, "art": cmd_art, "table1": cmd_table1, "table2": cmd_table2,
            "verify": cmd_verify}


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("interval", "residuals", "iterations"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "ck-gen":
            return cmd_ck_gen(cfg, args.output)
        return COMMANDS[args.command](cfg)
    except InputError as exc:
        return _fail(exc, 2)
    except (ConvergenceError, DegenerateGapError) as exc:
        return _fail(exc, 3)
    except AqcGapError as exc:
        return _fail(exc, 3)
    except OSError as exc:
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(main())
