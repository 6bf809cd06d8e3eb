"""Fast oracle and invariant checks behind ``aqcgap verify``."""

from __future__ import annotations

import itertools

import numpy as np

from .art import verify_bitflip_identity
from .desev import desev_trace, group_levels
from .graph import CkParams, WeightedGraph, ck_generate, pseudo_boolean_y, verify_theorem_5_1
from .hamiltonian import AnnealSystem, apply, minus_energy_constant, minus_energy_label
from .spectra import dense_oracle_spectrum, lowest_eigenpairs


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4, w_range=(0.5, 2.0),
                 J_offset: float | None = 1.0, J: float = 2.0) -> WeightedGraph:
    """Erdos-Renyi graph with uniform random weights.

    ``J_offset`` sets every coupling to ``min(c_i, c_j) + J_offset``;
    ``None`` uses the constant ``J``.
    """
    weights = rng.uniform(*w_range, size=n)
    edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < p]
    if J_offset is None:
        couplings = [J] * len(edges)
    else:
        couplings = [min(weights[u], weights[v]) + J_offset for u, v in edges]
    return WeightedGraph.from_edges(weights, edges, couplings=couplings)


def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failed check
        return name, False, f"{type(exc).__name__}: {exc}"
    return name, bool(ok), detail


def run_checks(seed: int = 2024, jobs: int | None = 1) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    graphs = [random_graph(rng, int(rng.integers(3, 9))) for _ in range(6)]
    systems = [AnnealSystem.from_graph(g) for g in graphs]

    def theorem():
        ok = all(verify_theorem_5_1(g) for g in graphs)
        return ok, f"{len(graphs)} random graphs"

    def symmetry():
        worst = 0.0
        for S in systems:
            for _ in range(5):
                u, v, s = rng.standard_normal(S.dim), rng.standard_normal(S.dim), rng.random()
                worst = max(worst, abs(u @ apply(S, s, v) - v @ apply(S, s, u)) / (np.linalg.norm(u) * np.linalg.norm(v)))
        return worst <= 1e-12, f"max asymmetry {worst:.1e}"

    def labels():
        worst = 0.0
        for S, g in zip(systems, graphs):
            const = minus_energy_constant(S.ising)
            for x in range(S.dim):
                y = minus_energy_label(S, x)
                bits = [1 - ((x >> i) & 1) for i in range(S.n)]
                worst = max(worst, abs(y - pseudo_boolean_y(g, bits)), abs(y - (const - S.diag[x] / 4)))
        return worst <= 1e-10, f"max deviation {worst:.1e}"

    def oracle():
        worst = 0.0
        for S in systems:
            for s in rng.random(3):
                dense = dense_oracle_spectrum(S, s)[:4]
                m = min(4, S.dim)
                worst = max(worst, np.max(np.abs(lowest_eigenpairs(S, s, m).values - dense[:m])))
        return worst <= 1e-10, f"max |Krylov - dense| {worst:.1e}"

    def endpoints():
        bad = []
        for S in systems:
            if abs(lowest_eigenpairs(S, 0.0, 1).values[0] + S.n) > 1e-10:
                bad.append("s=0")
            if abs(lowest_eigenpairs(S, 1.0, 1).values[0] - S.diag.min()) > 1e-10:
                bad.append("s=1")
        return not bad, "E0(0) = -n, E0(1) = min diag" if not bad else ", ".join(bad)

    def bitflip():
        worst = 0.0
        for S in systems[:3]:
            for s in rng.uniform(0.05, 1.0, 3):
                worst = max(worst, verify_bitflip_identity(S, s) / (abs(S.diag).max() + S.n))
        return worst <= 1e-9, f"max relative residual {worst:.1e}"

    def desev():
        graph, part = ck_generate(CkParams(2, 2, 1.0, 1.5))
        S = AnnealSystem.from_graph(graph, 1, part)
        levels = group_levels(S)
        tr = desev_trace(S, levels, [0.0, 0.5, 1.0], "ground", jobs=jobs)
        start = np.max(np.abs(tr.gamma[:, 0] - levels.degeneracy / S.dim))
        ok = tr.normalization_error <= 1e-9 and start <= 1e-9 and abs(tr.gamma[0, -1] - 1) <= 1e-9
        return ok, f"normalization {tr.normalization_error:.1e}, s=0 deviation {start:.1e}"

    checks = [("mis-recovery", theorem), ("apply-symmetry", symmetry), ("minus-energy", labels),
              ("dense-oracle", oracle), ("endpoints", endpoints), ("bitflip-identity", bitflip),
              ("desev-normalization", desev)]
    return [_check(name, fn) for name, fn in checks]
