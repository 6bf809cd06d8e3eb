from __future__ import annotations

import json

import numpy as np
import pytest

from aqcgap.errors import DegenerateGapError, InputError
from aqcgap.graph import CkParams, WeightedGraph, ck_generate
from aqcgap.hamiltonian import AnnealSystem
from aqcgap.spectra import (dense_matrix, dense_oracle_spectrum, gap, golden_section, lowest_eigenpairs,
                            refine_min_gap, sample_point, scan_gap, uniform_grid, write_gap_scan)
from aqcgap.verify import random_graph

from helpers import basis_index, rel_err, scan, system


def test_oracle_random_graph(rng):
    S = AnnealSystem.from_graph(random_graph(rng, 8))
    for s in (0.05, 0.37, 0.81):
        dense = dense_oracle_spectrum(S, s)
        sol = lowest_eigenpairs(S, s, 2)
        assert np.allclose(sol.values, dense[:2], atol=1e-10, rtol=0)


def test_multiplicity_counted():
    # CK(2,2) has a degenerate excited manifold by symmetry
    graph, part = ck_generate(CkParams(2, 2, 1.0, 1.5))
    S = AnnealSystem.from_graph(graph, 1, part)
    for s in (0.2, 0.5, 0.9):
        dense = dense_oracle_spectrum(S, s)
        sol = lowest_eigenpairs(S, s, 6)
        assert np.allclose(sol.values, dense[:6], atol=1e-10, rtol=0)
        # eigenvectors: orthonormal with small residuals
        V = sol.vectors
        assert np.allclose(V.T @ V, np.eye(6), atol=1e-10)
        H = dense_matrix(S, s)
        assert np.max(np.abs(H @ V - V * sol.values)) < 1e-9


def test_endpoints_exact():
    S = system()
    start = lowest_eigenpairs(S, 0.0, 2)
    assert start.values[0] == pytest.approx(-15.0, abs=1e-10)
    assert start.values[1] - start.values[0] == pytest.approx(2.0)
    end = sample_point(S, 1.0)
    # levels 6 and 5.4 of the (-)energy, 4 units of energy per unit
    assert end.gap == pytest.approx(2.4)
    assert end.E0 == pytest.approx(S.diag.min())


def test_endpoint_matrix_element_limit():
    S = system()
    # continuity: M at s=0 equals the limit of interior values
    at_zero = sample_point(S, 0.0).M
    near = sample_point(S, 1e-5, 1e-12).M
    assert at_zero == pytest.approx(near, rel=1e-3)


def test_input_checks():
    S = system()
    with pytest.raises(InputError):
        lowest_eigenpairs(S, 0.5, 0)
    with pytest.raises(InputError):
        lowest_eigenpairs(S, -0.1, 2)
    with pytest.raises(InputError):
        scan_gap(S, [0.0, 0.5])
    with pytest.raises(InputError):
        scan_gap(S, [0.1, 0.5, 1.0])


def test_golden_section():
    x, fx, seen = golden_section(lambda s: (s - 0.3141592) ** 2, 0.0, 1.0, 1e-9)
    assert abs(x - 0.3141592) < 1e-8
    assert fx < 1e-16
    assert len(seen) < 60


def test_refine_with_function():
    s_star, f = refine_min_gap(None, (0.0, 0.5, 1.0), 1e-10, func=lambda s: abs(s - 0.7) + 1)
    assert s_star == pytest.approx(0.7, abs=1e-9)
    with pytest.raises(InputError):
        refine_min_gap(None, (0.0, 0.1, 1.0), func=lambda s: s)


def test_gap_point_wb15():
    graph, part = ck_generate(CkParams(3, 3, 1.0, 1.5))
    S = AnnealSystem.from_graph(graph, 1, part)
    assert rel_err(gap(S, 0.3805).gap, 2.04e-2) < 0.02


def test_gap_point_k10():
    assert rel_err(gap(system(1.8, 10), 0.667731).gap, 1.45e-1) < 0.01


def test_degenerate_final_levels_raise():
    # two equally heavy maximum sets make the final gap vanish
    S = AnnealSystem.from_graph(WeightedGraph.from_edges([1.0, 1.0], [(0, 1)], J=1.5))
    with pytest.raises(DegenerateGapError) as info:
        scan_gap(S, uniform_grid(9), jobs=1)
    assert info.value.interval[1] == 1.0
    assert len(info.value.scan.samples) == 9


def test_small_scan_worker_independence(tmp_path):
    graph, part = ck_generate(CkParams(2, 2, 1.0, 1.5))
    S = AnnealSystem.from_graph(graph, 1, part)
    one = scan_gap(S, uniform_grid(17), jobs=1)
    two = scan_gap(S, uniform_grid(17), jobs=2)
    assert one.s_star == two.s_star
    for a, b in zip(one.all_samples(), two.all_samples()):
        assert a.s == b.s
        assert abs(a.gap - b.gap) <= 1e-12 and abs(a.M - b.M) <= 1e-12

    # the dense oracle agrees with the refined minimum
    dense = dense_oracle_spectrum(S, one.s_star)
    assert one.g_min == pytest.approx(dense[1] - dense[0], abs=1e-10)

    paths = [write_gap_scan(one, tmp_path / f"g{i}.csv") for i in range(2)]
    assert (tmp_path / "g0.csv").read_bytes() == (tmp_path / "g1.csv").read_bytes()
    side = json.loads(paths[0].read_text())
    assert side["s_star"] == one.s_star and side["grid"]["count"] == 17
    header, first = (tmp_path / "g0.csv").read_text().splitlines()[:2]
    assert header == "s,E0,E1,gap,M"
    assert first.startswith("0,-8,-6,2,")


@pytest.mark.slow
def test_scan_k1():
    sc = scan(1.8, 1)
    assert abs(sc.s_star - 0.62763727) <= 1e-6
    assert rel_err(sc.g_min, 1.04e-5) < 0.02
    assert len(sc.samples) == 257
    assert sc.bracket[0] < sc.s_star < sc.bracket[1]


@pytest.mark.slow
def test_scan_k10():
    sc = scan(1.8, 10)
    assert abs(sc.s_star - 0.66773072) <= 1e-6
    assert rel_err(sc.g_min, 1.45e-1) < 0.01


@pytest.mark.slow
def test_scan_k50():
    sc = scan(1.8, 50)
    assert abs(sc.s_star - 0.99779592) <= 1e-4
    assert rel_err(sc.g_min, 4.79e-2) < 0.01


@pytest.mark.parametrize("w_B", [1.2, 1.8])
def test_ground_state_near_end_is_mis(w_B):
    S = system(w_B, 1)
    v = lowest_eigenpairs(S, 0.999, 1).vectors[:, 0]
    assert v[basis_index(range(6), 15)] ** 2 >= 0.999


@pytest.mark.slow
def test_refinement_independent_of_grid():
    coarse = scan_gap(system(1.8, 10), uniform_grid(129), tol=1e-10, s_tol=1e-9, jobs=1)
    fine = scan(1.8, 10)
    assert coarse.g_min == pytest.approx(fine.g_min, rel=1e-9)
    # halving the grid step near the minimum barely moves the unrefined minimum
    coarse_min = min(p.gap for p in coarse.samples)
    fine_min = min(p.gap for p in fine.samples)
    assert abs(coarse_min - fine_min) / fine_min < 0.01
    # the gap is flat to ~1e-12 over a few 1e-7 in s here, below what the eigenvalues resolve
    assert abs(coarse.s_star - fine.s_star) <= 1e-9
