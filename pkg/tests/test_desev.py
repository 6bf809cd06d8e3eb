from __future__ import annotations

import json
from math import comb

import numpy as np
import pytest

from aqcgap.desev import (BULLET, TRIANGLE, desev_point, desev_trace, eigen_cluster, format_state_label, gamma,
                          group_levels, level_text, minus_energies_direct, state_pattern, write_desev, zoom_cluster)
from aqcgap.errors import InputError
from aqcgap.graph import CkParams, ck_generate
from aqcgap.hamiltonian import AnnealSystem
from aqcgap.spectra import dense_matrix

from helpers import basis_index, ck, system


@pytest.fixture(scope="module")
def levels_k1():
    return group_levels(system(1.8, 1))


def test_level_values_k1(levels_k1):
    assert levels_k1.labels[:7] == ["6", "5.4", "5.2", "5", "4.8", "4", "3.8"]
    assert levels_k1.degeneracy.sum() == 2**15


def test_level_degeneracies_k1(levels_k1):
    # counted by hand on the CK(3,3) structure, independent of the enumeration
    expected = [
        1,  # V_A itself
        3**3,  # one vertex per clique
        3 * 3 * 3**2,  # one clique contributes an adjacent pair, the others one vertex
        3 * 3**2 * 3 + comb(6, 5),  # two cliques contribute pairs, or five V_A vertices
        3**3,  # a pair from every clique
        comb(6, 4),  # four V_A vertices
        3 * 3,  # both vertices of one V_A group plus one vertex of its own clique
    ]
    assert list(levels_k1.degeneracy[:7]) == expected


def test_level_labels_k10():
    levels = group_levels(system(1.8, 10))
    assert levels.labels[:7] == ["6/k", "5.4/k", "5/k", "4/k", "3.8/k", "3.6/k", "3/k"]
    assert levels.values[1] == pytest.approx(0.54)


def test_level_text():
    assert level_text(5.4, 1) == "5.4"
    assert level_text(0.54, 10) == "5.4/k"


def test_direct_minus_energies_match_diagonal():
    S = system(1.8, 10)
    assert np.allclose(minus_energies_direct(S), S.minus_energies(), atol=1e-12)


def test_grouping_tolerance(levels_k1):
    with pytest.raises(InputError):
        group_levels(system(), 0.0)
    coarse = group_levels(system(), 0.25)
    assert len(coarse) < len(levels_k1)


def test_state_labels():
    _, part = ck()
    assert format_state_label(basis_index(range(6), 15), part) == BULLET * 6
    assert format_state_label(basis_index([6, 9, 12], 15), part) == TRIANGLE * 3
    two = basis_index([6, 7, 9, 12], 15)
    assert format_state_label(two, part) == f"{TRIANGLE}-{TRIANGLE}{TRIANGLE}{TRIANGLE}"
    assert state_pattern(two, part) == f"{TRIANGLE}{TRIANGLE}{TRIANGLE}-{TRIANGLE}"
    assert format_state_label(basis_index([0, 1, 6], 15), part) == BULLET * 2 + TRIANGLE


def test_gamma_checks(levels_k1):
    with pytest.raises(InputError):
        gamma(np.ones(5), levels_k1)
    with pytest.raises(InputError):
        gamma(np.ones(2**15), levels_k1)
    e = np.zeros(2**15)
    e[basis_index(range(6), 15)] = 1.0
    assert gamma(e, levels_k1)[0] == 1.0


def test_trace_small_against_dense():
    graph, part = ck_generate(CkParams(2, 2, 1.0, 1.5))
    S = AnnealSystem.from_graph(graph, 1, part)
    levels = group_levels(S)
    tr = desev_trace(S, levels, [0.0, 0.3, 0.6, 1.0], "ground", jobs=1)
    assert tr.normalization_error < 1e-12
    assert np.allclose(tr.gamma[:, 0], levels.degeneracy / S.dim, atol=1e-12)
    w, V = np.linalg.eigh(dense_matrix(S, 0.6))
    dense = np.bincount(levels.membership, weights=V[:, 0] ** 2, minlength=len(levels))
    assert np.allclose(tr.gamma[:, 2], dense, atol=1e-10)
    assert tr.gamma[0, -1] == pytest.approx(1.0)


def test_first_excited_cluster_at_ends():
    S = system()
    sol, lo, hi = eigen_cluster(S, 0.0, 1)
    assert (lo, hi) == (1, 15)
    point = desev_point(S, 1.0, 1, group_levels(S).membership, 40)
    assert point.cluster_dim == 27
    assert point.gamma[1] == pytest.approx(1.0)


def test_trace_validation(levels_k1):
    S = system()
    with pytest.raises(InputError):
        desev_trace(S, levels_k1, [0.5], "second")
    with pytest.raises(InputError):
        desev_trace(S, levels_k1, [0.5], top_m=0)
    with pytest.raises(InputError):
        desev_trace(S, levels_k1, [0.5], zoom=(0.7, 0.6))


def test_zoom_cluster():
    pts = zoom_cluster(0.5, 33)
    assert len(pts) == 33 and pts[16] == 0.5
    assert np.all(np.diff(pts) > 0)
    assert zoom_cluster(0.999, 33).max() <= 1.0


def test_write_desev(tmp_path):
    graph, part = ck_generate(CkParams(2, 2, 1.0, 1.5))
    S = AnnealSystem.from_graph(graph, 1, part)
    levels = group_levels(S)
    tr = desev_trace(S, levels, [0.0, 0.5, 1.0], "ground", top_m=3, jobs=1)
    legend = write_desev(tr, S, part, tmp_path / "d.csv")
    rows = (tmp_path / "d.csv").read_text().splitlines()
    assert rows[0] == "s," + ",".join(levels.labels[:3])
    assert len(rows) == 4
    doc = json.loads(legend.read_text())
    assert [lv["degeneracy"] for lv in doc["levels"]] == list(levels.degeneracy[:3])
    assert doc["levels"][0]["patterns"][0]["pattern"] == BULLET * 4
