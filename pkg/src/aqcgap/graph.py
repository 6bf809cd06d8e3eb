"""Vertex-weighted graphs, the CK construction and brute-force MIS oracles.

Vertices are dense integers ``0..n-1``. A bit-vector ``x`` passed to the
combinatorial functions is a selection indicator: ``x[i] == 1`` means vertex
``i`` is in the set.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CouplingConditionError, EnumerationLimitError, InputError

DEFAULT_J = 2.0
MAX_ENUMERATION_N = 24
MAX_THEOREM_N = 20
_CHUNK_BITS = 18


def parse_number(value) -> float:
    """Accept ints, floats and rational strings such as ``"9/5"``."""
    if isinstance(value, bool):
        raise InputError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a number or rational: {value!r}") from exc
    raise InputError(f"not a number: {value!r}")


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with positive vertex weights and edge couplings."""

    n: int
    weights: np.ndarray
    edges: tuple[tuple[int, int], ...]
    couplings: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).copy()
        couplings = np.asarray(self.couplings, dtype=float).copy()
        if self.n < 1:
            raise InputError("graph needs at least one vertex")
        if weights.shape != (self.n,):
            raise InputError(f"expected {self.n} weights, got {weights.shape}")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise InputError("vertex weights must be positive")
        edges = []
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise InputError(f"self-loop on vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InputError(f"edge ({u},{v}) references a vertex outside 0..{self.n - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError(f"duplicate edge {key}")
            seen.add(key)
            edges.append(key)
        if couplings.shape != (len(edges),):
            raise InputError(f"expected {len(edges)} couplings, got {couplings.shape}")
        if np.any(~np.isfinite(couplings)) or np.any(couplings <= 0):
            raise InputError("edge couplings must be positive")
        weights.setflags(write=False)
        couplings.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "edges", tuple(edges))

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (self.n == other.n and self.edges == other.edges
                and np.array_equal(self.weights, other.weights) and np.array_equal(self.couplings, other.couplings))

    __hash__ = None

    @classmethod
    def from_edges(cls, weights: Sequence[float], edges: Iterable[tuple[int, int]],
                   J: float = DEFAULT_J, couplings: Sequence[float] | None = None) -> "WeightedGraph":
        edges = [tuple(e) for e in edges]
        if couplings is None:
            couplings = [J] * len(edges)
        return cls(len(weights), np.asarray(weights, dtype=float), tuple(edges), np.asarray(couplings, dtype=float))

    @property
    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self, i: int) -> list[int]:
        return sorted({v for u, v in self.edges if u == i} | {u for u, v in self.edges if v == i})

    def coupling_sums(self) -> np.ndarray:
        """Per-vertex sum of incident couplings."""
        out = np.zeros(self.n)
        for (u, v), j in zip(self.edges, self.couplings):
            out[u] += j
            out[v] += j
        return out

    def is_independent(self, vertices: Iterable[int]) -> bool:
        chosen = set(vertices)
        return not any(u in chosen and v in chosen for u, v in self.edges)


@dataclass(frozen=True)
class CkParams:
    r: int
    g: int
    w_A: float = 1.0
    w_B: float = 1.8

    def __post_init__(self):
        for name in ("r", "g"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 2:
                raise InputError(f"{name} must be an integer >= 2, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("w_A", "w_B"):
            value = parse_number(getattr(self, name))
            if not value > 0:
                raise InputError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def va_is_unique_max(self) -> bool:
        """True when V_A is the unique maximum-weight independent set."""
        return self.w_B < 2 * self.w_A

    @property
    def n(self) -> int:
        return 2 * self.g + self.r * self.g

    def to_dict(self) -> dict:
        return {"r": self.r, "g": self.g, "w_A": self.w_A, "w_B": self.w_B}


@dataclass(frozen=True)
class VertexPartition:
    """Vertex classes ``"A"`` (the 2g-independent set) or ``"B"`` (clique vertices).

    ``groups[i]`` is the group label of a V_A vertex or the clique label of a
    V_B vertex.
    """

    classes: tuple[str, ...]
    groups: tuple[int, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.classes) != len(self.groups):
            raise InputError("partition classes and groups differ in length")
        if any(c not in ("A", "B") for c in self.classes):
            raise InputError("partition classes must be 'A' or 'B'")

    @property
    def n(self) -> int:
        return len(self.classes)

    def members(self, cls: str) -> list[int]:
        return [i for i, c in enumerate(self.classes) if c == cls]

    def cliques(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, (c, grp) in enumerate(zip(self.classes, self.groups)):
            if c == "B":
                out.setdefault(grp, []).append(i)
        return out


def ck_generate(params: CkParams, J: float = DEFAULT_J) -> tuple[WeightedGraph, VertexPartition]:
    """Build the CK graph for ``params`` with uniform coupling ``J``.

    V_A comes first (group-major, two vertices per group), then V_B
    (clique-major). Every V_A group is joined to every clique except the one
    carrying its own label.
    """
    r, g = params.r, params.g
    n_a = 2 * g
    weights = [params.w_A] * n_a + [params.w_B] * (r * g)
    classes = ["A"] * n_a + ["B"] * (r * g)
    groups = [i // 2 for i in range(n_a)] + [c for c in range(g) for _ in range(r)]

    edges = []
    for c in range(g):
        base = n_a + c * r
        edges.extend((base + a, base + b) for a, b in itertools.combinations(range(r), 2))
    for ga in range(g):
        for c in range(g):
            if c == ga:
                continue
            for a in (2 * ga, 2 * ga + 1):
                edges.extend((a, n_a + c * r + b) for b in range(r))

    graph = WeightedGraph.from_edges(weights, edges, J=J)
    return graph, VertexPartition(tuple(classes), tuple(groups), meta={"ck": params.to_dict()})


def pseudo_boolean_y(graph: WeightedGraph, x: Sequence[int]) -> float:
    """MIS objective: total selected weight minus coupling of every selected edge."""
    x = np.asarray(x, dtype=float)
    if x.shape != (graph.n,):
        raise InputError(f"bit-vector length {x.shape} does not match n={graph.n}")
    if graph.edges:
        e = graph.edge_array
        penalty = float(np.sum(graph.couplings * x[e[:, 0]] * x[e[:, 1]]))
    else:
        penalty = 0.0
    return float(graph.weights @ x) - penalty


def _bits(masks: np.ndarray, n: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def _lex_key(mask: int, n: int) -> tuple[int, ...]:
    return tuple((mask >> i) & 1 for i in range(n))


def _argmax_enumeration(graph: WeightedGraph, independent_only: bool) -> tuple[float, int]:
    """Maximise Y (or the independent-set weight) over all 2^n masks.

    Chunks are reduced independently; ties are resolved after the reduction
    so the winner does not depend on the chunking.
    """
    n = graph.n
    total = 1 << n
    chunk = 1 << min(n, _CHUNK_BITS)
    e = graph.edge_array
    candidates: list[tuple[float, int]] = []
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = _bits(masks, n)
        values = bits @ graph.weights
        if len(e):
            both = bits[:, e[:, 0]] & bits[:, e[:, 1]]
            if independent_only:
                values = np.where(both.any(axis=1), -np.inf, values)
            else:
                values = values - both @ graph.couplings
        best = values.max()
        tol = 1e-9 * max(1.0, abs(best))
        for idx in np.flatnonzero(values >= best - tol):
            candidates.append((float(values[idx]), int(masks[idx])))
    best = max(v for v, _ in candidates)
    tol = 1e-9 * max(1.0, abs(best))
    winners = [m for v, m in candidates if v >= best - tol]
    mask = min(winners, key=lambda m: _lex_key(m, n))
    return best, mask


def _mask_to_vertices(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if (mask >> i) & 1)


def brute_force_mis(graph: WeightedGraph) -> tuple[float, tuple[int, ...]]:
    """Maximum-weight independent set by exhaustive enumeration.

    Ties go to the lexicographically smallest indicator vector
    ``(x_0, ..., x_{n-1})``.
    """
    if graph.n > MAX_ENUMERATION_N:
        raise EnumerationLimitError(f"n={graph.n} exceeds enumeration bound {MAX_ENUMERATION_N}")
    weight, mask = _argmax_enumeration(graph, independent_only=True)
    return weight, _mask_to_vertices(mask, graph.n)


def max_pseudo_boolean(graph: WeightedGraph) -> tuple[float, tuple[int, ...]]:
    """Maximum of ``pseudo_boolean_y`` and the support of its maximiser."""
    if graph.n > MAX_ENUMERATION_N:
        raise EnumerationLimitError(f"n={graph.n} exceeds enumeration bound {MAX_ENUMERATION_N}")
    value, mask = _argmax_enumeration(graph, independent_only=False)
    return value, _mask_to_vertices(mask, graph.n)


def coupling_violations(graph: WeightedGraph, scale: float = 1.0) -> list[tuple[int, int, float, float]]:
    """Edges where ``J_ij <= min(c_i, c_j) / scale``."""
    out = []
    for (u, v), j in zip(graph.edges, graph.couplings):
        m = min(graph.weights[u], graph.weights[v]) / scale
        if not j > m:
            out.append((u, v, float(j), float(m)))
    return out


def verify_theorem_5_1(graph: WeightedGraph) -> bool:
    """Check that maximising Y recovers the MIS (value and set).

    Raises CouplingConditionError when some edge has ``J_ij <= min(c_i, c_j)``.
    """
    violations = coupling_violations(graph)
    if violations:
        raise CouplingConditionError(violations)
    if graph.n > MAX_THEOREM_N:
        raise EnumerationLimitError(f"n={graph.n} exceeds bound {MAX_THEOREM_N}")
    y_max, y_set = max_pseudo_boolean(graph)
    mis_weight, mis_set = brute_force_mis(graph)
    tol = 1e-9 * max(1.0, abs(mis_weight))
    return y_set == mis_set and abs(y_max - mis_weight) <= tol


def count_one_per_clique_maximal_sets(graph: WeightedGraph, partition: VertexPartition) -> int:
    """Count maximal independent sets that take exactly one vertex per clique and nothing from V_A."""
    cliques = list(partition.cliques().values())
    count = 0
    for choice in itertools.product(*cliques):
        if not graph.is_independent(choice):
            continue
        chosen = set(choice)
        maximal = all(
            any((min(i, j), max(i, j)) in set(graph.edges) for j in chosen)
            for i in range(graph.n) if i not in chosen
        )
        count += maximal
    return count


# -- JSON file format -------------------------------------------------------

def graph_to_dict(graph: WeightedGraph, partition: VertexPartition | None = None,
                  default_J: float | None = None) -> dict:
    if default_J is None:
        values, counts = np.unique(graph.couplings, return_counts=True)
        default_J = float(values[np.argmax(counts)]) if len(values) else DEFAULT_J
    edges = []
    for (u, v), j in zip(graph.edges, graph.couplings):
        item = {"u": u, "v": v}
        if j != default_J:
            item["J"] = float(j)
        edges.append(item)
    doc = {
        "n": graph.n,
        "vertices": [{"id": i, "weight": float(w)} for i, w in enumerate(graph.weights)],
        "edges": edges,
        "default_J": float(default_J),
    }
    if partition is not None:
        if "ck" in partition.meta:
            doc["ck"] = dict(partition.meta["ck"])
        doc["partition"] = {"classes": list(partition.classes), "groups": list(partition.groups)}
    return doc


def graph_from_dict(doc: dict) -> tuple[WeightedGraph, VertexPartition | None]:
    try:
        n = int(doc["n"])
        vertices = doc["vertices"]
        edge_items = doc.get("edges", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed graph document: {exc}") from exc
    default_J = parse_number(doc.get("default_J", DEFAULT_J))
    weights = [None] * n
    for item in vertices:
        i = int(item["id"])
        if not 0 <= i < n or weights[i] is not None:
            raise InputError(f"vertex id {i} out of range or repeated")
        weights[i] = parse_number(item["weight"])
    if any(w is None for w in weights):
        raise InputError("vertex ids must cover 0..n-1")
    edges, couplings = [], []
    for item in edge_items:
        edges.append((int(item["u"]), int(item["v"])))
        couplings.append(parse_number(item["J"]) if item.get("J") is not None else default_J)
    graph = WeightedGraph.from_edges(weights, edges, couplings=couplings)

    partition = None
    if "partition" in doc:
        part = doc["partition"]
        meta = {"ck": CkParams(**doc["ck"]).to_dict()} if "ck" in doc else {}
        partition = VertexPartition(tuple(part["classes"]), tuple(int(g) for g in part["groups"]), meta=meta)
        if partition.n != n:
            raise InputError("partition does not cover every vertex")
    elif "ck" in doc:
        _, partition = ck_generate(CkParams(**doc["ck"]), J=default_J)
    return graph, partition


def save_graph(path, graph: WeightedGraph, partition: VertexPartition | None = None) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph, partition), indent=2) + "\n")


def load_graph(path) -> tuple[WeightedGraph, VertexPartition | None]:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"graph file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"graph file is not valid JSON: {exc}") from exc
    return graph_from_dict(doc)
