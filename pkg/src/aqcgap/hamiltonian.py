"""MIS to Ising reduction and the matrix-free interpolated Hamiltonian.

Basis convention: bit ``i`` of a basis index ``x`` is the computational
value of qubit ``i``. A 0 bit is the sigma_z = +1 eigenstate and marks vertex
``i`` as selected, so the spin is ``s_i = 1 - 2 * bit_i(x)``. With this choice
the zero positions of the ground state at s=1 list the MIS vertices, and
the all-ones index is the empty set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .errors import ConvergenceError, InputError
from .graph import WeightedGraph, coupling_violations, parse_number
from .lanczos import lanczos_lowest

MAX_QUBITS = 24
_DIAG_CHUNK = 1 << 16


@dataclass(frozen=True)
class IsingModel:
    """Diagonal problem Hamiltonian ``sum h_i Z_i + sum J_ij Z_i Z_j``."""

    n: int
    h: np.ndarray
    edges: np.ndarray  # (m, 2) int
    J: np.ndarray
    k: float
    c: np.ndarray
    k_text: str = "1"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "J": [float(j) for j in self.J],
            "h": [float(v) for v in self.h],
        }


def _k_text(k) -> str:
    if isinstance(k, str):
        return k.strip()
    frac = Fraction(k).limit_denominator(10**6)
    return str(frac) if float(frac) == float(k) else repr(float(k))


def mis_to_ising(graph: WeightedGraph, k=1.0) -> IsingModel:
    """Ising fields for the k-scaled MIS objective.

    ``h_i = sum_{j in nbr(i)} J_ij - 2 c_i / k``; couplings are unchanged.
    Warns when some edge has ``J_ij <= min(c_i, c_j) / k``.
    """
    k_value = parse_number(k)
    if not k_value >= 1:
        raise InputError(f"scaling factor k must be >= 1, got {k!r}")
    violations = coupling_violations(graph, scale=k_value)
    if violations:
        warnings.warn(
            f"{len(violations)} edge(s) violate J_ij > min(c_i, c_j)/k; the Ising ground state may not encode the MIS",
            RuntimeWarning,
            stacklevel=2,
        )
    h = graph.coupling_sums() - 2.0 * graph.weights / k_value
    arrays = [h, graph.edge_array.copy(), np.array(graph.couplings, dtype=float), np.array(graph.weights, dtype=float)]
    for a in arrays:
        a.setflags(write=False)
    return IsingModel(graph.n, arrays[0], arrays[1], arrays[2], k_value, arrays[3], _k_text(k))


def spins(x: np.ndarray, n: int) -> np.ndarray:
    """Spin values ``1 - 2*bit`` for an array of basis indices, shape (len(x), n)."""
    bits = (np.asarray(x, dtype=np.int64)[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.float64)


def ising_energies(ising: IsingModel, x: np.ndarray) -> np.ndarray:
    z = spins(x, ising.n)
    energy = z @ ising.h
    if len(ising.edges):
        energy += (z[:, ising.edges[:, 0]] * z[:, ising.edges[:, 1]]) @ ising.J
    return energy


@njit(cache=True)
def _apply_kernel(diag, v, s, n, out):
    t = 1.0 - s
    for x in range(v.shape[0]):
        acc = 0.0
        for b in range(n):
            acc += v[x ^ (1 << b)]
        out[x] = s * diag[x] * v[x] - t * acc


@njit(cache=True)
def _flip_sum_kernel(v, n, out):
    for x in range(v.shape[0]):
        acc = 0.0
        for b in range(n):
            acc += v[x ^ (1 << b)]
        out[x] = acc


def check_s(s) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise InputError(f"s must lie in [0, 1], got {s!r}")
    return s


@dataclass
class AnnealSystem:
    """``H(s) = (1-s) H_init + s H_problem`` on ``2^n`` basis states, never materialised."""

    ising: IsingModel
    graph: WeightedGraph | None = None
    partition: object | None = None
    diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.ising.n
        if n > MAX_QUBITS:
            raise InputError(f"n={n} exceeds the supported {MAX_QUBITS} qubits")
        dim = 1 << n
        diag = np.empty(dim)
        for start in range(0, dim, _DIAG_CHUNK):
            idx = np.arange(start, min(start + _DIAG_CHUNK, dim), dtype=np.int64)
            diag[start : start + len(idx)] = ising_energies(self.ising, idx)
        diag.setflags(write=False)
        self.diag = diag
        self._diag_absmax = float(np.max(np.abs(diag)))

    @classmethod
    def from_graph(cls, graph: WeightedGraph, k=1.0, partition=None) -> "AnnealSystem":
        return cls(mis_to_ising(graph, k), graph, partition)

    @property
    def n(self) -> int:
        return self.ising.n

    @property
    def dim(self) -> int:
        return 1 << self.ising.n

    @property
    def k(self) -> float:
        return self.ising.k

    def norm_bound(self, s: float) -> float:
        """Triangle-inequality upper bound on ``||H(s)||``."""
        return s * self._diag_absmax + (1.0 - s) * self.n

    def apply(self, s: float, v: np.ndarray) -> np.ndarray:
        return apply(self, s, v)

    def matvec(self, s: float):
        s = check_s(s)
        diag, n = self.diag, self.n

        def mv(v):
            out = np.empty_like(v)
            _apply_kernel(diag, v, s, n, out)
            return out

        return mv

    def flip_sum(self, v: np.ndarray) -> np.ndarray:
        """``sum_b sigma_x^b v``, that is ``-H_init v``."""
        v = self._check_vector(v)
        out = np.empty_like(v)
        _flip_sum_kernel(v, self.n, out)
        return out

    def dH(self, v: np.ndarray) -> np.ndarray:
        """``(H_problem - H_init) v``, the s-derivative of ``H(s)`` applied to ``v``."""
        v = self._check_vector(v)
        return self.diag * v + self.flip_sum(v)

    def _check_vector(self, v) -> np.ndarray:
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise InputError(f"state vector has shape {v.shape}, expected ({self.dim},)")
        return v

    def minus_energies(self) -> np.ndarray:
        """(-)energy of every basis state via the affine map from the diagonal."""
        return minus_energy_constant(self.ising) - self.diag / 4.0

    def to_dict(self) -> dict:
        meta = self.ising.to_dict()
        meta["k_text"] = self.ising.k_text
        return meta


def apply(system: AnnealSystem, s: float, v: np.ndarray) -> np.ndarray:
    """Return ``H(s) v``."""
    s = check_s(s)
    v = system._check_vector(v)
    out = np.empty_like(v)
    _apply_kernel(system.diag, v, s, system.n, out)
    return out


def minus_energy_constant(ising: IsingModel) -> float:
    return float(np.sum(ising.c) / (2.0 * ising.k) - np.sum(ising.J) / 4.0)


def minus_energy_label(system: AnnealSystem, x: int) -> float:
    """Y of basis state ``x`` with weights ``c_i / k``, evaluated directly on the selection bits."""
    x = int(x)
    if not 0 <= x < system.dim:
        raise InputError(f"basis index {x} outside 0..{system.dim - 1}")
    ising = system.ising
    sel = 1.0 - ((x >> np.arange(ising.n)) & 1)
    value = float(ising.c @ sel) / ising.k
    if len(ising.edges):
        value -= float(np.sum(ising.J * sel[ising.edges[:, 0]] * sel[ising.edges[:, 1]]))
    return value


@dataclass
class NormSummary:
    value: float
    s: float
    endpoints: tuple[float, float]
    grid_values: np.ndarray | None = None


def spectral_norm(system: AnnealSystem, s: float, tol: float = 1e-10) -> float:
    """Largest absolute eigenvalue of ``H(s)``.

    Both ends of the spectrum are found by Lanczos (the top end as the
    bottom of ``-H``). The endpoints are exact: ``n`` at s=0, ``max|diag|``
    at s=1.
    """
    s = check_s(s)
    if s == 0.0:
        return float(system.n)
    if s == 1.0:
        return system._diag_absmax
    mv = system.matvec(s)
    scale = system.norm_bound(s)
    try:
        low = lanczos_lowest(mv, system.dim, 1, tol=tol, scale=scale, seed=0)
        high = lanczos_lowest(lambda v: -mv(v), system.dim, 1, tol=tol, scale=scale, seed=0)
    except ConvergenceError as exc:
        raise ConvergenceError(f"spectral norm at s={s}: {exc}", exc.residuals, exc.iterations) from exc
    return float(max(abs(low.values[0]), abs(high.values[0])))


def max_spectral_norm(system: AnnealSystem, grid, exhaustive: bool = False, tol: float = 1e-10) -> NormSummary:
    """Maximum of ``||H(s)||`` over ``grid`` (which must contain 0 and 1).

    ``||H(s)||`` is a convex function of s (a norm of an affine matrix
    path), so its maximum over [0, 1] sits at an endpoint and the grid
    maximum equals the endpoint maximum. ``exhaustive=True`` evaluates every
    grid point anyway.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or grid.min() != 0.0 or grid.max() != 1.0:
        raise InputError("grid must include both endpoints 0 and 1")
    ends = (spectral_norm(system, 0.0), spectral_norm(system, 1.0))
    values = None
    if exhaustive:
        values = np.array([spectral_norm(system, s, tol) for s in grid])
        i = int(np.argmax(values))
        return NormSummary(float(values[i]), float(grid[i]), ends, values)
    i = int(np.argmax(ends))
    return NormSummary(ends[i], float(i), ends)
