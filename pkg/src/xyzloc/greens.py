"""Generalised Green's functions, two ways.

The oracle route solves (zI - H) directly and slices the block.  The path-sum
route never touches the full resolvent: the diagonal block at a vertex is
[zI - H_alpha - Sigma]^-1 with the self-energy Sigma summed over all simple
cycles off the vertex, each cycle weighted by its flip blocks and by diagonal
blocks on vertex-deleted subgraphs; off-diagonal blocks are sums over simple
paths weighted the same way.  On a finite graph the recursion terminates (the
continued fraction has finite depth) and both routes agree exactly.

The recursion is memoised on (connected component of the surviving vertex
set, vertex) keys: a diagonal block only depends on the component its vertex
lives in, and sharing common path suffixes this way is what makes 16-vertex
graphs affordable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import lapack as _lapack

from .configgraph import ConfigurationGraph, build_config_graph
from .errors import ConditioningError, ParameterError
from .model import (
    CouplingParams,
    DisorderRealization,
    SpinLattice,
    SystemPartition,
    _partition_rows,
    build_full_hamiltonian,
    build_lattice,
    child_seed,
    make_partition,
    partition_operator,
    sample_disorder,
)

DEFAULT_VERTEX_CAP = 16          # 4 spins in S'
DEFAULT_CONDITION_LIMIT = 1e12
DEFAULT_CACHE_CAPACITY = 1 << 19


@dataclass(frozen=True, eq=False)
class GreensBlock:
    """One generalised Green's function block at spectral parameter z."""

    z: complex
    block: np.ndarray
    provenance: str  # "oracle" | "pathsum"


def resolvent_oracle(
    full_h: np.ndarray,
    partition: SystemPartition,
    omega: int,
    alpha: int,
    z: complex,
) -> GreensBlock:
    """(<omega| (x) I) (zI - H)^-1 (|alpha> (x) I) by direct dense solve."""
    z = complex(z)
    full_h = np.asarray(full_h)
    dim = full_h.shape[0]
    if z.imag == 0.0:
        gap = float(np.min(np.abs(np.linalg.eigvalsh(full_h) - z.real)))
        if gap < 1e-8:
            raise ConditioningError(
                f"z is within {gap:.3e} of the spectrum; move z or add Im z"
            )
    cols = _partition_rows(partition, alpha)
    rhs = np.zeros((dim, len(cols)), dtype=complex)
    rhs[cols, np.arange(len(cols))] = 1.0
    a = z * np.eye(dim) - full_h
    x = np.linalg.solve(a, rhs)
    rows = _partition_rows(partition, omega)
    return GreensBlock(z, x[rows, :], "oracle")


class PathSumEvaluator:
    """Memoised simple-path/simple-cycle resummation on one graph at one z.

    Evaluations are pure given (graph, z); repeated calls return bit-identical
    blocks.  Vertex sets are bitmasks; for graphs of up to 16 vertices the
    neighbourhood-of-set map is tabulated so component extraction is a few
    integer operations.
    """

    def __init__(
        self,
        graph: ConfigurationGraph,
        z: complex,
        *,
        allow_large: bool = False,
        condition_limit: float = DEFAULT_CONDITION_LIMIT,
        cache_capacity: int = DEFAULT_CACHE_CAPACITY,
    ):
        nv = graph.n_vertices
        if nv > DEFAULT_VERTEX_CAP:
            msg = (
                f"path-sums over {nv} vertices: simple-path counts grow "
                "combinatorially, expect minutes to hours"
            )
            if not allow_large:
                raise ParameterError(msg + " (pass allow_large=True to override)")
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
        self.graph = graph
        self.z = complex(z)
        self.condition_limit = float(condition_limit)
        self.cache_capacity = int(cache_capacity)
        self.full_mask = (1 << nv) - 1
        self._adj = [graph.neighbours(v) for v in range(nv)]  # out-edges
        in_adj: list[list[int]] = [[] for _ in range(nv)]
        for (src, dst) in graph.edges():
            in_adj[dst].append(src)
        self._in_adj = [tuple(sorted(a)) for a in in_adj]
        # weak adjacency: component canonicalisation only needs a superset
        # of every cycle/path through a vertex
        self._adjm = [0] * nv
        for v in range(nv):
            m = 0
            for u in self._adj[v]:
                m |= 1 << u
            for u in self._in_adj[v]:
                m |= 1 << u
            self._adjm[v] = m
        self._nb_table: list[int] | None = None
        if nv <= 16:
            table = [0] * (1 << nv)
            for m in range(1, 1 << nv):
                lsb = m & -m
                table[m] = table[m ^ lsb] | self._adjm[lsb.bit_length() - 1]
            self._nb_table = table
        self._brackets = [
            self.z * np.eye(graph.dims[v]) - np.asarray(graph.static(v), dtype=complex)
            for v in range(nv)
        ]
        self._weights = {
            (src, dst): np.asarray(graph.edge_weight(src, dst), dtype=complex)
            for (src, dst) in graph.edges()
        }
        offs = [0]
        for v in range(nv):
            offs.append(offs[-1] + graph.dims[v])
        self._offsets = offs
        self._total_rows = offs[-1]
        # closing flips of v as one block row over all in-neighbour columns
        self._win = []
        for v in range(nv):
            row = np.zeros((graph.dims[v], self._total_rows), dtype=complex)
            for u in self._in_adj[v]:
                row[:, offs[u]:offs[u + 1]] = self._weights[(u, v)]
            self._win.append(row)
        self._eyes = {d: np.eye(d, dtype=complex) for d in set(graph.dims)}
        self._zgesv = _lapack.zgesv
        self._fcache: dict[tuple[int, int], np.ndarray] = {}
        # stacked path-sum columns: key (comp, src) -> (total_rows, dim_src)
        # array whose row block at dst is the sum over simple paths src -> dst
        self._pcache: dict[tuple[int, int], np.ndarray] = {}
        self._zeros: dict[tuple[int, int], np.ndarray] = {}

    # -- vertex-set plumbing ------------------------------------------------

    def _component(self, v: int, alive: int) -> int:
        seen = 1 << v
        table = self._nb_table
        if table is not None:
            while True:
                grow = table[seen] & alive & ~seen
                if not grow:
                    return seen
                seen |= grow
        frontier = seen
        while frontier:
            grow = 0
            m = frontier
            while m:
                lsb = m & -m
                grow |= self._adjm[lsb.bit_length() - 1]
                m ^= lsb
            frontier = grow & alive & ~seen
            seen |= frontier
        return seen

    def _zero(self, dst: int, src: int) -> np.ndarray:
        shape = (self.graph.dims[dst], self.graph.dims[src])
        blk = self._zeros.get(shape)
        if blk is None:
            blk = np.zeros(shape, dtype=complex)
            blk.setflags(write=False)
            self._zeros[shape] = blk
        return blk

    def _maybe_evict(self):
        if len(self._pcache) + len(self._fcache) <= self.cache_capacity:
            return
        # smallest surviving components are the cheapest to recompute
        keys = sorted(self._pcache, key=lambda k: bin(k[0]).count("1"))
        for k in keys[: len(keys) // 2]:
            del self._pcache[k]

    # -- the resummation ----------------------------------------------------
    #
    # _diag(comp, v): diagonal block at v on the induced subgraph comp,
    #   [zI - H_v - Sigma]^-1, Sigma summed over simple cycles off v.
    # _stacked(comp, src): all path sums out of src on comp at once; the row
    #   block at dst collects every simple path src -> dst, each path weighted
    #   right-to-left by flip blocks and by diagonal blocks on the subgraph
    #   with the previously visited vertices removed.  Both take comp already
    #   canonicalised to the component containing their vertex.

    def _diag(self, comp: int, v: int) -> np.ndarray:
        key = (comp, v)
        hit = self._fcache.get(key)
        if hit is not None:
            return hit
        bracket = self._brackets[v]
        if comp != 1 << v:
            bracket = bracket - self._sigma(comp, v)
        d = self.graph.dims[v]
        _, _, inv, info = self._zgesv(bracket, self._eyes[d])
        if info != 0:
            raise ConditioningError(f"singular bracket at vertex {v}")
        cond = d * float(np.abs(bracket).max()) * float(np.abs(inv).max())
        if cond > self.condition_limit:
            raise ConditioningError(
                f"near-singular bracket at vertex {v} "
                f"(condition estimate {cond:.3e})"
            )
        inv.setflags(write=False)
        self._fcache[key] = inv
        return inv

    def _sigma(self, comp: int, v: int) -> np.ndarray:
        sub = comp & ~(1 << v)
        pc = self._pcache
        tails = []
        opens = []
        for u in self._adj[v]:
            if not (comp >> u) & 1:
                continue
            compx = self._component(u, sub)
            st = pc.get((compx, u))
            if st is None:
                st = self._stacked(compx, u)
            tails.append(st)
            opens.append(self._weights[(v, u)])
        if not tails:
            return np.zeros((self.graph.dims[v],) * 2, dtype=complex)
        if len(tails) == 1:
            inner = tails[0] @ opens[0]
        else:
            # stacked columns are exactly zero outside their component, so
            # closing against the full block row of in-flips is exact
            inner = np.concatenate(tails, axis=1) @ np.concatenate(opens, axis=0)
        return self._win[v] @ inner

    def _stacked(self, comp: int, src: int) -> np.ndarray:
        key = (comp, src)
        hit = self._pcache.get(key)
        if hit is not None:
            return hit
        g_src = self._diag(comp, src)
        offs = self._offsets
        acc = np.zeros((self._total_rows, self.graph.dims[src]), dtype=complex)
        acc[offs[src]:offs[src + 1]] = g_src
        sub = comp & ~(1 << src)
        if sub:
            pc = self._pcache
            tails = []
            steps = []
            for x in self._adj[src]:
                if not (comp >> x) & 1:
                    continue
                compx = self._component(x, sub)
                st = pc.get((compx, x))
                if st is None:
                    st = self._stacked(compx, x)
                tails.append(st)
                steps.append(self._weights[(src, x)] @ g_src)
            if len(tails) == 1:
                acc += tails[0] @ steps[0]
            elif tails:
                acc += np.concatenate(tails, axis=1) @ np.concatenate(steps, axis=0)
        acc.setflags(write=False)
        self._pcache[key] = acc
        self._maybe_evict()
        return acc

    # -- public surface -----------------------------------------------------

    def _alive(self, deleted: Iterable[int]) -> int:
        mask = self.full_mask
        for v in deleted:
            mask &= ~(1 << int(v))
        return mask

    def diagonal(self, alpha: int, deleted: Iterable[int] = ()) -> np.ndarray:
        alive = self._alive(deleted)
        if not (alive >> alpha) & 1:
            raise ParameterError("alpha must not be deleted")
        return np.array(self._diag(self._component(alpha, alive), alpha))

    def self_energy(self, alpha: int, deleted: Iterable[int] = ()) -> np.ndarray:
        alive = self._alive(deleted)
        if not (alive >> alpha) & 1:
            raise ParameterError("alpha must not be deleted")
        return self._sigma(self._component(alpha, alive), alpha)

    def offdiagonal(self, alpha: int, omega: int, deleted: Iterable[int] = ()) -> np.ndarray:
        alive = self._alive(deleted)
        if not (alive >> alpha) & 1 or not (alive >> omega) & 1:
            raise ParameterError("alpha and omega must not be deleted")
        comp = self._component(alpha, alive)
        if not (comp >> omega) & 1:
            return np.array(self._zero(omega, alpha))
        stacked = self._stacked(comp, alpha)
        offs = self._offsets
        return np.array(stacked[offs[omega]:offs[omega + 1]])


def diagonal_greens_pathsum(
    graph: ConfigurationGraph,
    alpha: int,
    z: complex,
    deleted: Iterable[int] = (),
    evaluator: PathSumEvaluator | None = None,
    **kwargs,
) -> GreensBlock:
    """[zI - H_alpha - Sigma]^-1 on the graph minus ``deleted``."""
    ev = evaluator or PathSumEvaluator(graph, z, **kwargs)
    return GreensBlock(ev.z, ev.diagonal(alpha, deleted), "pathsum")


def self_energy(
    graph: ConfigurationGraph,
    alpha: int,
    z: complex,
    deleted: Iterable[int] = (),
    evaluator: PathSumEvaluator | None = None,
    **kwargs,
) -> np.ndarray:
    """Sum over simple cycles off ``alpha`` of flip-weighted nested blocks."""
    ev = evaluator or PathSumEvaluator(graph, z, **kwargs)
    return ev.self_energy(alpha, deleted)


def offdiagonal_greens_pathsum(
    graph: ConfigurationGraph,
    alpha: int,
    omega: int,
    z: complex,
    evaluator: PathSumEvaluator | None = None,
    **kwargs,
) -> GreensBlock:
    """Sum over simple paths alpha -> omega of flip-weighted diagonal blocks."""
    ev = evaluator or PathSumEvaluator(graph, z, **kwargs)
    return GreensBlock(ev.z, ev.offdiagonal(alpha, omega), "pathsum")


# ---------------------------------------------------------------------------
# Monte Carlo fractional norms


def fractional_norm_mc(
    lattice: SpinLattice,
    partition: SystemPartition,
    params: CouplingParams,
    sigma_b: float,
    omega: int,
    alpha: int,
    z: complex,
    s: float,
    n_realisations: int,
    base_seed: int,
) -> tuple[float, float]:
    """Disorder average of ||G(omega, alpha; z)||^s with its standard error."""
    if not 0.0 < s < 1.0:
        raise ParameterError("s must lie strictly between 0 and 1")
    if n_realisations < 2:
        raise ParameterError("need at least 2 realisations")
    vals = np.empty(n_realisations)
    for r in range(n_realisations):
        disorder = sample_disorder(sigma_b, child_seed(base_seed, r), lattice.n_sites)
        h = build_full_hamiltonian(lattice, params, disorder)
        blk = resolvent_oracle(h, partition, omega, alpha, z).block
        vals[r] = np.linalg.norm(blk, 2) ** s
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_realisations))


# ---------------------------------------------------------------------------
# oracle-versus-path-sum verification


@dataclass(frozen=True)
class VerificationRow:
    n_sites: int
    sprime_size: int
    draw: int
    seed: int
    discrepancy: float


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple[VerificationRow, ...]
    tolerance: float
    max_discrepancy: float = field(init=False)

    def __post_init__(self):
        worst = max((r.discrepancy for r in self.rows), default=0.0)
        object.__setattr__(self, "max_discrepancy", worst)

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance

    @property
    def failures(self) -> tuple[VerificationRow, ...]:
        return tuple(r for r in self.rows if r.discrepancy > self.tolerance)


def _relative_frobenius(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.linalg.norm(b)
    if scale == 0.0:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / scale)


def greens_instance_discrepancy(
    n_sites: int,
    sprime_size: int,
    seed: int,
    eta: float = 0.1,
    max_targets: int = 3,
) -> float:
    """Worst oracle-vs-path-sum relative Frobenius error on one random instance.

    The instance (chain lattice, couplings, S' subset, disorder) is a pure
    function of ``seed``, so any discrepancy can be replayed exactly.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    lattice = build_lattice("chain", n_sites)
    params = CouplingParams(
        jx=float(rng.uniform(0.3, 1.5)),
        jy=float(rng.uniform(0.3, 1.5)),
        delta=float(rng.uniform(-1.0, 1.0)),
    )
    sigma_b = float(rng.uniform(0.5, 3.0))
    sites = tuple(sorted(rng.choice(n_sites, size=sprime_size, replace=False).tolist()))
    partition = make_partition(lattice, sites, enforce_nonadjacent=False)
    disorder = DisorderRealization(
        rng.normal(0.0, sigma_b, n_sites), sigma_b, int(seed)
    )
    h = build_full_hamiltonian(lattice, params, disorder)
    ph = partition_operator(h, partition)
    graph = build_config_graph(ph, disorder)
    z = complex(np.trace(h) / h.shape[0], eta * params.j_eff)
    ev = PathSumEvaluator(graph, z)

    alpha = int(rng.integers(graph.n_vertices))
    worst = _relative_frobenius(
        ev.diagonal(alpha), resolvent_oracle(h, partition, alpha, alpha, z).block
    )
    others = [w for w in range(graph.n_vertices) if w != alpha]
    if len(others) > max_targets:
        others = sorted(
            rng.choice(others, size=max_targets, replace=False).tolist()
        )
    for omega in others:
        d = _relative_frobenius(
            ev.offdiagonal(alpha, omega),
            resolvent_oracle(h, partition, omega, alpha, z).block,
        )
        worst = max(worst, d)
    return worst


def run_greens_verification(
    total_sizes: Sequence[int] = (2, 3, 4, 5, 6),
    sprime_sizes: Sequence[int] = (1, 2, 3, 4),
    draws: int = 20,
    eta: float = 0.1,
    tolerance: float = 1e-9,
    base_seed: int = 20230615,
    sprime_cap: int = 4,
) -> VerificationReport:
    """Oracle-vs-path-sum sweep over instance shapes and disorder draws."""
    if max(sprime_sizes) > sprime_cap:
        raise ParameterError(
            f"|S'|={max(sprime_sizes)} exceeds the cap {sprime_cap}: the "
            f"largest graphs have 2^{max(sprime_sizes)} vertices and the "
            "simple-path count explodes (raise sprime_cap explicitly to force)"
        )
    rows = []
    counter = 0
    for n in total_sizes:
        for sp in sprime_sizes:
            if sp > n:
                continue
            for draw in range(draws):
                seed = child_seed(base_seed, counter)
                counter += 1
                disc = greens_instance_discrepancy(n, sp, seed, eta=eta)
                rows.append(VerificationRow(n, sp, draw, seed, disc))
    return VerificationReport(tuple(rows), tolerance)
