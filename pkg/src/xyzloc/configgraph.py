"""Configuration graphs: vertices are S' configurations, edges are nonzero flips.

The graph is directed (edge alpha -> omega carries the flip block H_{omega (x) alpha});
for Hermitian sources both directions are present together.  Vertices may have
different block dimensions, which is what the potential-collapse construction
produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConstructionError, ParameterError
from .model import DisorderRealization, PartitionedOperator, static_split

EDGE_NORM_THRESHOLD = 1e-14


class ConfigurationGraph:
    """Weighted digraph over configurations with per-vertex static blocks."""

    def __init__(
        self,
        dims: Sequence[int],
        statics: Sequence[np.ndarray],
        weights: dict[tuple[int, int], np.ndarray],
        potentials: Sequence[float] | None = None,
        labels: Sequence[str] | None = None,
    ):
        self.n_vertices = len(dims)
        self.dims = tuple(int(d) for d in dims)
        self._statics = [np.asarray(s) for s in statics]
        self._weights = dict(weights)
        self.potentials = None if potentials is None else tuple(potentials)
        self.labels = (
            tuple(labels)
            if labels is not None
            else tuple(str(v) for v in range(self.n_vertices))
        )
        out: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for (src, dst), w in self._weights.items():
            if w.shape != (self.dims[dst], self.dims[src]):
                raise ConstructionError(
                    f"weight {src}->{dst} has shape {w.shape}, expected "
                    f"({self.dims[dst]}, {self.dims[src]})"
                )
            out[src].append(dst)
        self._adj = tuple(tuple(sorted(set(n))) for n in out)

    def neighbours(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def has_edge(self, src: int, dst: int) -> bool:
        return (src, dst) in self._weights

    def edge_weight(self, src: int, dst: int) -> np.ndarray:
        """Flip block H_{dst (x) src} attached to the edge src -> dst."""
        return self._weights[(src, dst)]

    def static(self, v: int) -> np.ndarray:
        return self._statics[v]

    def potential(self, v: int) -> float:
        if self.potentials is None:
            raise ParameterError("graph carries no vertex potentials")
        return self.potentials[v]

    def edges(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._weights))


def _block_norm(block: np.ndarray) -> float:
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block, ord=2))


def build_config_graph(
    partitioned_h: PartitionedOperator, disorder: DisorderRealization
) -> ConfigurationGraph:
    """Graph of a partitioned Hamiltonian: one vertex per S' configuration,
    an edge wherever the flip block is nonzero (2-norm above 1e-14), the flip
    block as edge weight, and Y_alpha attached to each vertex."""
    n = partitioned_h.n_configs
    size = partitioned_h.partition.sprime_size
    statics, potentials = [], []
    for alpha in range(n):
        y, _ = static_split(partitioned_h, alpha, disorder)
        statics.append(partitioned_h.static(alpha))
        potentials.append(y)
    weights: dict[tuple[int, int], np.ndarray] = {}
    for alpha in range(n):
        for omega in range(n):
            if omega == alpha:
                continue
            w = partitioned_h.block(omega, alpha)
            if _block_norm(w) > EDGE_NORM_THRESHOLD:
                weights[(alpha, omega)] = w
    labels = [format(a, f"0{size}b")[::-1] for a in range(n)]
    return ConfigurationGraph(
        [partitioned_h.block_dim] * n, statics, weights, potentials, labels
    )


def distance(graph: ConfigurationGraph, alpha: int, omega: int) -> int | float:
    """Length of the shortest walk alpha -> omega; math.inf when unreachable."""
    if alpha == omega:
        return 0
    dist = {alpha: 0}
    frontier = [alpha]
    while frontier:
        nxt = []
        for u in frontier:
            for v in graph.neighbours(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    if v == omega:
                        return dist[v]
                    nxt.append(v)
        frontier = nxt
    return math.inf


def enumerate_simple_paths(
    graph: ConfigurationGraph, alpha: int, omega: int, max_len: int
) -> Iterator[tuple[int, ...]]:
    """All simple paths alpha -> omega with at most ``max_len`` edges.

    Paths visit no vertex twice.  Enumeration is depth first with neighbours
    taken in ascending vertex order, so the stream order is deterministic.
    """
    if max_len > graph.n_vertices:
        raise ParameterError("max_len exceeds the number of vertices")

    def dfs(path: list[int], visited: set[int]):
        u = path[-1]
        if u == omega:
            yield tuple(path)
            return
        if len(path) - 1 >= max_len:
            return
        for v in graph.neighbours(u):
            if v not in visited:
                path.append(v)
                visited.add(v)
                yield from dfs(path, visited)
                visited.remove(v)
                path.pop()

    yield from dfs([alpha], {alpha})


def enumerate_simple_cycles_off(
    graph: ConfigurationGraph, alpha: int, deleted: Iterable[int] = ()
) -> Iterator[tuple[int, ...]]:
    """All simple cycles alpha -> ... -> alpha on the graph minus ``deleted``.

    Interior vertices are distinct and different from alpha.  Deterministic
    depth-first order, ascending neighbour indices.
    """
    dead = set(deleted)
    if alpha in dead:
        raise ParameterError("alpha must not be deleted")

    def dfs(path: list[int], visited: set[int]):
        u = path[-1]
        if len(path) > 1 and graph.has_edge(u, alpha):
            yield tuple(path) + (alpha,)
        for v in graph.neighbours(u):
            if v != alpha and v not in visited and v not in dead:
                path.append(v)
                visited.add(v)
                yield from dfs(path, visited)
                visited.remove(v)
                path.pop()

    yield from dfs([alpha], {alpha})


@dataclass(frozen=True, eq=False)
class CollapsedGraph:
    """Result of merging the configurations whose potential is +-Y_{alpha_j}."""

    parent: ConfigurationGraph
    merged: tuple[int, ...]
    graph: ConfigurationGraph
    collapsed_vertex: int
    vertex_map: dict[int, int]


def y_collapse(
    graph: ConfigurationGraph,
    alpha_j: int,
    merged: Sequence[int] | None = None,
) -> CollapsedGraph:
    """Merge the vertices carrying potentials +-Y_{alpha_j} into one vertex.

    By default exactly alpha_j and its spin-flipped complement are merged (the
    only configurations whose +-1 coefficient vectors are +-v_{alpha_j});
    ``merged`` overrides the merge set for experimentation.  alpha_j's static
    is kept as the leading principal submatrix of the merged block.
    """
    n = graph.n_vertices
    size = n.bit_length() - 1
    if 1 << size != n:
        raise ParameterError("potential collapse needs a full configuration set")
    if merged is None:
        comp = alpha_j ^ ((1 << size) - 1)
        merge_list = [alpha_j] if comp == alpha_j else [alpha_j, comp]
    else:
        merge_list = [alpha_j] + sorted(int(m) for m in merged if int(m) != alpha_j)
    merge_set = set(merge_list)
    rest = [v for v in range(n) if v not in merge_set]
    vertex_map = {v: 0 for v in merge_list}
    vertex_map.update({v: 1 + k for k, v in enumerate(rest)})

    bd = graph.dims[alpha_j]
    mdim = bd * len(merge_list)
    big = np.zeros((mdim, mdim), dtype=complex)
    for a, va in enumerate(merge_list):
        big[a * bd:(a + 1) * bd, a * bd:(a + 1) * bd] = graph.static(va)
        for b, vb in enumerate(merge_list):
            if a != b and graph.has_edge(vb, va):
                big[a * bd:(a + 1) * bd, b * bd:(b + 1) * bd] = graph.edge_weight(vb, va)

    dims = [mdim] + [graph.dims[v] for v in rest]
    statics = [big] + [graph.static(v) for v in rest]
    weights: dict[tuple[int, int], np.ndarray] = {}
    for (src, dst), w in graph._weights.items():
        si, di = src in merge_set, dst in merge_set
        if si and di:
            continue
        if not si and not di:
            weights[(vertex_map[src], vertex_map[dst])] = w
        elif si:
            stacked = weights.setdefault(
                (0, vertex_map[dst]),
                np.zeros((graph.dims[dst], mdim), dtype=complex),
            )
            a = merge_list.index(src)
            stacked[:, a * bd:(a + 1) * bd] = w
        else:
            stacked = weights.setdefault(
                (vertex_map[src], 0),
                np.zeros((mdim, graph.dims[src]), dtype=complex),
            )
            a = merge_list.index(dst)
            stacked[a * bd:(a + 1) * bd, :] = w

    potentials = None
    if graph.potentials is not None:
        potentials = [graph.potential(alpha_j)] + [graph.potential(v) for v in rest]
    labels = ["+-" + graph.labels[alpha_j]] + [graph.labels[v] for v in rest]
    new_graph = ConfigurationGraph(dims, statics, weights, potentials, labels)
    return CollapsedGraph(graph, tuple(merge_list), new_graph, 0, vertex_map)


def export_edge_list(graph: ConfigurationGraph) -> str:
    """Plain-text edge list: 'src_label dst_label weight_2norm' per line."""
    lines = []
    for (src, dst) in graph.edges():
        w = _block_norm(graph.edge_weight(src, dst))
        lines.append(f"{graph.labels[src]} {graph.labels[dst]} {w:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")
