"""Spin-1/2 lattices, disorder, the XYZ Hamiltonian and its tensor-product partitions.

Basis convention used everywhere: a configuration of ``n`` sites is an integer
whose bit ``i`` is 1 when the spin at site ``i`` points up, and the basis index
of the full system is that same integer (site 0 is the least significant bit).
In this basis the XYZ Hamiltonian is real symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConstructionError,
    ParameterError,
    SingularityError,
    SizeError,
)

DEFAULT_SITE_CAP = 14


# ---------------------------------------------------------------------------
# lattices and couplings


@dataclass(frozen=True)
class SpinLattice:
    """A finite set of spin-1/2 sites with nearest-neighbour bonds."""

    n_sites: int
    edges: frozenset[tuple[int, int]]
    label: str = ""

    def are_adjacent(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbours(self, i: int) -> tuple[int, ...]:
        out = [b if a == i else a for (a, b) in self.edges if i in (a, b)]
        return tuple(sorted(out))


def _normalise_edges(edges: Iterable[tuple[int, int]], n_sites: int) -> frozenset:
    seen = set()
    for (a, b) in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ConstructionError(f"self-edge ({a},{a}) is not allowed")
        if not (0 <= a < n_sites and 0 <= b < n_sites):
            raise ConstructionError(f"edge ({a},{b}) out of range for {n_sites} sites")
        e = (min(a, b), max(a, b))
        if e in seen:
            raise ConstructionError(f"duplicate edge {e}")
        seen.add(e)
    return frozenset(seen)


def build_lattice(
    kind: str,
    n_sites: int,
    extra: Iterable[tuple[int, int]] | None = None,
    width: int | None = None,
    label: str = "",
    site_cap: int = DEFAULT_SITE_CAP,
) -> SpinLattice:
    """Build a chain, ring, 2-d grid, or custom-edge-list lattice.

    ``site_cap`` limits ``n_sites`` so that dense 2^N matrices stay tractable.
    """
    if n_sites < 1:
        raise ConstructionError("n_sites must be at least 1")
    if n_sites > site_cap:
        raise SizeError(f"n_sites={n_sites} exceeds the cap of {site_cap}")
    if kind == "chain":
        edges = [(i, i + 1) for i in range(n_sites - 1)]
    elif kind == "ring":
        if n_sites < 3:
            raise ConstructionError("a ring needs at least 3 sites")
        edges = [(i, (i + 1) % n_sites) for i in range(n_sites)]
    elif kind == "grid2d":
        if width is None or width < 1 or n_sites % width != 0:
            raise ConstructionError("grid2d needs a width that divides n_sites")
        height = n_sites // width
        edges = []
        for r in range(height):
            for c in range(width):
                s = r * width + c
                if c + 1 < width:
                    edges.append((s, s + 1))
                if r + 1 < height:
                    edges.append((s, s + width))
    elif kind == "custom":
        edges = list(extra or [])
    else:
        raise ConstructionError(f"unknown lattice kind {kind!r}")
    return SpinLattice(n_sites, _normalise_edges(edges, n_sites), label or kind)


@dataclass(frozen=True)
class CouplingParams:
    """XYZ interaction strengths (jx, jy along the flips, delta along z)."""

    jx: float
    jy: float
    delta: float

    @property
    def j_eff(self) -> float:
        return math.hypot(self.jx, self.jy)


# ---------------------------------------------------------------------------
# disorder


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """One draw of the iid Gaussian on-site fields {B_i}."""

    b_fields: np.ndarray
    sigma_b: float
    seed: int

    def __post_init__(self):
        arr = np.asarray(self.b_fields, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "b_fields", arr)


def child_seed(base_seed: int, index: int) -> int:
    """Derive the seed of realisation ``index`` from an ensemble base seed.

    Uses numpy's SeedSequence spawning (documented, stable hashing), so
    ensembles can be generated independently and in parallel.
    """
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(sigma_b: float, seed: int, n_sites: int) -> DisorderRealization:
    """Draw iid mean-zero Gaussian fields with standard deviation ``sigma_b``.

    The generator is PCG64 keyed by SeedSequence(seed): the same
    (seed, sigma_b, n_sites) always yields the identical vector.
    """
    if sigma_b <= 0:
        raise ParameterError("sigma_b must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    b = rng.normal(0.0, sigma_b, int(n_sites))
    return DisorderRealization(b, float(sigma_b), int(seed))


def zero_disorder(n_sites: int) -> DisorderRealization:
    """All fields exactly zero (useful for clean-system checks)."""
    return DisorderRealization(np.zeros(n_sites), 0.0, 0)


# ---------------------------------------------------------------------------
# Hamiltonian

def spin_z_diagonal(n_sites: int, site: int) -> np.ndarray:
    """Diagonal of sigma_z at ``site`` over the full 2^N basis (+1 up, -1 down)."""
    x = np.arange(1 << n_sites)
    return 2.0 * ((x >> site) & 1) - 1.0


def build_full_hamiltonian(
    lattice: SpinLattice, params: CouplingParams, disorder: DisorderRealization
) -> np.ndarray:
    """Dense 2^N x 2^N matrix of the disordered XYZ Hamiltonian.

    H = sum_i B_i sz_i + sum_<ij> (jx sx_i sx_j + jy sy_i sy_j + delta sz_i sz_j).
    Real symmetric in the spin-z product basis.  The constant sum_i B_i is not
    added; all observables here are invariant under that shift.
    """
    n = lattice.n_sites
    if len(disorder.b_fields) != n:
        raise ParameterError(
            f"disorder has {len(disorder.b_fields)} fields for {n} sites"
        )
    dim = 1 << n
    x = np.arange(dim)
    diag = np.zeros(dim)
    for i in range(n):
        diag += disorder.b_fields[i] * (2.0 * ((x >> i) & 1) - 1.0)
    h = np.zeros((dim, dim))
    for (i, j) in sorted(lattice.edges):
        si = 2.0 * ((x >> i) & 1) - 1.0
        sj = 2.0 * ((x >> j) & 1) - 1.0
        diag += params.delta * si * sj
        y = x ^ (1 << i) ^ (1 << j)
        # flipping an anti-aligned pair costs jx+jy, an aligned pair jx-jy
        h[y, x] += np.where(si != sj, params.jx + params.jy, params.jx - params.jy)
    h[x, x] = diag
    return h


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class SystemPartition:
    """Split of the full system into a kept part S' and the complement S."""

    n_sites: int
    sprime_sites: tuple[int, ...]
    s_sites: tuple[int, ...]
    nonadjacency_enforced: bool = False

    @property
    def sprime_size(self) -> int:
        return len(self.sprime_sites)

    @property
    def s_dim(self) -> int:
        return 1 << len(self.s_sites)

    @property
    def n_configs(self) -> int:
        return 1 << len(self.sprime_sites)

    def full_index(self, alpha: int, s_config: int) -> int:
        """Full basis index of (S' in ``alpha``, S in ``s_config``)."""
        v = 0
        for k, s in enumerate(self.sprime_sites):
            v |= ((alpha >> k) & 1) << s
        for k, s in enumerate(self.s_sites):
            v |= ((s_config >> k) & 1) << s
        return v


def make_partition(
    lattice: SpinLattice,
    sprime_sites: Sequence[int],
    enforce_nonadjacent: bool = True,
) -> SystemPartition:
    sp = tuple(int(s) for s in sprime_sites)
    if len(sp) < 1:
        raise ConstructionError("S' must contain at least one site")
    if len(set(sp)) != len(sp):
        raise ConstructionError("S' sites must be distinct")
    if any(not (0 <= s < lattice.n_sites) for s in sp):
        raise ConstructionError("S' site out of range")
    if enforce_nonadjacent:
        for a in sp:
            for b in sp:
                if a < b and lattice.are_adjacent(a, b):
                    raise ConstructionError(f"S' sites {a} and {b} share a bond")
    s_rest = tuple(s for s in range(lattice.n_sites) if s not in sp)
    return SystemPartition(lattice.n_sites, sp, s_rest, enforce_nonadjacent)


@lru_cache(maxsize=4096)
def _partition_rows(partition: SystemPartition, alpha: int) -> np.ndarray:
    offs = np.zeros(partition.s_dim, dtype=np.int64)
    for k, s in enumerate(partition.s_sites):
        offs += ((np.arange(partition.s_dim) >> k) & 1) << s
    base = 0
    for k, s in enumerate(partition.sprime_sites):
        base |= ((alpha >> k) & 1) << s
    rows = base + offs
    rows.setflags(write=False)
    return rows


class PartitionedOperator:
    """Tensor-product partition of a 2^N x 2^N operator.

    ``block(omega, alpha)`` is the 2^|S| x 2^|S| generalised matrix element
    (<omega| (x) I_S) M (|alpha> (x) I_S); blocks with omega == alpha are the
    statics, the others the flips.  Blocks are exact row/column restrictions,
    so summing |omega><alpha| (x) block over all pairs reproduces ``matrix``
    entrywise.
    """

    def __init__(self, matrix: np.ndarray, partition: SystemPartition):
        matrix = np.asarray(matrix)
        dim = 1 << partition.n_sites
        if matrix.shape != (dim, dim):
            raise ParameterError(
                f"matrix of shape {matrix.shape} does not match 2^{partition.n_sites}"
            )
        self.partition = partition
        self.matrix = matrix

    @property
    def block_dim(self) -> int:
        return self.partition.s_dim

    @property
    def n_configs(self) -> int:
        return self.partition.n_configs

    def block(self, omega: int, alpha: int) -> np.ndarray:
        rows = _partition_rows(self.partition, omega)
        cols = _partition_rows(self.partition, alpha)
        return self.matrix[np.ix_(rows, cols)]

    def static(self, alpha: int) -> np.ndarray:
        return self.block(alpha, alpha)

    def reassemble(self) -> np.ndarray:
        out = np.zeros_like(self.matrix)
        for omega in range(self.n_configs):
            rows = _partition_rows(self.partition, omega)
            for alpha in range(self.n_configs):
                cols = _partition_rows(self.partition, alpha)
                out[np.ix_(rows, cols)] = self.block(omega, alpha)
        return out


def partition_operator(matrix: np.ndarray, partition: SystemPartition) -> PartitionedOperator:
    return PartitionedOperator(matrix, partition)


def config_signs(alpha: int, size: int) -> np.ndarray:
    """The +-1 coefficient vector of a configuration (+1 where the spin is up)."""
    return np.array([1 if (alpha >> k) & 1 else -1 for k in range(size)], dtype=np.int8)


def configuration_potential(
    partition: SystemPartition, alpha: int, disorder: DisorderRealization
) -> float:
    """Y_alpha: the signed sum of the S' fields fixed by configuration alpha."""
    return math.fsum(
        disorder.b_fields[s] * (1.0 if (alpha >> k) & 1 else -1.0)
        for k, s in enumerate(partition.sprime_sites)
    )


def static_split(
    partitioned_h: PartitionedOperator, alpha: int, disorder: DisorderRealization
) -> tuple[float, np.ndarray]:
    """Split a static block as H_alpha = Y_alpha * I + H~_alpha.

    H~_alpha carries the S fields and the deterministic interaction terms but
    none of the S' fields.
    """
    y = configuration_potential(partitioned_h.partition, alpha, disorder)
    h_tilde = partitioned_h.static(alpha) - y * np.eye(partitioned_h.block_dim)
    return y, h_tilde


def flip_block(partitioned_h: PartitionedOperator, omega: int, alpha: int) -> np.ndarray:
    if omega == alpha:
        raise ParameterError("omega == alpha selects a static; use static() instead")
    return partitioned_h.block(omega, alpha)


# ---------------------------------------------------------------------------
# statistics of the configuration potentials


@dataclass(frozen=True, eq=False)
class ConfigPotentialStats:
    """Coefficient vectors and exact covariance of chosen Y_alpha variables."""

    configs: tuple[int, ...]
    sprime_size: int
    coefficient_matrix: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    sigma_b: float


def covariance_matrix(
    configs: Sequence[int], sprime_size: int, sigma_b: float
) -> ConfigPotentialStats:
    """Exact covariance of the potentials Y_beta of the given configurations.

    Entry (beta, gamma) equals (|S'| - 2 * Hamming(beta, gamma)) * sigma_b^2.
    """
    configs = tuple(int(c) for c in configs)
    if not configs:
        raise ParameterError("at least one configuration is required")
    if len(set(configs)) != len(configs):
        raise ParameterError("configurations must be distinct")
    if any(not (0 <= c < (1 << sprime_size)) for c in configs):
        raise ParameterError("configuration out of range for sprime_size")
    coeff = np.array([config_signs(c, sprime_size) for c in configs], dtype=np.int8)
    k = len(configs)
    ham = np.zeros((k, k), dtype=np.int64)
    for a in range(k):
        for b in range(k):
            ham[a, b] = bin(configs[a] ^ configs[b]).count("1")
    cov = (sprime_size - 2 * ham) * float(sigma_b) ** 2
    return ConfigPotentialStats(configs, int(sprime_size), coeff, cov, float(sigma_b))


def _dependent_rows(coeff: np.ndarray) -> tuple[int, ...]:
    u, s, _ = np.linalg.svd(coeff.astype(float))
    tol = max(coeff.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    if rank == coeff.shape[0]:
        return ()
    null = u[:, rank:]
    weight = np.abs(null).max(axis=1)
    return tuple(int(i) for i in np.nonzero(weight > 1e-9)[0])


def conditional_variance(stats: ConfigPotentialStats, target_index: int) -> float:
    """Variance of Y at ``target_index`` conditioned on all other listed Y's.

    Equals 1 / (Sigma^-1)_{tt}; always at least sigma_b^2 when the coefficient
    vectors are linearly independent.
    """
    k = len(stats.configs)
    if not (0 <= target_index < k):
        raise ParameterError("target_index out of range")
    dep = _dependent_rows(stats.coefficient_matrix)
    if dep:
        raise SingularityError(
            f"covariance is singular: configuration rows {list(dep)} are "
            "linearly dependent",
            dependent_rows=dep,
        )
    e = np.zeros(k)
    e[target_index] = 1.0
    col = np.linalg.solve(stats.covariance, e)
    return 1.0 / col[target_index]
