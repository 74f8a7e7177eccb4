"""Shared independent oracles used across the test suite.

These deliberately re-derive quantities through different routes than the
package (explicit Kronecker products, brute-force enumeration, dense
sub-resolvents) so that agreement is meaningful.
"""

from __future__ import annotations

import itertools

import numpy as np

from xyzloc.model import _partition_rows

# single-site operators in the package basis order (down, up)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, 1.0j], [-1.0j, 0.0]])
SZ = np.array([[-1.0, 0.0], [0.0, 1.0]])
ID2 = np.eye(2)


def kron_site_operator(n_sites: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    """Kronecker chain with site 0 as the least significant factor."""
    out = np.array([[1.0 + 0.0j]])
    for site in range(n_sites):
        out = np.kron(ops.get(site, ID2), out)
    return out


def kron_hamiltonian(lattice, params, disorder) -> np.ndarray:
    """Independent construction of the XYZ Hamiltonian via explicit krons."""
    n = lattice.n_sites
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(n):
        h += disorder.b_fields[i] * kron_site_operator(n, {i: SZ})
    for (i, j) in lattice.edges:
        h += params.jx * kron_site_operator(n, {i: SX, j: SX})
        h += params.jy * kron_site_operator(n, {i: SY, j: SY})
        h += params.delta * kron_site_operator(n, {i: SZ, j: SZ})
    return h


def brute_force_simple_paths(graph, alpha, omega, max_len):
    """Simple paths by filtering all vertex permutations (small graphs only)."""
    verts = range(graph.n_vertices)
    if alpha == omega:
        return {(alpha,)}  # any longer walk would revisit alpha
    found = set()
    for length in range(1, max_len + 1):
        for interior in itertools.permutations(
            [v for v in verts if v not in (alpha, omega)], length - 1
        ):
            path = (alpha,) + interior + (omega,)
            if all(graph.has_edge(a, b) for a, b in zip(path, path[1:])):
                found.add(path)
    return found


def brute_force_cycles_off(graph, alpha, deleted=()):
    """Simple cycles through alpha by filtering permutations of interiors."""
    dead = set(deleted)
    others = [v for v in range(graph.n_vertices) if v != alpha and v not in dead]
    found = set()
    for length in range(1, len(others) + 1):
        for interior in itertools.permutations(others, length):
            cyc = (alpha,) + interior + (alpha,)
            if all(graph.has_edge(a, b) for a, b in zip(cyc, cyc[1:])):
                found.add(cyc)
    return found


def resolvent_block_on_deleted(full_h, partition, omega, alpha, z, deleted):
    """Oracle for vertex-deleted diagonal/off-diagonal Green's blocks: delete
    every full-basis row/column belonging to a deleted configuration, invert
    densely, and slice."""
    full_h = np.asarray(full_h, dtype=complex)
    dim = full_h.shape[0]
    drop = np.concatenate(
        [_partition_rows(partition, beta) for beta in deleted]
    ) if deleted else np.array([], dtype=int)
    keep = np.setdiff1d(np.arange(dim), drop)
    sub = full_h[np.ix_(keep, keep)]
    resolvent = np.linalg.inv(z * np.eye(len(keep)) - sub)
    pos = {int(x): k for k, x in enumerate(keep)}
    rows = np.array([pos[int(x)] for x in _partition_rows(partition, omega)])
    cols = np.array([pos[int(x)] for x in _partition_rows(partition, alpha)])
    return resolvent[np.ix_(rows, cols)]
