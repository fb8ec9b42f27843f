"""SVD reduced bases from solution snapshots and block compression.

Interface snapshots are collected once per shared interface group (both
neighboring subdomains reference the same basis), interior snapshots once per
subdomain.  Bases are truncated either at a fixed rank or at an energy
threshold on the squared singular values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .mesh_fem import Mesh, assemble, solve_full
from .partition import DomainPartition, LocalSystem

__all__ = [
    "SnapshotSet",
    "ReducedBasis",
    "generate_solution_snapshots",
    "split_snapshots",
    "svd_basis",
    "interface_block_basis",
    "reduce_matrices",
    "reduce_loads",
]

# exact dense SVD below this row count, Lanczos-style truncated SVD above
_DENSE_SVD_ROWS = 2000


@dataclass(frozen=True)
class SnapshotSet:
    y: np.ndarray           # (N, K) parameter draws
    interior: dict          # s -> (n0_s, K)
    groups: dict            # group id -> (len_g, K)


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal bases per interface group and per subdomain interior."""

    group_bases: list       # per global group: (len_g, M_g)
    group_singvals: list
    interior_bases: list    # per subdomain: (n0_s, M_s)
    interior_singvals: list


def split_snapshots(partition: DomainPartition, U: np.ndarray,
                    y: np.ndarray) -> SnapshotSet:
    """Split nodal solution columns (J, K) into partition slots."""
    interior = {s: U[sub.interior_nodes, :]
                for s, sub in enumerate(partition.subdomains)}
    groups = {g: U[grp.nodes, :] for g, grp in enumerate(partition.groups)}
    return SnapshotSet(y, interior, groups)


def generate_solution_snapshots(mesh: Mesh, partition: DomainPartition,
                                draw_problem, K: int,
                                rng: np.random.Generator) -> SnapshotSet:
    """Run K full FE solves on fresh global draws and split into slots.

    ``draw_problem(rng)`` must return ``(y, problem)`` for one realization of
    the global (unprojected) random field.
    """
    if K < 1:
        raise ValueError("need at least one snapshot")
    U = np.empty((mesh.n_nodes, K))
    ys = []
    for k in range(K):
        y, problem = draw_problem(rng)
        try:
            U[:, k] = solve_full(assemble(mesh, problem))
        except Exception as exc:
            raise RuntimeError(f"snapshot solve failed at sample {k}: {exc}") from exc
        ys.append(y)
    return split_snapshots(partition, U, np.column_stack(ys))


def _fix_signs(V: np.ndarray) -> np.ndarray:
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs[None, :]


def svd_basis(snapshots: np.ndarray, rank: int | None = None,
              energy: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Top left singular vectors of a snapshot matrix.

    Exactly one of ``rank`` (fixed number of columns) or ``energy`` (retain
    until the cumulative squared singular values reach the given fraction)
    must be given.  Returns (basis, all retained singular values).
    """
    if (rank is None) == (energy is None):
        raise ValueError("specify exactly one of rank or energy")
    rows, cols = snapshots.shape
    if rank is not None and rank > min(rows, cols):
        raise ValueError(f"rank {rank} exceeds snapshot dimensions {snapshots.shape}")

    if rows == 1:
        # vertex groups: the trivial 1x1 basis
        return np.ones((1, 1)), np.array([np.linalg.norm(snapshots)])

    if rows <= _DENSE_SVD_ROWS:
        V, s, _ = sla.svd(snapshots, full_matrices=False)
    else:
        k = rank if rank is not None else min(rows, cols) - 1
        V, s, _ = spla.svds(snapshots, k=min(k, min(rows, cols) - 1))
        order = np.argsort(s)[::-1]
        V, s = V[:, order], s[order]

    if rank is None:
        total = np.sum(s**2)
        cum = np.cumsum(s**2)
        rank = int(np.searchsorted(cum, energy * total) + 1)
        rank = min(rank, s.size)
    return np.ascontiguousarray(_fix_signs(V[:, :rank])), s[:rank]


def interface_block_basis(partition: DomainPartition, s: int,
                          group_bases: list) -> np.ndarray:
    """Block-diagonal interface basis of subdomain s, local group order."""
    blocks = [group_bases[g] for g in partition.subdomains[s].group_ids]
    if not blocks:
        return np.zeros((0, 0))
    return sla.block_diag(*blocks)


def reduce_matrices(local: LocalSystem, v0: np.ndarray,
                    vb: np.ndarray) -> tuple[np.ndarray, ...]:
    """Compress the four local blocks to reduced coordinates V' A V."""
    if v0.shape[0] != local.A00.shape[0] or vb.shape[0] != local.Abb.shape[0]:
        raise ValueError("basis row counts do not match local block sizes")
    a00 = v0.T @ (local.A00 @ v0)
    a0b = v0.T @ (local.A0b @ vb)
    ab0 = vb.T @ (local.Ab0 @ v0)
    abb = vb.T @ (local.Abb @ vb)
    return a00, a0b, ab0, abb


def reduce_loads(local: LocalSystem, v0: np.ndarray,
                 vb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return v0.T @ local.f0, vb.T @ local.fb
