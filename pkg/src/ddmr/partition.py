"""Block decomposition of the mesh into subdomains and interface groups.

Nodes are classified as Dirichlet (on the physical boundary, excluded from
every slot), subdomain-interior, or interface.  Interface nodes are split
into non-overlapping groups: open edges between neighboring blocks and
singleton cross-point vertices.  A shared group is referenced by both
neighbors, and the scatter maps place local interface slots into the global
condensed system.

Group ordering per subdomain: edges counterclockwise from south (S, E, N, W),
then vertices counterclockwise from southwest (SW, SE, NE, NW); groups that
fall on the physical boundary do not exist.  Within an edge group, nodes are
ordered by ascending coordinate along the edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh_fem import Mesh, dirichlet_values, element_contributions

__all__ = [
    "InterfaceGroup",
    "Subdomain",
    "DomainPartition",
    "LocalSystem",
    "build_partition",
    "assemble_local",
    "assemble_all_local",
    "scatter",
    "gather",
]


@dataclass(frozen=True)
class InterfaceGroup:
    kind: str            # "edge" | "vertex"
    nodes: np.ndarray    # global node ids in canonical order
    offset: int          # first column in the condensed system

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def columns(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.nodes.size)


@dataclass(frozen=True)
class Subdomain:
    triangles: np.ndarray       # triangle indices
    interior_nodes: np.ndarray  # global node ids, ascending
    group_ids: list             # indices into partition.groups, local order


@dataclass(frozen=True)
class DomainPartition:
    sx: int
    sy: int
    mesh_n: int
    groups: list          # list[InterfaceGroup]
    subdomains: list      # list[Subdomain]
    n_interface: int      # columns of the condensed system

    @property
    def n_subdomains(self) -> int:
        return self.sx * self.sy

    def boundary_columns(self, s: int) -> np.ndarray:
        """Global condensed-system columns for subdomain s, local slot order."""
        gids = self.subdomains[s].group_ids
        if not gids:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([self.groups[g].columns for g in gids])

    def boundary_nodes(self, s: int) -> np.ndarray:
        """Global mesh node ids for subdomain s interface slots, local order."""
        gids = self.subdomains[s].group_ids
        if not gids:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([self.groups[g].nodes for g in gids])


@dataclass(frozen=True)
class LocalSystem:
    """2x2 block structure of the local stiffness system of one subdomain."""

    A00: sp.csr_matrix
    A0b: sp.csr_matrix
    Ab0: sp.csr_matrix
    Abb: sp.csr_matrix
    f0: np.ndarray
    fb: np.ndarray


def build_partition(mesh: Mesh, Sx: int, Sy: int) -> DomainPartition:
    n = mesh.n_cells_per_side
    if Sx < 1 or Sy < 1 or n % Sx or n % Sy:
        raise ValueError(f"block counts ({Sx}, {Sy}) must divide mesh n={n}")
    mx, my = n // Sx, n // Sy

    def nid(ix, iy):
        return iy * (n + 1) + ix

    groups: list[InterfaceGroup] = []
    vgrp: dict[tuple[int, int], int] = {}   # vertical edge (line, segment)
    hgrp: dict[tuple[int, int], int] = {}   # horizontal edge (line, segment)
    xgrp: dict[tuple[int, int], int] = {}   # cross point (vx, vy)
    offset = 0

    def add(kind, nodes, registry, key):
        nonlocal offset
        registry[key] = len(groups)
        groups.append(InterfaceGroup(kind, np.asarray(nodes, dtype=np.int64), offset))
        offset += len(nodes)

    for vx in range(1, Sx):
        for seg in range(Sy):
            iy = np.arange(seg * my + 1, (seg + 1) * my)
            add("edge", nid(vx * mx, iy), vgrp, (vx, seg))
    for vy in range(1, Sy):
        for seg in range(Sx):
            ix = np.arange(seg * mx + 1, (seg + 1) * mx)
            add("edge", nid(ix, vy * my), hgrp, (vy, seg))
    for vx in range(1, Sx):
        for vy in range(1, Sy):
            add("vertex", [nid(vx * mx, vy * my)], xgrp, (vx, vy))

    # triangle -> block: every triangle lies in one grid cell
    tri = np.arange(mesh.n_triangles)
    cell = tri // 2
    ccx, ccy = cell % n, cell // n
    block_of_tri = (ccy // my) * Sx + (ccx // mx)

    subdomains: list[Subdomain] = []
    for sy_ in range(Sy):
        for sx_ in range(Sx):
            s = sy_ * Sx + sx_
            tris = np.flatnonzero(block_of_tri == s)
            ix = np.arange(sx_ * mx + 1, (sx_ + 1) * mx)
            iy = np.arange(sy_ * my + 1, (sy_ + 1) * my)
            interior = (iy[:, None] * (n + 1) + ix[None, :]).ravel()
            interior.sort()

            gids = []
            if sy_ > 0:
                gids.append(hgrp[(sy_, sx_)])               # south
            if sx_ < Sx - 1:
                gids.append(vgrp[(sx_ + 1, sy_)])           # east
            if sy_ < Sy - 1:
                gids.append(hgrp[(sy_ + 1, sx_)])           # north
            if sx_ > 0:
                gids.append(vgrp[(sx_, sy_)])               # west
            if sx_ > 0 and sy_ > 0:
                gids.append(xgrp[(sx_, sy_)])               # SW
            if sx_ < Sx - 1 and sy_ > 0:
                gids.append(xgrp[(sx_ + 1, sy_)])           # SE
            if sx_ < Sx - 1 and sy_ < Sy - 1:
                gids.append(xgrp[(sx_ + 1, sy_ + 1)])       # NE
            if sx_ > 0 and sy_ < Sy - 1:
                gids.append(xgrp[(sx_, sy_ + 1)])           # NW
            subdomains.append(Subdomain(tris, interior, gids))

    return DomainPartition(Sx, Sy, n, groups, subdomains, offset)


def assemble_local(mesh: Mesh, partition: DomainPartition, problem, s: int,
                   dirichlet: dict | None = None) -> LocalSystem:
    """Assemble the 2x2 block system of subdomain s from its triangles only.

    Dirichlet columns are eliminated with the lifted boundary values moved to
    the right-hand side, matching the global elimination, so the scattered
    sum of local systems reproduces the global free-node system entrywise.
    ``dirichlet`` overrides the problem's boundary data; it is worth caching
    by the caller when many realizations share one mesh.
    """
    sub = partition.subdomains[s]
    rows, cols, vals, frows, fvals = element_contributions(mesh, problem, sub.triangles)

    J = mesh.n_nodes
    interior = sub.interior_nodes
    bnodes = partition.boundary_nodes(s)
    n0, nb = interior.size, bnodes.size

    # node code: [0, n0) interior slot, [n0, n0+nb) boundary slot, -1 Dirichlet
    code = np.full(J, -1, dtype=np.int64)
    code[interior] = np.arange(n0)
    code[bnodes] = n0 + np.arange(nb)

    if dirichlet is None:
        dirichlet = dirichlet_values(mesh, problem)
    dval = np.zeros(J)
    dmask = np.zeros(J, dtype=bool)
    for node, v in dirichlet.items():
        dval[node] = v
        dmask[node] = True

    r, c = code[rows], code[cols]
    keep_row = r >= 0

    f = np.zeros(n0 + nb)
    fr = code[frows]
    np.add.at(f, fr[fr >= 0], fvals[fr >= 0])
    lift = keep_row & dmask[cols]
    np.subtract.at(f, r[lift], vals[lift] * dval[cols[lift]])

    keep = keep_row & (c >= 0)
    A = sp.coo_matrix((vals[keep], (r[keep], c[keep])),
                      shape=(n0 + nb, n0 + nb)).tocsr()
    return LocalSystem(
        A00=A[:n0, :n0], A0b=A[:n0, n0:], Ab0=A[n0:, :n0], Abb=A[n0:, n0:],
        f0=f[:n0], fb=f[n0:],
    )


def assemble_all_local(mesh: Mesh, partition: DomainPartition, problem) -> list:
    return [assemble_local(mesh, partition, problem, s)
            for s in range(partition.n_subdomains)]


def scatter(partition: DomainPartition, s: int, v: np.ndarray) -> np.ndarray:
    """Additive scatter of a local interface vector into global positions."""
    cols = partition.boundary_columns(s)
    if v.shape[0] != cols.size:
        raise ValueError(f"expected local vector of length {cols.size}, got {v.shape[0]}")
    out = np.zeros(partition.n_interface)
    np.add.at(out, cols, v)
    return out


def gather(partition: DomainPartition, s: int, v: np.ndarray) -> np.ndarray:
    """Transpose of :func:`scatter`: pick local interface entries from global."""
    if v.shape[0] != partition.n_interface:
        raise ValueError(f"expected global vector of length {partition.n_interface}")
    return v[partition.boundary_columns(s)]
