"""Exact (unreduced) domain-decomposition solver via Schur condensation.

Per subdomain the interior unknowns are eliminated through a sparse LU
factorization of the interior block, local Schur complements are scattered
into a condensed interface system, and interiors are recovered afterwards.
This path is algebraically equivalent to the monolithic solve and serves as
the oracle and snapshot generator for the reduced model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .mesh_fem import Mesh
from .partition import DomainPartition, LocalSystem

__all__ = ["LocalSchur", "local_schur", "dd_solve"]


@dataclass(frozen=True)
class LocalSchur:
    B: np.ndarray
    g: np.ndarray
    # reused for interior recovery; the factorization dominates the cost
    interior_solve: Callable = field(repr=False, compare=False)


def local_schur(local: LocalSystem, subdomain_id: int | None = None) -> LocalSchur:
    """B_s = Abb - Ab0 (A00)^{-1} A0b via one sparse factorization of A00."""
    n0 = local.A00.shape[0]
    nb = local.Abb.shape[0]
    if n0 == 0:
        return LocalSchur(local.Abb.toarray(), local.fb.copy(),
                          lambda rhs: np.zeros((0,) + rhs.shape[1:]))
    try:
        lu = spla.splu(local.A00.tocsc())
        solve = lu.solve
    except RuntimeError as exc:
        where = "" if subdomain_id is None else f" of subdomain {subdomain_id}"
        raise RuntimeError(f"singular interior block{where}: {exc}") from exc
    if nb == 0:
        return LocalSchur(np.zeros((0, 0)), np.zeros(0), solve)
    B = local.Abb.toarray() - local.Ab0 @ solve(local.A0b.toarray())
    g = local.fb - local.Ab0 @ solve(local.f0)
    return LocalSchur(B, g, solve)


def dd_solve(mesh: Mesh, partition: DomainPartition, systems: list,
             dirichlet_values: dict | None = None) -> np.ndarray:
    """Condensed interface solve followed by interior recovery.

    ``systems`` holds one :class:`LocalSystem` per subdomain, all assembled
    from the same coefficient realization.  Returns the full nodal field.
    """
    nI = partition.n_interface
    B = np.zeros((nI, nI))
    g = np.zeros(nI)
    schurs = []
    for s, local in enumerate(systems):
        sc = local_schur(local, s)
        cols = partition.boundary_columns(s)
        B[np.ix_(cols, cols)] += sc.B
        np.add.at(g, cols, sc.g)
        schurs.append(sc)

    if nI > 0:
        try:
            ub = sla.solve(B, g)
        except sla.LinAlgError as exc:
            raise RuntimeError(f"singular condensed interface system: {exc}") from exc
    else:
        ub = np.zeros(0)

    u = np.zeros(mesh.n_nodes)
    if dirichlet_values:
        for node, v in dirichlet_values.items():
            u[node] = v
    for s, (local, sc) in enumerate(zip(systems, schurs)):
        ub_s = ub[partition.boundary_columns(s)]
        u0 = sc.interior_solve(local.f0 - local.A0b @ ub_s)
        u[partition.subdomains[s].interior_nodes] = u0
        u[partition.boundary_nodes(s)] = ub_s
    return u
