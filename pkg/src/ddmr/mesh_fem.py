"""Structured triangular meshes on the unit square and P1 finite elements.

The mesh is a criss-cross triangulation of [0,1]^2: each grid cell is split
along one diagonal, with the diagonal direction alternating in a checkerboard
pattern.  Every triangle lies inside a single grid cell, so any block
partition whose block counts divide the cell count is embedded exactly.

Two bilinear forms are supported: the diffusion form (a grad u, grad v) and
the SUPG-stabilized convection-diffusion form.  Coefficient fields are
piecewise constant per triangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Mesh",
    "CellField",
    "FemSystem",
    "DiffusionProblem",
    "ConvectionProblem",
    "build_mesh",
    "assemble",
    "assemble_diffusion",
    "assemble_supg",
    "solve_full",
    "element_contributions",
    "dirichlet_values",
    "default_inflow",
]


@dataclass(frozen=True)
class Mesh:
    """Criss-cross P1 mesh of the unit square."""

    n_cells_per_side: int
    nodes: np.ndarray          # (J, 2) coordinates
    triangles: np.ndarray      # (T, 3) node indices, positive orientation
    boundary_nodes: np.ndarray  # sorted node indices on the physical boundary
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class CellField:
    """Piecewise constant coefficient realization, one value per triangle."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class FemSystem:
    """Assembled linear system before Dirichlet elimination.

    ``A`` and ``f`` cover all J nodes; boundary conditions are imposed at
    solve time by row/column elimination with the lifted values moved to the
    right-hand side.
    """

    A: sp.csr_matrix
    f: np.ndarray
    dirichlet_values: dict[int, float] = field(repr=False)


@dataclass(frozen=True)
class DiffusionProblem:
    a: CellField
    f_const: float


@dataclass(frozen=True)
class ConvectionProblem:
    b1: CellField
    b2: CellField
    eps: float
    f_const: float
    inflow: object = None  # predicate (x, y) arrays -> bool array; None = default


def build_mesh(n: int) -> Mesh:
    """Build the criss-cross mesh with ``n`` cells per side.

    ``n`` must be a power of two and at least 2 so that block partitions with
    power-of-two block counts embed exactly.
    """
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two >= 2, got {n}")

    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(ix, iy):
        return iy * (n + 1) + ix

    cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    cx = cx.ravel()
    cy = cy.ravel()
    bl = nid(cx, cy)
    br = nid(cx + 1, cy)
    tr = nid(cx + 1, cy + 1)
    tl = nid(cx, cy + 1)

    even = (cx + cy) % 2 == 0
    t0 = np.where(even[:, None], np.column_stack([bl, br, tr]),
                  np.column_stack([bl, br, tl]))
    t1 = np.where(even[:, None], np.column_stack([bl, tr, tl]),
                  np.column_stack([br, tr, tl]))
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = t0
    triangles[1::2] = t1

    on_boundary = (
        (nodes[:, 0] == 0.0) | (nodes[:, 0] == 1.0)
        | (nodes[:, 1] == 0.0) | (nodes[:, 1] == 1.0)
    )
    boundary = np.flatnonzero(on_boundary)
    return Mesh(n, nodes, triangles, boundary, 1.0 / n)


def _geometry(mesh: Mesh, tris: np.ndarray):
    """Per-triangle areas, P1 basis gradients and longest-edge diameters."""
    p = mesh.nodes[mesh.triangles[tris]]             # (T, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # grad of barycentric basis i: rotate the opposite edge by 90 degrees
    g = np.empty_like(p)
    for i in range(3):
        a = p[:, (i + 1) % 3]
        b = p[:, (i + 2) % 3]
        g[:, i, 0] = a[:, 1] - b[:, 1]
        g[:, i, 1] = b[:, 0] - a[:, 0]
    g /= (2.0 * area)[:, None, None]
    edges = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ])
    diam = edges.max(axis=0)
    return area, g, diam


def element_contributions(mesh: Mesh, problem, tris: np.ndarray | None = None):
    """Assemble element matrices and loads for a subset of triangles.

    Returns COO triplets ``(rows, cols, vals)`` over global node indices and
    load triplets ``(frows, fvals)``.  No boundary condition is applied here;
    this is the shared kernel for both the global and the per-subdomain
    assemblies, so scattering local contributions reproduces the global
    matrix exactly.
    """
    if tris is None:
        tris = np.arange(mesh.n_triangles)
    tris = np.asarray(tris)
    area, g, diam = _geometry(mesh, tris)
    conn = mesh.triangles[tris]                      # (T, 3)

    if isinstance(problem, DiffusionProblem):
        a = problem.a.values
        if a.shape[0] != mesh.n_triangles:
            raise ValueError("coefficient field length does not match triangle count")
        bad = np.flatnonzero(a <= 0.0)
        if bad.size:
            raise ValueError(f"nonpositive diffusion coefficient on triangle {bad[0]}")
        ke = np.einsum("t,tid,tjd->tij", a[tris] * area, g, g)
        fe = np.repeat((problem.f_const * area / 3.0)[:, None], 3, axis=1)
    elif isinstance(problem, ConvectionProblem):
        if problem.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {problem.eps}")
        b = np.column_stack([problem.b1.values[tris], problem.b2.values[tris]])
        bnorm = np.linalg.norm(b, axis=1)
        bg = np.einsum("td,tid->ti", b, g)           # b . grad(phi_i)
        # diffusion + convection Galerkin terms
        ke = problem.eps * np.einsum("t,tid,tjd->tij", area, g, g)
        ke += (area / 3.0)[:, None, None] * bg[:, None, :]
        # SUPG: delta = h_tau / (2|b|) where the local Peclet number exceeds 1,
        # else 0.  With P1 elements the -eps*lap(u) term vanishes elementwise.
        with np.errstate(divide="ignore", invalid="ignore"):
            peclet = bnorm * diam / (2.0 * problem.eps)
            delta = np.where((peclet > 1.0) & (bnorm > 0.0),
                             diam / (2.0 * bnorm), 0.0)
        ke += np.einsum("t,ti,tj->tij", delta * area, bg, bg)
        fe = np.repeat((problem.f_const * area / 3.0)[:, None], 3, axis=1)
        fe += (problem.f_const * delta * area)[:, None] * bg
    else:
        raise TypeError(f"unknown problem type {type(problem)!r}")

    rows = np.repeat(conn, 3, axis=1).ravel()
    cols = np.tile(conn, (1, 3)).ravel()
    return rows, cols, ke.ravel(), conn.ravel(), fe.ravel()


def default_inflow(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Boundary segment carrying w = 1: {x=0, y in [0, 0.5]} union {y=0}."""
    return ((x == 0.0) & (y <= 0.5)) | (y == 0.0)


def dirichlet_values(mesh: Mesh, problem) -> dict[int, float]:
    bn = mesh.boundary_nodes
    if isinstance(problem, DiffusionProblem):
        vals = np.zeros(bn.size)
    else:
        pred = problem.inflow if problem.inflow is not None else default_inflow
        xy = mesh.nodes[bn]
        vals = pred(xy[:, 0], xy[:, 1]).astype(float)
    return {int(i): float(v) for i, v in zip(bn, vals)}


def assemble(mesh: Mesh, problem) -> FemSystem:
    J = mesh.n_nodes
    rows, cols, vals, frows, fvals = element_contributions(mesh, problem)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(J, J)).tocsr()
    f = np.bincount(frows, weights=fvals, minlength=J)
    return FemSystem(A, f, dirichlet_values(mesh, problem))


def assemble_diffusion(mesh: Mesh, a: CellField, f_const: float) -> FemSystem:
    return assemble(mesh, DiffusionProblem(a, f_const))


def assemble_supg(mesh: Mesh, b: tuple[CellField, CellField], eps: float,
                  f_const: float, inflow=None) -> FemSystem:
    return assemble(mesh, ConvectionProblem(b[0], b[1], eps, f_const, inflow))


def solve_full(sys: FemSystem) -> np.ndarray:
    """Direct solve with Dirichlet values imposed exactly.

    This is the reference "one expensive FE simulation" used as the cost
    unit for benchmark reporting.
    """
    J = sys.A.shape[0]
    dir_idx = np.fromiter(sys.dirichlet_values.keys(), dtype=np.int64)
    dir_val = np.fromiter(sys.dirichlet_values.values(), dtype=float)
    free = np.ones(J, dtype=bool)
    free[dir_idx] = False
    free_idx = np.flatnonzero(free)

    u = np.zeros(J)
    u[dir_idx] = dir_val
    rhs = sys.f[free_idx] - sys.A[free_idx][:, dir_idx] @ dir_val
    Aff = sys.A[free_idx][:, free_idx].tocsc()
    u[free_idx] = spla.splu(Aff).solve(rhs)

    resid = np.linalg.norm(Aff @ u[free_idx] - rhs)
    scale = np.linalg.norm(rhs)
    if scale > 0 and resid / scale > 1e-8:
        raise RuntimeError(
            f"direct solve failed: relative residual {resid / scale:.3e}")
    return u
