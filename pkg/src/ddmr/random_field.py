"""Random field models: KL expansions, white noise, global-to-local projection.

Colored noise uses the Gaussian covariance kernel exp(-|x-x'|^2 / L^2),
discretized by cell-centroid collocation with area weights on a coarse
Cartesian cell grid.  Modes are piecewise constant on that grid and are
evaluated on the FE mesh by cell lookup, which keeps the dense eigenproblem
tractable independently of the FE resolution.

The global-to-local parameter map is a discrete least-squares fit at a fixed
set of uniform sample points per subdomain; with fixed points the map is a
precomputable linear operator, so offline and online projections agree
bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .mesh_fem import CellField, Mesh

__all__ = [
    "KLBasis",
    "WhiteNoisePartition",
    "ParamSample",
    "grid_centroids",
    "subdomain_cells",
    "kl_decompose",
    "sample_global",
    "field_on_mesh",
    "projection_points",
    "projection_matrix",
    "project_local",
    "white_noise_partition",
    "white_noise_field",
]


@dataclass(frozen=True)
class KLBasis:
    """Truncated KL basis on the global domain or on one subdomain.

    ``modes`` rows are L2-orthonormal with respect to the cell-area measure
    of the coarse grid; ``cells`` are linear ids (iy * grid_m + ix) of the
    grid cells covered by the domain.
    """

    domain_id: str             # "global" or "subdomain:<s>"
    grid_m: int                # coarse cells per side of the full square
    cells: np.ndarray          # (C,) linear cell ids
    lambdas: np.ndarray        # (N,) descending, >= 0
    modes: np.ndarray          # (N, C)
    L: float                   # correlation length

    @property
    def N(self) -> int:
        return self.lambdas.size

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Mode values at arbitrary points inside the domain, shape (N, P)."""
        m = self.grid_m
        ix = np.clip((points[:, 0] * m).astype(np.int64), 0, m - 1)
        iy = np.clip((points[:, 1] * m).astype(np.int64), 0, m - 1)
        lut = np.full(m * m, -1, dtype=np.int64)
        lut[self.cells] = np.arange(self.cells.size)
        pos = lut[iy * m + ix]
        if np.any(pos < 0):
            raise ValueError("point outside the domain of this KL basis")
        return self.modes[:, pos]


@dataclass(frozen=True)
class WhiteNoisePartition:
    n_pieces: int
    piece_of_triangle: np.ndarray
    sigma: float


@dataclass(frozen=True)
class ParamSample:
    y: np.ndarray
    y_s: list
    gamma_bound: float


def grid_centroids(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Centroids and areas of the m x m Cartesian cell grid on [0,1]^2."""
    c = (np.arange(m) + 0.5) / m
    xx, yy = np.meshgrid(c, c, indexing="xy")
    centroids = np.column_stack([xx.ravel(), yy.ravel()])
    areas = np.full(m * m, 1.0 / (m * m))
    return centroids, areas


def subdomain_cells(m: int, Sx: int, Sy: int, s: int) -> np.ndarray:
    """Linear ids of grid cells inside block s of an Sx x Sy partition."""
    if m % Sx or m % Sy:
        raise ValueError(f"block counts ({Sx}, {Sy}) must divide grid m={m}")
    mx, my = m // Sx, m // Sy
    sx_, sy_ = s % Sx, s // Sx
    ix = np.arange(sx_ * mx, (sx_ + 1) * mx)
    iy = np.arange(sy_ * my, (sy_ + 1) * my)
    return (iy[:, None] * m + ix[None, :]).ravel()


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # first entry of largest magnitude made positive, for serialization stability
    idx = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(vecs.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vecs * signs[:, None]


def kl_decompose(centroids: np.ndarray, areas: np.ndarray, L: float, N: int,
                 domain_id: str = "global", grid_m: int | None = None,
                 cells: np.ndarray | None = None) -> KLBasis:
    """Galerkin eigen-decomposition of exp(-|x-x'|^2/L^2) on piecewise constants.

    Solves the symmetrized problem D^{1/2} K D^{1/2} z = lambda z with
    D = diag(areas) and returns modes xi = D^{-1/2} z, which are orthonormal
    under the cell-measure inner product.
    """
    if L <= 0:
        raise ValueError(f"correlation length must be positive, got {L}")
    C = centroids.shape[0]
    if N > C:
        raise ValueError(f"requested {N} modes but only {C} cells")
    sq = np.sum(centroids**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (centroids @ centroids.T), 0.0)
    K = np.exp(-d2 / L**2)
    w = np.sqrt(areas)
    B = K * np.outer(w, w)
    lam, z = sla.eigh(B)
    order = np.argsort(lam)[::-1][:N]
    lam = np.maximum(lam[order], 0.0)
    modes = _fix_signs((z[:, order] / w[:, None]).T)
    if grid_m is None:
        grid_m = int(round(np.sqrt(C)))
    if cells is None:
        cells = np.arange(C, dtype=np.int64)
    return KLBasis(domain_id, grid_m, np.asarray(cells, dtype=np.int64),
                   lam, modes, L)


def field_on_mesh(kl: KLBasis, y: np.ndarray, mesh: Mesh) -> CellField:
    """Realization sum_n sqrt(lambda_n) xi_n y_n as a per-triangle field."""
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    vals = (np.sqrt(kl.lambdas) * y) @ kl.evaluate(centroids)
    return CellField(vals)


def sample_global(kl: KLBasis, mesh: Mesh, rng: np.random.Generator):
    """Draw y ~ N(0, I) and return it with the realized field on the mesh."""
    y = rng.standard_normal(kl.N)
    return y, field_on_mesh(kl, y, mesh)


def projection_points(Sx: int, Sy: int, s: int, T: int,
                      rng: np.random.Generator) -> np.ndarray:
    """T uniform sample points inside block s, drawn once and stored."""
    sx_, sy_ = s % Sx, s // Sx
    pts = rng.uniform(size=(T, 2))
    pts[:, 0] = (sx_ + pts[:, 0]) / Sx
    pts[:, 1] = (sy_ + pts[:, 1]) / Sy
    return pts


def projection_matrix(global_kl: KLBasis, local_kl: KLBasis,
                      points: np.ndarray) -> np.ndarray:
    """Linear map y -> y_s solving the pointwise least squares via the
    normal system (Xi' Xi) y_s = Xi' eta_N."""
    T = points.shape[0]
    if T <= local_kl.N:
        raise ValueError(
            f"need more projection points than local modes ({T} <= {local_kl.N}); "
            "increase T")
    Xi = (np.sqrt(local_kl.lambdas)[:, None] * local_kl.evaluate(points)).T
    G = (np.sqrt(global_kl.lambdas)[:, None] * global_kl.evaluate(points)).T
    gram = Xi.T @ Xi
    try:
        return np.ascontiguousarray(sla.solve(gram, Xi.T @ G, assume_a="pos"))
    except sla.LinAlgError as exc:
        raise ValueError(
            f"singular normal matrix in local projection: {exc}; "
            "increase the number of projection points") from exc


def project_local(global_kl: KLBasis, local_kl: KLBasis, y: np.ndarray,
                  T: int, rng: np.random.Generator, Sx: int, Sy: int,
                  s: int) -> np.ndarray:
    pts = projection_points(Sx, Sy, s, T, rng)
    return projection_matrix(global_kl, local_kl, pts) @ y


def white_noise_partition(mesh: Mesh, gx: int, gy: int,
                          sigma: float) -> WhiteNoisePartition:
    """Piecewise partition of the triangles into a gx x gy grid of pieces."""
    n = mesh.n_cells_per_side
    if n % gx or n % gy:
        raise ValueError(f"piece counts ({gx}, {gy}) must divide mesh n={n}")
    cell = np.arange(mesh.n_triangles) // 2
    cx, cy = cell % n, cell // n
    piece = (cy // (n // gy)) * gx + (cx // (n // gx))
    return WhiteNoisePartition(gx * gy, piece, sigma)


def white_noise_field(wn: WhiteNoisePartition, y: np.ndarray) -> CellField:
    if y.shape[0] != wn.n_pieces:
        raise ValueError(f"expected {wn.n_pieces} piece values, got {y.shape[0]}")
    return CellField(np.asarray(y, dtype=float)[wn.piece_of_triangle])
