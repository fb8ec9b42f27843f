"""Offline training and online evaluation of the reduced model.

The offline procedure decomposes the random field (global and per-subdomain
KL for colored noise, aligned pieces for white noise), runs full FE solves to
collect solution snapshots, builds SVD bases per interface group and per
subdomain interior, assembles local-parameter training systems, and fits
Legendre surrogates to every entry of the reduced local blocks and load
vectors.

The online procedure maps a global parameter draw to local parameters,
evaluates the surrogates, forms reduced local Schur complements, solves the
condensed reduced interface system and recovers the interior coefficients.
No step on this path touches an array whose size grows with the FE mesh;
field reconstruction is a separate O(J) post-processing step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import random_field as rf
from ._container import read_container, write_container
from .config import RunConfig, config_from_dict
from .mesh_fem import (CellField, ConvectionProblem, DiffusionProblem, Mesh,
                       assemble, build_mesh, dirichlet_values, solve_full)
from .partition import (DomainPartition, assemble_local, build_partition)
from .reduction import (generate_solution_snapshots, interface_block_basis,
                        reduce_loads, reduce_matrices, svd_basis)
from .surrogate import (SurrogateCoefficients, build_index_set, eval_surrogate,
                        fit_dls)

__all__ = [
    "ReducedModel",
    "SolveResult",
    "offline_train",
    "online_solve",
    "online_solve_exact",
    "reconstruct",
    "save_model",
    "load_model",
    "truncate_model",
    "refit_surrogate",
    "refit_surrogate_many",
    "make_problem",
    "global_field",
    "draw_global",
    "solve_reference",
]

MODEL_FORMAT_VERSION = 1

# the 1/5 amplitude scaling of the experiment setup: a = exp(eta/5) for the
# diffusion problem, b = (cos(eta/5), sin(eta/5)) for the transport problem
FIELD_SCALE = 0.2


@dataclass
class SolveResult:
    cb: np.ndarray                 # global reduced interface coefficients
    c0s: list                      # per-subdomain interior coefficients
    timings: dict                  # seconds per online stage
    clamped: int                   # local parameter entries clamped to the box
    fingerprint: str
    alloc_sizes: list              # element counts of coefficient-path arrays


@dataclass
class ReducedModel:
    config: RunConfig
    # random-field model
    global_kl: rf.KLBasis | None
    local_kls: list | None
    proj_points: list | None       # (T, 2) per subdomain, fixed at training
    proj_mats: list | None         # (N_s, N) per subdomain
    # reduced bases (interface bases are shared by neighbors)
    group_bases: list
    group_singvals: list
    interior_bases: list
    interior_singvals: list
    # reference projected loads (exactly the loads for deterministic f)
    loads: list
    surrogates: list
    dirichlet_nodes: np.ndarray
    dirichlet_vals: np.ndarray
    stage_costs: list | None = field(default=None, compare=False)
    _mesh: Mesh | None = field(default=None, repr=False, compare=False)
    _partition: DomainPartition | None = field(default=None, repr=False, compare=False)
    _wn: rf.WhiteNoisePartition | None = field(default=None, repr=False, compare=False)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    @property
    def mesh(self) -> Mesh:
        if self._mesh is None:
            self._mesh = build_mesh(self.config.mesh_n)
        return self._mesh

    @property
    def partition(self) -> DomainPartition:
        if self._partition is None:
            self._partition = build_partition(self.mesh, self.config.sx, self.config.sy)
        return self._partition

    @property
    def white_noise(self) -> rf.WhiteNoisePartition:
        if self._wn is None:
            self._wn = rf.white_noise_partition(
                self.mesh, self.config.sx, self.config.sy, self.config.sigma)
        return self._wn

    # --- reduced condensed-system layout -------------------------------
    @property
    def group_ranks(self) -> np.ndarray:
        return np.array([b.shape[1] for b in self.group_bases], dtype=np.int64)

    @property
    def group_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.group_ranks)])

    @property
    def n_reduced_interface(self) -> int:
        return int(self.group_offsets[-1])

    def reduced_columns(self, s: int) -> np.ndarray:
        offs = self.group_offsets
        gids = self.partition.subdomains[s].group_ids
        if not gids:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.arange(offs[g], offs[g + 1]) for g in gids])


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


# --------------------------------------------------------------------------
# sample -> coefficient field -> FE problem
# --------------------------------------------------------------------------

def draw_global(config: RunConfig, rng: np.random.Generator) -> np.ndarray:
    """One Gaussian draw of the global parameter vector."""
    if config.noise == "white":
        return config.sigma * rng.standard_normal(config.n_subdomains)
    return rng.standard_normal(config.n_global_modes)


def global_field(model: ReducedModel, y: np.ndarray) -> CellField:
    if model.config.noise == "white":
        return rf.white_noise_field(model.white_noise, y)
    return rf.field_on_mesh(model.global_kl, y, model.mesh)


def make_problem(config: RunConfig, eta: CellField):
    """FE problem for one realization of the underlying field eta."""
    if config.problem == "diffusion":
        return DiffusionProblem(CellField(np.exp(FIELD_SCALE * eta.values)),
                                config.forcing)
    theta = FIELD_SCALE * eta.values
    return ConvectionProblem(CellField(np.cos(theta)), CellField(np.sin(theta)),
                             config.eps, config.forcing)


def solve_reference(model: ReducedModel, y: np.ndarray) -> np.ndarray:
    """Full FE solve for the same global realization (the validation truth)."""
    problem = make_problem(model.config, global_field(model, y))
    return solve_full(assemble(model.mesh, problem))


def _local_problem(model: ReducedModel, s: int, ys: np.ndarray):
    """FE problem whose field is the local expansion on subdomain s.

    Triangles outside the subdomain carry a zero field value; only the
    subdomain's triangles are read by the local assembly.
    """
    mesh = model.mesh
    eta = np.zeros(mesh.n_triangles)
    tris = model.partition.subdomains[s].triangles
    if model.config.noise == "white":
        eta[tris] = ys[0]
    else:
        lkl = model.local_kls[s]
        centroids = mesh.nodes[mesh.triangles[tris]].mean(axis=1)
        eta[tris] = (np.sqrt(lkl.lambdas) * ys) @ lkl.evaluate(centroids)
    return make_problem(model.config, CellField(eta))


# --------------------------------------------------------------------------
# offline
# --------------------------------------------------------------------------

def _dirichlet_dict(model: ReducedModel) -> dict:
    return {int(i): float(v) for i, v in
            zip(model.dirichlet_nodes, model.dirichlet_vals)}


def _training_data(model: ReducedModel, s: int, k_matrix: int, n_local: int,
                   dirichlet: dict | None = None):
    """Uniform local-parameter draws with their exactly reduced blocks."""
    config = model.config
    gamma = config.gamma_bound
    rng = _rng(config.seed, 3, s)
    ys = rng.uniform(-gamma, gamma, size=(k_matrix, n_local))
    v0 = model.interior_bases[s]
    vb = interface_block_basis(model.partition, s, model.group_bases)
    if dirichlet is None:
        dirichlet = _dirichlet_dict(model)

    blocks, loads = [], []
    for k in range(k_matrix):
        local = assemble_local(model.mesh, model.partition,
                               _local_problem(model, s, ys[k]), s,
                               dirichlet=dirichlet)
        blocks.append(reduce_matrices(local, v0, vb))
        loads.append(reduce_loads(local, v0, vb))
    return ys, blocks, loads


def _fit_subdomain_surrogate(model: ReducedModel, s: int,
                             k_matrix: int, n_local: int, p: int,
                             dirichlet: dict | None = None):
    """Training data and DLS fit for one subdomain's reduced blocks."""
    config = model.config
    gamma = config.gamma_bound
    if gamma == 0.0:
        p = 0  # zero-variance noise: only the constant term is identifiable
    ys, blocks, loads = _training_data(model, s, k_matrix, n_local, dirichlet)
    lambdas = None if config.noise == "white" else model.local_kls[s].lambdas[:n_local]
    idxset = build_index_set(n_local, p, lambdas)
    return fit_dls(ys, blocks, loads, idxset, gamma)


def offline_train(config: RunConfig, progress=None,
                  fit_surrogate: bool = True) -> ReducedModel:
    """Run the full offline procedure and return a self-contained model.

    Stage wall times are recorded on ``model.stage_costs`` as
    ``(stage, seconds, fe_units)`` tuples; they are not serialized, so
    retraining with the same config and seed writes byte-identical files.
    """
    def log(msg):
        if progress:
            progress(msg)

    mesh = build_mesh(config.mesh_n)
    partition = build_partition(mesh, config.sx, config.sy)
    stage_costs = []

    def staged(name, fn):
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        stage_costs.append([name, dt])
        log(f"stage {name}: {dt:.2f}s")
        return out

    model = ReducedModel(
        config=config, global_kl=None, local_kls=None, proj_points=None,
        proj_mats=None, group_bases=[], group_singvals=[], interior_bases=[],
        interior_singvals=[], loads=[], surrogates=[],
        dirichlet_nodes=np.empty(0, np.int64), dirichlet_vals=np.empty(0),
        _mesh=mesh, _partition=partition,
    )

    # one expensive FE simulation = the cost unit for all reports
    unit_problem = make_problem(config, CellField(np.zeros(mesh.n_triangles)))
    unit_sys = assemble(mesh, unit_problem)
    t0 = time.perf_counter()
    solve_full(unit_sys)
    fe_unit = time.perf_counter() - t0

    dvals = dirichlet_values(mesh, unit_problem)
    model.dirichlet_nodes = np.fromiter(dvals.keys(), dtype=np.int64)
    model.dirichlet_vals = np.fromiter(dvals.values(), dtype=float)

    if config.noise == "colored":
        def kl_stage():
            m = config.kl_grid
            centroids, areas = rf.grid_centroids(m)
            model.global_kl = rf.kl_decompose(
                centroids, areas, config.corr_length, config.n_global_modes)
            model.local_kls, model.proj_points, model.proj_mats = [], [], []
            T = max(10 * config.n_local_modes, 50)
            for s in range(config.n_subdomains):
                cells = rf.subdomain_cells(m, config.sx, config.sy, s)
                lkl = rf.kl_decompose(centroids[cells], areas[cells],
                                      config.corr_length, config.n_local_modes,
                                      domain_id=f"subdomain:{s}", grid_m=m,
                                      cells=cells)
                pts = rf.projection_points(config.sx, config.sy, s, T,
                                           _rng(config.seed, 2, s))
                model.local_kls.append(lkl)
                model.proj_points.append(pts)
                model.proj_mats.append(
                    rf.projection_matrix(model.global_kl, lkl, pts))
        staged("kl_expansion", kl_stage)

    def draw_problem(rng):
        y = draw_global(config, rng)
        return y, make_problem(config, global_field(model, y))

    snapshots = staged("fe_solves", lambda: generate_solution_snapshots(
        mesh, partition, draw_problem, config.k_solution, _rng(config.seed, 1)))

    def svd_interfaces():
        for g, grp in enumerate(partition.groups):
            X = snapshots.groups[g]
            rank = min(config.m_interface, X.shape[0], X.shape[1])
            V, sv = svd_basis(X, rank=rank)
            model.group_bases.append(V)
            model.group_singvals.append(sv)
    staged("svd_interfaces", svd_interfaces)

    def svd_subdomains():
        for s in range(config.n_subdomains):
            X = snapshots.interior[s]
            rank = min(config.m_interior, X.shape[0], X.shape[1])
            V, sv = svd_basis(X, rank=rank)
            model.interior_bases.append(V)
            model.interior_singvals.append(sv)
    staged("svd_subdomains", svd_subdomains)

    if fit_surrogate:
        def reference_loads():
            for s in range(config.n_subdomains):
                local = assemble_local(mesh, partition,
                                       _local_problem(model, s, np.zeros(config.local_dim)), s,
                                       dirichlet=dvals)
                vb = interface_block_basis(partition, s, model.group_bases)
                model.loads.append(reduce_loads(local, model.interior_bases[s], vb))
        staged("projected_loads", reference_loads)

        def fit_all():
            for s in range(config.n_subdomains):
                model.surrogates.append(_fit_subdomain_surrogate(
                    model, s, config.k_matrix, config.local_dim,
                    config.poly_order, dirichlet=dvals))
        staged("training_and_surrogate", fit_all)

    model.stage_costs = [(name, dt, dt / fe_unit) for name, dt in stage_costs]
    model.stage_costs.append(("fe_unit", fe_unit, 1.0))
    return model


# --------------------------------------------------------------------------
# online
# --------------------------------------------------------------------------

def project_parameters(model: ReducedModel, y: np.ndarray):
    """Map the global draw to clamped local parameters per subdomain."""
    gamma = model.config.gamma_bound
    clamped = 0
    ys_list = []
    if model.config.noise == "white":
        for s in range(model.config.n_subdomains):
            ys_list.append(np.array([y[s]]))
    else:
        for P in model.proj_mats:
            ys_list.append(P @ y)
    for i, ys in enumerate(ys_list):
        over = np.abs(ys) > gamma
        if np.any(over):
            clamped += int(np.count_nonzero(over))
            ys_list[i] = np.clip(ys, -gamma, gamma)
    return ys_list, clamped


def _reduced_algebra(model: ReducedModel, blocks: list, loads: list,
                     timings: dict | None = None, alloc: list | None = None):
    """Reduced Schur assembly, interface solve, interior recovery.

    ``blocks[s]`` holds (a00, a0b, ab0, abb) and ``loads[s]`` (f0h, fbh) in
    reduced coordinates; shared by the surrogate path and the exact-block
    oracle path.
    """
    S = model.config.n_subdomains
    nR = model.n_reduced_interface
    t0 = time.perf_counter()
    B = np.zeros((nR, nR))
    g = np.zeros(nR)
    lus = []
    for s in range(S):
        a00, a0b, ab0, abb = blocks[s]
        f0h, fbh = loads[s]
        try:
            lu = sla.lu_factor(a00)
        except sla.LinAlgError as exc:
            raise RuntimeError(f"singular reduced interior block of subdomain {s}: "
                               f"{exc}") from exc
        Bs = abb - ab0 @ sla.lu_solve(lu, a0b)
        gs = fbh - ab0 @ sla.lu_solve(lu, f0h)
        cols = model.reduced_columns(s)
        B[np.ix_(cols, cols)] += Bs
        np.add.at(g, cols, gs)
        lus.append(lu)
        if alloc is not None:
            alloc.extend([a00.size, a0b.size, abb.size, Bs.size])
    if timings is not None:
        timings["t_schur"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if nR > 0:
        try:
            cb = sla.solve(B, g)
        except sla.LinAlgError as exc:
            raise RuntimeError(f"singular global reduced Schur system: {exc}") from exc
    else:
        cb = np.zeros(0)
    if timings is not None:
        timings["t_solve"] = time.perf_counter() - t0
    if alloc is not None:
        alloc.extend([B.size, cb.size])

    t0 = time.perf_counter()
    c0s = []
    for s in range(S):
        _, a0b, _, _ = blocks[s]
        f0h, _ = loads[s]
        cb_s = cb[model.reduced_columns(s)]
        c0s.append(sla.lu_solve(lus[s], f0h - a0b @ cb_s))
        if alloc is not None:
            alloc.append(c0s[-1].size)
    if timings is not None:
        timings["t_recover"] = time.perf_counter() - t0
    return cb, c0s


def online_solve(model: ReducedModel, y: np.ndarray) -> SolveResult:
    """Algorithm-2-style evaluation at a new global parameter draw."""
    if y.shape[0] != model.config.global_dim:
        raise ValueError(f"expected parameter vector of length "
                         f"{model.config.global_dim}, got {y.shape[0]}")
    timings: dict = {}
    alloc: list = [int(y.size)]

    t0 = time.perf_counter()
    ys_list, clamped = project_parameters(model, y)
    timings["t_project"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    blocks, loads = [], []
    for s, ys in enumerate(ys_list):
        a00, a0b, ab0, abb, f0h, fbh = eval_surrogate(model.surrogates[s], ys)
        blocks.append((a00, a0b, ab0, abb))
        loads.append((f0h, fbh))
        alloc.append(ys.size)
    timings["t_eval"] = time.perf_counter() - t0

    cb, c0s = _reduced_algebra(model, blocks, loads, timings, alloc)
    return SolveResult(cb, c0s, timings, clamped, model.fingerprint, alloc)


def online_solve_exact(model: ReducedModel, y: np.ndarray,
                       project: bool = False) -> SolveResult:
    """Oracle path: reduced algebra on exactly assembled reduced blocks.

    With ``project=False`` the local systems are assembled from the global
    field realization (no local-projection error); with ``project=True`` the
    projected local expansions are used, isolating the surrogate error.
    """
    timings: dict = {}
    if project:
        ys_list, clamped = project_parameters(model, y)
    else:
        clamped = 0
    eta = global_field(model, y)
    problem = make_problem(model.config, eta)
    blocks, loads = [], []
    for s in range(model.config.n_subdomains):
        if project:
            local_problem = _local_problem(model, s, ys_list[s])
        else:
            local_problem = problem
        local = assemble_local(model.mesh, model.partition, local_problem, s)
        v0 = model.interior_bases[s]
        vb = interface_block_basis(model.partition, s, model.group_bases)
        blocks.append(reduce_matrices(local, v0, vb))
        loads.append(reduce_loads(local, v0, vb))
    cb, c0s = _reduced_algebra(model, blocks, loads, timings)
    return SolveResult(cb, c0s, timings, clamped, model.fingerprint, [])


def reconstruct(model: ReducedModel, result: SolveResult) -> np.ndarray:
    """Expand reduced coefficients to the nodal field (O(J), post-processing)."""
    if result.fingerprint != model.fingerprint:
        raise ValueError("solve result does not belong to this model")
    u = np.zeros(model.mesh.n_nodes)
    u[model.dirichlet_nodes] = model.dirichlet_vals
    offs = model.group_offsets
    for g, grp in enumerate(model.partition.groups):
        u[grp.nodes] = model.group_bases[g] @ result.cb[offs[g]:offs[g + 1]]
    for s, sub in enumerate(model.partition.subdomains):
        u[sub.interior_nodes] = model.interior_bases[s] @ result.c0s[s]
    return u


# --------------------------------------------------------------------------
# model derivation (knob sweeps without repeating expensive stages)
# --------------------------------------------------------------------------

def truncate_model(model: ReducedModel, m_interior: int | None = None,
                   m_interface: int | None = None) -> ReducedModel:
    """Model with bases truncated to leading columns.

    Because the surrogate is fitted entrywise and truncation keeps leading
    basis columns, the coefficient stacks of the truncated model are exactly
    the corresponding sub-blocks of the trained stacks.
    """
    cfg = model.config
    m0 = cfg.m_interior if m_interior is None else m_interior
    mb = cfg.m_interface if m_interface is None else m_interface
    if m0 > cfg.m_interior or mb > cfg.m_interface:
        raise ValueError("cannot truncate beyond the trained ranks")

    group_bases = [b[:, :min(mb, b.shape[1])] for b in model.group_bases]
    group_ranks_old = [b.shape[1] for b in model.group_bases]

    interior_bases, loads, surrogates = [], [], []
    for s in range(cfg.n_subdomains):
        v0_rank = min(m0, model.interior_bases[s].shape[1])
        interior_bases.append(model.interior_bases[s][:, :v0_rank])
        # local interface slot selection: leading columns of each group block
        idx, off = [], 0
        for g in model.partition.subdomains[s].group_ids:
            keep = group_bases[g].shape[1]
            idx.extend(range(off, off + keep))
            off += group_ranks_old[g]
        idx = np.asarray(idx, dtype=np.int64)
        sc = model.surrogates[s]
        surrogates.append(SurrogateCoefficients(
            sc.index_set, sc.gamma,
            k00=sc.k00[:, :v0_rank, :v0_rank],
            k0b=sc.k0b[:, :v0_rank, :][:, :, idx],
            kb0=sc.kb0[:, idx, :][:, :, :v0_rank],
            kbb=sc.kbb[:, idx, :][:, :, idx],
            kf0=sc.kf0[:, :v0_rank],
            kfb=sc.kfb[:, idx],
        ))
        f0h, fbh = model.loads[s]
        loads.append((f0h[:v0_rank], fbh[idx]))

    return replace(model, config=replace(cfg, m_interior=m0, m_interface=mb),
                   group_bases=group_bases,
                   group_singvals=[sv[:min(mb, sv.size)] for sv in model.group_singvals],
                   interior_bases=interior_bases,
                   interior_singvals=[sv[:min(m0, sv.size)]
                                      for sv in model.interior_singvals],
                   loads=loads, surrogates=surrogates, stage_costs=None)


def refit_surrogate(model: ReducedModel, n_local_modes: int | None = None,
                    poly_order: int | None = None) -> ReducedModel:
    """Model with the surrogate retrained at a different N_s or p.

    Reuses the expensive offline outputs (snapshots are not touched: the
    bases stay fixed); only the local-parameter training systems are
    reassembled and refitted.  Seeds match the original training, so a refit
    at the trained knob values reproduces the trained surrogate.
    """
    cfg = model.config
    ns = cfg.local_dim if n_local_modes is None else n_local_modes
    p = cfg.poly_order if poly_order is None else poly_order
    if cfg.noise == "white" and ns != 1:
        raise ValueError("white noise models have a fixed local dimension of 1")
    if cfg.noise == "colored" and ns > cfg.n_local_modes:
        raise ValueError("cannot refit beyond the trained local KL truncation")

    new = replace(model, surrogates=[], stage_costs=None)
    if cfg.noise == "colored":
        new.local_kls = [replace(k, lambdas=k.lambdas[:ns], modes=k.modes[:ns])
                         for k in model.local_kls]
        new.proj_mats = [rf.projection_matrix(model.global_kl, lkl, pts)
                         for lkl, pts in zip(new.local_kls, model.proj_points)]
        new.config = replace(cfg, n_local_modes=ns, poly_order=p)
    else:
        new.config = replace(cfg, poly_order=p)

    dirichlet = _dirichlet_dict(model)
    for s in range(cfg.n_subdomains):
        new.surrogates.append(_fit_subdomain_surrogate(
            new, s, cfg.k_matrix, ns, p, dirichlet=dirichlet))
    return new


def refit_surrogate_many(model: ReducedModel, poly_orders: list) -> list:
    """Surrogates at several polynomial orders from one pass of assembly.

    The training systems depend on the local dimension but not on the order,
    so each subdomain's blocks are assembled once and fitted per order.
    Returns ``[(p, model_p), ...]`` in the given order.
    """
    cfg = model.config
    ns = cfg.local_dim
    gamma = cfg.gamma_bound
    dirichlet = _dirichlet_dict(model)
    per_order: dict = {p: [] for p in poly_orders}
    for s in range(cfg.n_subdomains):
        ys, blocks, loads = _training_data(model, s, cfg.k_matrix, ns, dirichlet)
        lambdas = None if cfg.noise == "white" else model.local_kls[s].lambdas
        for p in poly_orders:
            idxset = build_index_set(ns, 0 if gamma == 0.0 else p, lambdas)
            per_order[p].append(fit_dls(ys, blocks, loads, idxset, gamma))
    return [(p, replace(model, config=replace(cfg, poly_order=p),
                        surrogates=per_order[p], stage_costs=None))
            for p in poly_orders]


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def save_model(model: ReducedModel, path) -> None:
    cfg = model.config
    arrays = {
        "dirichlet/nodes": model.dirichlet_nodes,
        "dirichlet/values": model.dirichlet_vals,
    }
    for g, (V, sv) in enumerate(zip(model.group_bases, model.group_singvals)):
        arrays[f"group/{g:05d}/basis"] = V
        arrays[f"group/{g:05d}/singvals"] = sv
    for s in range(cfg.n_subdomains):
        tag = f"sub/{s:05d}"
        arrays[f"{tag}/basis"] = model.interior_bases[s]
        arrays[f"{tag}/singvals"] = model.interior_singvals[s]
        arrays[f"{tag}/load0"] = model.loads[s][0]
        arrays[f"{tag}/loadb"] = model.loads[s][1]
        sc = model.surrogates[s]
        arrays[f"{tag}/indices"] = sc.index_set.indices
        arrays[f"{tag}/weights"] = sc.index_set.weights
        for name in ("k00", "k0b", "kb0", "kbb", "kf0", "kfb"):
            arrays[f"{tag}/{name}"] = getattr(sc, name)
        if cfg.noise == "colored":
            arrays[f"{tag}/kl_lambdas"] = model.local_kls[s].lambdas
            arrays[f"{tag}/kl_modes"] = model.local_kls[s].modes
            arrays[f"{tag}/kl_cells"] = model.local_kls[s].cells
            arrays[f"{tag}/proj_points"] = model.proj_points[s]
            arrays[f"{tag}/proj_mat"] = model.proj_mats[s]
    if cfg.noise == "colored":
        arrays["kl/lambdas"] = model.global_kl.lambdas
        arrays["kl/modes"] = model.global_kl.modes

    import json
    metadata = {
        "model_version": MODEL_FORMAT_VERSION,
        "config": json.loads(cfg.to_json()),
        "fingerprint": cfg.fingerprint,
        "n_groups": len(model.group_bases),
    }
    write_container(path, metadata, arrays)


def load_model(path) -> ReducedModel:
    metadata, arrays = read_container(path)
    if metadata.get("model_version") != MODEL_FORMAT_VERSION:
        raise IOError(f"unsupported model version {metadata.get('model_version')}")
    cfg = config_from_dict(metadata["config"])

    group_bases, group_singvals = [], []
    for g in range(metadata["n_groups"]):
        group_bases.append(arrays[f"group/{g:05d}/basis"])
        group_singvals.append(arrays[f"group/{g:05d}/singvals"])

    global_kl = None
    local_kls = proj_points = proj_mats = None
    if cfg.noise == "colored":
        m = cfg.kl_grid
        global_kl = rf.KLBasis("global", m, np.arange(m * m, dtype=np.int64),
                               arrays["kl/lambdas"], arrays["kl/modes"],
                               cfg.corr_length)
        local_kls, proj_points, proj_mats = [], [], []

    interior_bases, interior_singvals, loads, surrogates = [], [], [], []
    for s in range(cfg.n_subdomains):
        tag = f"sub/{s:05d}"
        interior_bases.append(arrays[f"{tag}/basis"])
        interior_singvals.append(arrays[f"{tag}/singvals"])
        loads.append((arrays[f"{tag}/load0"], arrays[f"{tag}/loadb"]))
        idx = arrays[f"{tag}/indices"]
        idxset_weights = arrays[f"{tag}/weights"]
        from .surrogate import IndexSet
        idxset = IndexSet(idx.shape[1], cfg.poly_order, idxset_weights, idx)
        surrogates.append(SurrogateCoefficients(
            idxset, cfg.gamma_bound,
            *(arrays[f"{tag}/{name}"]
              for name in ("k00", "k0b", "kb0", "kbb", "kf0", "kfb"))))
        if cfg.noise == "colored":
            local_kls.append(rf.KLBasis(
                f"subdomain:{s}", cfg.kl_grid, arrays[f"{tag}/kl_cells"],
                arrays[f"{tag}/kl_lambdas"], arrays[f"{tag}/kl_modes"],
                cfg.corr_length))
            proj_points.append(arrays[f"{tag}/proj_points"])
            proj_mats.append(arrays[f"{tag}/proj_mat"])

    return ReducedModel(
        config=cfg, global_kl=global_kl, local_kls=local_kls,
        proj_points=proj_points, proj_mats=proj_mats,
        group_bases=group_bases, group_singvals=group_singvals,
        interior_bases=interior_bases, interior_singvals=interior_singvals,
        loads=loads, surrogates=surrogates,
        dirichlet_nodes=arrays["dirichlet/nodes"],
        dirichlet_vals=arrays["dirichlet/values"],
    )
