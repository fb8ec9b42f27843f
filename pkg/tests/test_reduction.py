import numpy as np
import pytest

from ddmr.mesh_fem import CellField, DiffusionProblem, build_mesh
from ddmr.partition import assemble_local, build_partition
from ddmr.reduction import (generate_solution_snapshots, interface_block_basis,
                            reduce_loads, reduce_matrices, split_snapshots,
                            svd_basis)


def constant_problem(mesh, f=10.0):
    return DiffusionProblem(CellField(np.ones(mesh.n_triangles)), f)


def draw_lognormal(mesh, scale=0.3):
    def draw(rng):
        eta = scale * rng.standard_normal(mesh.n_triangles)
        return eta, DiffusionProblem(CellField(np.exp(eta)), 10.0)
    return draw


def test_snapshots_deterministic_and_split():
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)
    snaps1 = generate_solution_snapshots(mesh, part, draw_lognormal(mesh), 5,
                                         np.random.default_rng(9))
    snaps2 = generate_solution_snapshots(mesh, part, draw_lognormal(mesh), 5,
                                         np.random.default_rng(9))
    for s in snaps1.interior:
        np.testing.assert_array_equal(snaps1.interior[s], snaps2.interior[s])
    for g in snaps1.groups:
        np.testing.assert_array_equal(snaps1.groups[g], snaps2.groups[g])
    # slot sizes match the partition
    for s, sub in enumerate(part.subdomains):
        assert snaps1.interior[s].shape == (sub.interior_nodes.size, 5)
    for g, grp in enumerate(part.groups):
        assert snaps1.groups[g].shape == (grp.size, 5)


def test_zero_variance_snapshots_rank_one():
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)

    def draw(rng):
        return np.zeros(1), constant_problem(mesh)

    snaps = generate_solution_snapshots(mesh, part, draw, 6,
                                        np.random.default_rng(0))
    X = snaps.interior[0]
    assert np.max(np.abs(X - X[:, [0]])) <= 1e-12
    V, sv = svd_basis(X, rank=2)
    assert sv[1] <= 1e-10 * sv[0]


def test_failed_snapshot_reports_sample_index():
    mesh = build_mesh(4)
    part = build_partition(mesh, 2, 2)
    calls = [0]

    def draw(rng):
        calls[0] += 1
        a = np.ones(mesh.n_triangles)
        if calls[0] == 3:
            a[:] = -1.0  # invalid coefficient on the third draw
        return np.zeros(1), DiffusionProblem(CellField(a), 1.0)

    with pytest.raises(RuntimeError, match="sample 2"):
        generate_solution_snapshots(mesh, part, draw, 5, np.random.default_rng(0))


def test_svd_basis_vertex_group():
    V, sv = svd_basis(np.array([[1.5, -2.0, 0.5]]), rank=1)
    np.testing.assert_array_equal(V, [[1.0]])
    assert sv[0] == pytest.approx(np.sqrt(1.5**2 + 4.0 + 0.25))


def test_svd_basis_selector_validation(rng):
    X = rng.standard_normal((6, 4))
    with pytest.raises(ValueError):
        svd_basis(X)
    with pytest.raises(ValueError):
        svd_basis(X, rank=2, energy=0.9)
    with pytest.raises(ValueError):
        svd_basis(X, rank=5)


def test_svd_basis_orthonormal_and_sign_fixed(rng):
    X = rng.standard_normal((30, 12))
    V, sv = svd_basis(X, rank=5)
    np.testing.assert_allclose(V.T @ V, np.eye(5), atol=1e-10)
    for k in range(5):
        assert V[np.argmax(np.abs(V[:, k])), k] > 0
    assert np.all(np.diff(sv) <= 0)


def test_svd_reconstruction_identity(rng):
    X = rng.standard_normal((20, 15))
    _, s_all = svd_basis(X, rank=15)
    for r in (2, 6, 10):
        V, _ = svd_basis(X, rank=r)
        lhs = np.linalg.norm(X - V @ (V.T @ X), "fro") ** 2 / np.linalg.norm(X, "fro") ** 2
        rhs = 1 - np.sum(s_all[:r] ** 2) / np.sum(s_all**2)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_svd_energy_mode(rng):
    X = np.diag([10.0, 1.0, 0.1, 0.01]) @ rng.standard_normal((4, 50))
    V, sv = svd_basis(X, energy=0.99)
    # 10^2 dominates: one or two modes reach 99 percent of the energy
    assert V.shape[1] <= 2


def test_monotone_reconstruction_error(rng):
    X = rng.standard_normal((25, 18))
    errs = []
    for r in range(1, 10):
        V, _ = svd_basis(X, rank=r)
        errs.append(np.linalg.norm(X - V @ (V.T @ X), "fro"))
    assert np.all(np.diff(errs) <= 1e-12)


def test_reduce_matrices_identity_projection(rng):
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)
    prob = DiffusionProblem(
        CellField(np.exp(0.3 * rng.standard_normal(mesh.n_triangles))), 3.0)
    local = assemble_local(mesh, part, prob, 0)
    n0, nb = local.A00.shape[0], local.Abb.shape[0]
    a00, a0b, ab0, abb = reduce_matrices(local, np.eye(n0), np.eye(nb))
    np.testing.assert_allclose(a00, local.A00.toarray(), atol=1e-14)
    np.testing.assert_allclose(abb, local.Abb.toarray(), atol=1e-14)
    # symmetry is preserved under congruence
    V0, _ = svd_basis(rng.standard_normal((n0, 12)), rank=4)
    Vb, _ = svd_basis(rng.standard_normal((nb, 12)), rank=3)
    r00, r0b, rb0, rbb = reduce_matrices(local, V0, Vb)
    np.testing.assert_allclose(r0b, rb0.T, atol=1e-12)
    np.testing.assert_allclose(r00, r00.T, atol=1e-12)


def test_reduce_matrices_shape_mismatch(rng):
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)
    local = assemble_local(mesh, part, constant_problem(mesh), 0)
    with pytest.raises(ValueError):
        reduce_matrices(local, np.eye(3), np.eye(local.Abb.shape[0]))


def test_reduce_loads(rng):
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)
    local = assemble_local(mesh, part, constant_problem(mesh, f=0.0), 0)
    n0, nb = local.f0.size, local.fb.size
    V0, _ = svd_basis(rng.standard_normal((n0, 10)), rank=4)
    Vb, _ = svd_basis(rng.standard_normal((nb, 10)), rank=3)
    f0h, fbh = reduce_loads(local, V0, Vb)
    np.testing.assert_array_equal(f0h, 0.0)
    np.testing.assert_array_equal(fbh, 0.0)
    # idempotence under the induced projection
    local2 = assemble_local(mesh, part, constant_problem(mesh, f=5.0), 0)
    f0h2, _ = reduce_loads(local2, V0, Vb)
    np.testing.assert_allclose(V0.T @ (V0 @ f0h2), f0h2, atol=1e-12)


def test_supg_lifting_enters_loads():
    # zero forcing but nonzero inflow data: the eliminated boundary columns
    # produce nonzero local loads
    from ddmr.mesh_fem import ConvectionProblem
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)
    one = CellField(np.ones(mesh.n_triangles))
    zero = CellField(np.zeros(mesh.n_triangles))
    local = assemble_local(mesh, part,
                           ConvectionProblem(one, zero, 1e-2, 0.0), 0)
    assert np.linalg.norm(local.f0) > 0


def test_interface_block_basis_layout(small_colored_model):
    model = small_colored_model
    part = model.partition
    s = 5
    vb = interface_block_basis(part, s, model.group_bases)
    sizes = [(model.group_bases[g].shape) for g in part.subdomains[s].group_ids]
    assert vb.shape == (sum(a for a, _ in sizes), sum(b for _, b in sizes))
    # shared groups are referenced, not copied: neighbors see the same object
    shared = set(part.subdomains[5].group_ids) & set(part.subdomains[6].group_ids)
    g = next(iter(shared))
    assert model.group_bases[g] is model.group_bases[g]


def test_split_snapshots_consistency(rng):
    mesh = build_mesh(8)
    part = build_partition(mesh, 2, 2)
    U = rng.standard_normal((mesh.n_nodes, 4))
    snaps = split_snapshots(part, U, rng.standard_normal((3, 4)))
    for s, sub in enumerate(part.subdomains):
        np.testing.assert_array_equal(snaps.interior[s], U[sub.interior_nodes])


def test_finer_partition_interface_decay():
    # singular values of edge-group snapshot matrices decay faster when the
    # partition is finer (shorter edges see smoother restrictions)
    mesh = build_mesh(64)
    rng = np.random.default_rng(2)
    from ddmr import random_field as rf
    centroids, areas = rf.grid_centroids(32)
    kl = rf.kl_decompose(centroids, areas, 0.25, 40)

    def draw(r):
        y = r.standard_normal(40)
        return y, DiffusionProblem(
            CellField(np.exp(0.2 * rf.field_on_mesh(kl, y, mesh).values)), 10.0)

    def mean_ratio(sxy, k):
        part = build_partition(mesh, sxy, sxy)
        snaps = generate_solution_snapshots(mesh, part, draw, 50,
                                            np.random.default_rng(5))
        ratios = []
        for g, grp in enumerate(part.groups):
            if grp.kind != "edge":
                continue
            _, sv = svd_basis(snaps.groups[g], rank=min(k, grp.size))
            ratios.append(sv[-1] / sv[0])
        return np.mean(ratios)

    assert mean_ratio(16, 3) < mean_ratio(8, 3)
