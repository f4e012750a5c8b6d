import numpy as np
import pytest

from quadcurl.dofmap import boundary_mask, build_dofmap, element_dofs
from quadcurl.element import apply_dofs, canonical_orientation, dof_vandermonde, tet_geometry
from quadcurl.mesh import Mesh, build_topology, generate_box_mesh
from quadcurl.space import FESpace

SINGLE = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2, 3]])


def setup(mesh):
    topo = build_topology(mesh)
    dm = build_dofmap(topo, mesh.tets)
    return topo, dm, boundary_mask(topo, dm)


def test_n1_counts():
    topo, dm, mask = setup(generate_box_mesh(1))
    assert dm.n_dofs == 2 * 19 + 2 * 18 == 74
    assert mask.n_free == 14
    assert mask.constrained.sum() == 60


def test_single_tet_all_constrained():
    _, dm, mask = setup(SINGLE)
    assert dm.n_dofs == 20 and mask.n_free == 0


def test_n2_free_count():
    topo, dm, mask = setup(generate_box_mesh(2))
    interior_edges = (~topo.boundary_edges).sum()
    interior_faces = (~topo.boundary_faces).sum()
    assert mask.n_free == 2 * interior_edges + 2 * interior_faces
    assert mask.n_edge_dofs == 2 * topo.boundary_edges.sum()


def test_element_dofs_distinct_and_ordered():
    topo, dm, _ = setup(generate_box_mesh(1))
    for t in range(6):
        ids, T = element_dofs(dm, t)
        assert len(set(ids)) == 20
        assert np.all(ids[:12] < 2 * dm.n_edges) and np.all(ids[12:] >= 2 * dm.n_edges)
        assert T.shape == (20, 20)


def test_shared_entities_same_ids():
    m = generate_box_mesh(2)
    topo, dm, _ = setup(m)
    for f in topo.interior_faces():
        t0, t1 = topo.face_tets[f]
        l0 = list(topo.tet_faces[t0]).index(f)
        l1 = list(topo.tet_faces[t1]).index(f)
        assert np.array_equal(dm.cell_dofs[t0, 12 + 2 * l0:14 + 2 * l0],
                              dm.cell_dofs[t1, 12 + 2 * l1:14 + 2 * l1])
    for e in range(topo.n_edges):
        owners, local = np.nonzero(topo.tet_edges == e)
        ids = {tuple(dm.cell_dofs[t, 2 * m:2 * m + 2]) for t, m in zip(owners, local)}
        assert ids == {(2 * e, 2 * e + 1)}


def quadratic_field(x):
    x, y, z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([y * z + x, x * x - z, 0.5 * y * y + x * z], axis=-1)


def quadratic_curl(x):
    x, y, z = x[..., 0], x[..., 1], x[..., 2]
    # curl of (yz + x, x^2 - z, y^2/2 + xz)
    return np.stack([y + 1, y - z, 2 * x - z], axis=-1)


def test_functionals_agree_across_shared_entities():
    m = generate_box_mesh(2)
    topo, dm, _ = setup(m)
    geom = tet_geometry(m.tet_vertices())
    values = {}
    for t in range(m.n_tets):
        d = apply_dofs(geom[t], quadratic_field, quadratic_curl, dm.orientation[t])
        for a, gid in enumerate(dm.cell_dofs[t]):
            values.setdefault(gid, []).append(d[a])
    worst = max(np.ptp(v) for v in values.values())
    assert worst < 1e-12
    assert len(values) == dm.n_dofs


def test_transform_maps_canonical_to_global():
    m = generate_box_mesh(1)
    _, dm, _ = setup(m)
    geom = tet_geometry(m.tet_vertices())
    for t in range(m.n_tets):
        _, T = element_dofs(dm, t)
        Vc = dof_vandermonde(geom[t], canonical_orientation())
        Vg = dof_vandermonde(geom[t], dm.orientation[t])
        assert np.allclose(Vg, T @ Vc, atol=1e-12)


def test_mask_removes_boundary_functionals():
    space = FESpace.from_mesh(generate_box_mesh(2))
    x = np.random.default_rng(0).normal(size=space.n_dofs)
    y = space.constrain(x)
    topo = space.topology
    be = np.flatnonzero(topo.boundary_edges)
    bf = np.flatnonzero(topo.boundary_faces)
    assert np.all(y[2 * be] == 0) and np.all(y[2 * be + 1] == 0)
    base = 2 * topo.n_edges
    assert np.all(y[base + 2 * bf] == 0) and np.all(y[base + 2 * bf + 1] == 0)
    assert np.array_equal(space.expand(x[space.mask.free]), y)


@pytest.mark.parametrize("n", [1, 3])
def test_space_chunks_cover(n):
    space = FESpace.from_mesh(generate_box_mesh(n))
    covered = np.concatenate([np.arange(space.mesh.n_tets)[sl] for sl in space.chunks(size=7)])
    assert np.array_equal(covered, np.arange(space.mesh.n_tets))
