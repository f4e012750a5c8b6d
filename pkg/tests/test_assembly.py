import numpy as np
import pytest
import scipy.io
import scipy.linalg as la

from quadcurl.assembly import (ModelParams, assemble, assemble_blocks, assemble_full,
                               export_matrix_market, local_blocks, local_load, local_system)
from quadcurl.checks import random_tets
from quadcurl.element import dual_basis, tet_geometry
from quadcurl.mesh import Mesh, generate_box_mesh
from quadcurl.mms import broken_norms, sincube_exact
from quadcurl.solver import solve_cg
from quadcurl.space import FESpace


@pytest.fixture(scope="module")
def space1():
    return FESpace.from_mesh(generate_box_mesh(1))


@pytest.fixture(scope="module")
def space2():
    return FESpace.from_mesh(generate_box_mesh(2))


def test_params_validation():
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, np.nan), (1, 1, np.inf)]:
        with pytest.raises(ValueError):
            ModelParams(*bad)


def test_local_system_properties():
    geom = tet_geometry(random_tets(5, seed=2))
    basis = dual_basis(geom)
    A, b = local_system(basis, ModelParams())
    assert np.all(b == 0)
    assert np.abs(A - np.swapaxes(A, -1, -2)).max() <= 1e-13 * np.abs(A).max()
    for Ak in A:
        assert la.eigvalsh(Ak)[0] > 0


def test_gradient_members_have_no_curl_energy():
    geom = tet_geometry(random_tets(3, seed=4))
    blocks = local_blocks(dual_basis(geom))
    odd = np.arange(1, 12, 2)  # M2 duals are the gradients lam_i grad lam_j + lam_j grad lam_i
    for key in ("gradcurl", "curlcurl"):
        B = blocks[key]
        assert np.abs(B[:, odd]).max() < 1e-12 * np.abs(B).max()


def test_local_mass_matches_brute_force():
    """Mass block against a very fine composite rule, independent of the chosen degree."""
    from quadcurl.quadrature import composite_rule_tet
    geom = tet_geometry(random_tets(1, seed=5)[0])
    basis = dual_basis(geom)
    M = local_blocks(basis)["mass"]
    r = composite_rule_tet(6, 1)
    v = basis.values(r.points)
    ref = geom.volume * np.einsum("p,apd,bpd->ab", r.weights, v, v)
    assert np.allclose(M, ref, rtol=1e-12, atol=1e-14 * np.abs(ref).max())


def test_local_load_matches_basis_route():
    geom = tet_geometry(random_tets(4, seed=6))
    basis = dual_basis(geom)
    f = lambda x: np.stack([np.sin(x[:, 0]), x[:, 1] * x[:, 2], np.exp(x[:, 0] - x[:, 2])], axis=1)
    from quadcurl.quadrature import rule_tet
    r = rule_tet(8)
    x = geom.physical(r.points)
    fx = f(x.reshape(-1, 3)).reshape(x.shape)
    ref = geom.volume[:, None] * np.einsum("p,eapd,epd->ea", r.weights, basis.values(r.points), fx)
    assert np.allclose(local_load(basis, f), ref, rtol=1e-12, atol=1e-15)


def test_n1_system_spd(space1):
    sys_ = assemble(space1, ModelParams())
    assert sys_.A.shape == (14, 14)
    A = sys_.A.toarray()
    assert np.abs(A - A.T).max() <= 1e-13 * np.abs(A).max()
    assert la.eigvalsh(A)[0] > 0
    assert np.all(sys_.b == 0)


def test_zero_forcing_zero_solution(space2):
    sys_ = assemble(space2, ModelParams(), f=None)
    x, rep = solve_cg(sys_)
    assert rep.iterations == 0 and np.all(x == 0)


def test_gamma_changes_mass_only(space2):
    blocks = assemble_blocks(space2)
    A1 = assemble(space2, ModelParams(1, 1, 1), blocks=blocks).A
    A2 = assemble(space2, ModelParams(1, 1, 2), blocks=blocks).A
    free = space2.mask.free
    M = blocks["mass"][free][:, free]
    assert abs(A2 - A1 - M).max() < 1e-13 * abs(A1).max()


def test_coercivity_on_random_vectors(space2):
    blocks = assemble_blocks(space2)
    p = ModelParams(2.0, 3.0, 0.5)
    A = assemble_full(space2, p, blocks)
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.normal(size=space2.n_dofs)
        parts = [v @ (blocks[k] @ v) for k in ("gradcurl", "curlcurl", "mass")]
        assert min(parts) >= 0
        assert v @ (A @ v) >= min(p.alpha, p.beta, p.gamma) * sum(parts) * (1 - 1e-12)


def test_assembly_independent_of_element_order():
    m = generate_box_mesh(2)
    perm = np.random.default_rng(1).permutation(m.n_tets)
    s1 = FESpace.from_mesh(m)
    s2 = FESpace.from_mesh(Mesh(m.vertices, m.tets[perm]))
    A1 = assemble(s1, ModelParams()).A
    A2 = assemble(s2, ModelParams()).A
    assert abs(A1 - A2).max() <= 1e-14 * abs(A1).max()


def test_assembly_bit_stable(space2):
    A1 = assemble(space2, ModelParams()).A
    A2 = assemble(space2, ModelParams()).A
    assert np.array_equal(A1.data, A2.data) and np.array_equal(A1.indices, A2.indices)


def test_matrix_market_roundtrip(space1, tmp_path):
    sys_ = assemble(space1, ModelParams())
    path = tmp_path / "a.mtx"
    export_matrix_market(sys_, str(path))
    back = scipy.io.mmread(str(path)).toarray()
    A = sys_.A.toarray()
    # stored as symmetric: only one triangle survives, so compare to roundoff
    assert np.array_equal(back != 0, (A != 0) | (A.T != 0))
    assert np.abs(back - A).max() <= 1e-14 * np.abs(A).max()


def test_load_degree_8_vs_10():
    """Quadrature error of the load stays below 1% of the discretization error."""
    space = FESpace.from_mesh(generate_box_mesh(4))
    exact = sincube_exact()
    blocks = assemble_blocks(space)
    errs = []
    sols = []
    for deg in (8, 10):
        s = assemble(space, exact.params, exact.f, load_degree=deg, blocks=blocks)
        x, _ = solve_cg(s)
        sols.append(s.expand(x))
        errs.append(broken_norms(sols[-1], exact, space).total)
    diff = broken_norms(sols[0] - sols[1], None, space).total
    assert diff < 0.01 * errs[1]
