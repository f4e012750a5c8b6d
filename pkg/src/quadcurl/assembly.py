"""Local matrices and global assembly of the discrete quad-curl problem.

    a_h(u, v) = sum_K alpha (grad curl u, grad curl v)_K
                    + beta (curl u, curl v)_K + gamma (u, v)_K

Constrained (boundary) DOFs are eliminated; with homogeneous data they
contribute nothing to the right-hand side.
"""
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .element import RAW_TENSORS
from .quadrature import composite_rule_tet, rule_tet

MASS_DEGREE = 4
CURL_DEGREE = 2
LOAD_DEGREE = 8


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive number, got {v!r}")


@dataclass
class LinearSystem:
    A: sp.csr_matrix  # free x free
    b: np.ndarray
    free: np.ndarray  # free DOF -> global DOF
    n_dofs: int

    @property
    def size(self):
        return len(self.b)

    def expand(self, x_free):
        x = np.zeros(self.n_dofs)
        x[self.free] = x_free
        return x


def local_blocks(basis, mass_degree=MASS_DEGREE, curl_degree=CURL_DEGREE):
    """Per-element grad-curl, curl-curl and mass matrices, (..., 20, 20) each.

    The curl gradient of every basis function is constant on K, so the
    grad-curl block needs no quadrature.
    """
    vol = basis.geom.volume[..., None, None]
    D = basis.curl_grads()
    gradcurl = vol * np.einsum("...aij,...bij->...ab", D, D)

    r = rule_tet(curl_degree)
    c = basis.curls(r.points)
    curlcurl = vol * np.einsum("p,...apd,...bpd->...ab", r.weights, c, c)

    r = rule_tet(mass_degree)
    v = basis.values(r.points)
    mass = vol * np.einsum("p,...apd,...bpd->...ab", r.weights, v, v)
    return {"gradcurl": gradcurl, "curlcurl": curlcurl, "mass": mass}


def load_rule(degree=LOAD_DEGREE, refine=0):
    """Tet rule for the load; ``refine`` > 0 applies it on red-refined subtets."""
    return composite_rule_tet(degree, refine) if refine else rule_tet(degree)


def local_load(basis, f, degree=LOAD_DEGREE, refine=0):
    """(f, b_a)_K for every basis function, (..., 20).

    f is weighted into the barycentric tensor weights first, so memory stays
    linear in the number of points even for refined rules.
    """
    r = load_rule(degree, refine)
    x = basis.geom.physical(r.points)
    fx = np.asarray(f(x.reshape(-1, 3))).reshape(x.shape)  # (..., P, 3)
    W = np.einsum("kabc,pa,pb,p->kcp", RAW_TENSORS, r.points, r.points, r.weights)
    K = len(RAW_TENSORS)
    moments = (W.reshape(K * 4, -1) @ fx).reshape(*fx.shape[:-2], K, 4, 3)
    raw = np.einsum("...kcd,...cd->...k", moments, basis.geom.grad_lambda)
    return basis.geom.volume[..., None] * np.einsum("...km,...k->...m", basis.coefficients, raw)


def local_system(basis, params, f=None, load_degree=LOAD_DEGREE):
    blocks = local_blocks(basis)
    A = params.alpha * blocks["gradcurl"] + params.beta * blocks["curlcurl"] + params.gamma * blocks["mass"]
    if f is None:
        b = np.zeros(A.shape[:-1])
    else:
        b = local_load(basis, f, load_degree)
    return A, b


def scatter_matrix(space, local):
    """Sum element matrices (nt, 20, 20) into a global CSR matrix.

    Triplets are sorted by (row, col) before compression so that the
    summation order, and hence the result, is bit-stable.
    """
    dofs = space.dofmap.cell_dofs
    rows = np.repeat(dofs, 20, axis=1).ravel()
    cols = np.tile(dofs, (1, 20)).ravel()
    data = np.asarray(local).ravel()
    order = np.lexsort((cols, rows))
    n = space.n_dofs
    return sp.coo_matrix((data[order], (rows[order], cols[order])), shape=(n, n)).tocsr()


def scatter_vector(space, local):
    return np.bincount(space.dofmap.cell_dofs.ravel(), weights=np.asarray(local).ravel(),
                       minlength=space.n_dofs)


def assemble_blocks(space):
    """Full (unreduced) global grad-curl, curl-curl and mass matrices."""
    parts = {"gradcurl": [], "curlcurl": [], "mass": []}
    for sl in space.chunks():
        for key, val in local_blocks(space.basis[sl]).items():
            parts[key].append(val)
    return {key: scatter_matrix(space, np.concatenate(val)) for key, val in parts.items()}


def assemble_load(space, f, degree=LOAD_DEGREE, refine=0):
    if f is None:
        return np.zeros(space.n_dofs)
    local = np.concatenate([local_load(space.basis[sl], f, degree, refine) for sl in space.chunks()])
    return scatter_vector(space, local)


def assemble_full(space, params, blocks=None):
    blocks = assemble_blocks(space) if blocks is None else blocks
    return (params.alpha * blocks["gradcurl"] + params.beta * blocks["curlcurl"]
            + params.gamma * blocks["mass"]).tocsr()


def reduce(space, A_full, b_full):
    free = space.mask.free
    A = A_full[free][:, free].tocsr()
    A.sort_indices()
    return LinearSystem(A, np.asarray(b_full)[free], free, space.n_dofs)


def assemble(space, params, f=None, load_degree=LOAD_DEGREE, blocks=None, load_refine=0):
    """Reduced SPD system over the free DOFs."""
    return reduce(space, assemble_full(space, params, blocks),
                  assemble_load(space, f, load_degree, load_refine))


def export_matrix_market(system, path, comment=""):
    scipy.io.mmwrite(path, system.A, comment=comment, symmetry="symmetric")
