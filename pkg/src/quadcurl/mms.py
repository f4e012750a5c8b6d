"""Manufactured solutions, interpolants, error norms and diagnostics."""
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy

from .assembly import ModelParams, assemble, assemble_blocks, local_blocks
from .element import LOCAL_FACES, RAW_TENSORS, dof_vandermonde, face_frames
from .mesh import generate_box_mesh
from .quadrature import gauss_edge, rule_tet, rule_triangle
from .solver import DEFAULT_TOL, SolverError, solve_cg
from .space import FESpace

ERROR_DEGREE = 8
INTERP_DEGREE = 8

X, Y, Z = sympy.symbols("x y z", real=True)
COORDS = (X, Y, Z)


# ---------------------------------------------------------------- symbolic helpers

def sym_curl(v):
    return sympy.Matrix([
        sympy.diff(v[2], Y) - sympy.diff(v[1], Z),
        sympy.diff(v[0], Z) - sympy.diff(v[2], X),
        sympy.diff(v[1], X) - sympy.diff(v[0], Y),
    ])


def sym_laplacian(v):
    return v.applyfunc(lambda c: sum(sympy.diff(c, s, 2) for s in COORDS))


def sym_grad(v):
    """Matrix G[m, n] = d_m v_n."""
    return sympy.Matrix(3, 3, lambda m, n: sympy.diff(v[n], COORDS[m]))


def _lambdify(exprs, shape):
    flat = list(sympy.Matrix(exprs)) if not isinstance(exprs, list) else exprs
    fn = sympy.lambdify(COORDS, flat, modules="numpy", cse=True)

    def evaluate(points):
        p = np.asarray(points, dtype=float)
        lead = p.shape[:-1]
        vals = fn(p[..., 0], p[..., 1], p[..., 2])
        out = np.stack([np.broadcast_to(np.asarray(v, dtype=float), lead) for v in vals], axis=-1)
        return out.reshape(*lead, *shape)

    return evaluate


@dataclass
class ExactSolution:
    u: object  # (..., 3) -> (..., 3)
    curl: object
    grad_curl: object  # (..., 3) -> (..., 3, 3), [m, n] = d_m (curl u)_n
    f: object
    params: ModelParams
    description: str = ""


@lru_cache(maxsize=None)
def _symbolic_parts(key):
    u = sympy.Matrix(sympy.sympify(key[0], locals=dict(x=X, y=Y, z=Z)))
    curl = sym_curl(u)
    lap = sym_laplacian(u)
    return {
        "u": _lambdify(u, (3,)),
        "curl": _lambdify(curl, (3,)),
        "grad_curl": _lambdify(sym_grad(curl), (3, 3)),
        "lap": _lambdify(lap, (3,)),
        "bilap": _lambdify(sym_laplacian(lap), (3,)),
        "curl2": _lambdify(sym_curl(curl), (3,)),
        "curl4": _lambdify(sym_curl(sym_curl(sym_curl(curl))), (3,)) if key[1] else None,
    }


def exact_from_expressions(u_exprs, params, description="", forcing="laplacian"):
    """Exact solution from sympy expressions in x, y, z.

    ``forcing="laplacian"`` builds f = alpha Lap^2 u - beta Lap u + gamma u
    (valid when div u = 0); ``"curl"`` uses alpha curl^4 u + beta curl^2 u
    + gamma u directly.
    """
    exprs = [sympy.sympify(e, locals=dict(x=X, y=Y, z=Z)) for e in u_exprs]
    key = (str(exprs), forcing == "curl")
    parts = _symbolic_parts(key)
    a, b, g = params.alpha, params.beta, params.gamma
    u = parts["u"]
    if forcing == "laplacian":
        bilap, lap = parts["bilap"], parts["lap"]

        def f(p):
            return a * bilap(p) - b * lap(p) + g * u(p)
    elif forcing == "curl":
        c4, c2 = parts["curl4"], parts["curl2"]

        def f(p):
            return a * c4(p) + b * c2(p) + g * u(p)
    else:
        raise ValueError(f"unknown forcing form {forcing!r}")
    return ExactSolution(u, parts["curl"], parts["grad_curl"], f, params, description)


def sincube_expressions():
    s = (sympy.sin(sympy.pi * X) * sympy.sin(sympy.pi * Y) * sympy.sin(sympy.pi * Z)) ** 3
    return list(sym_curl(sympy.Matrix([s, s, s])))


def sincube_exact(params=None, forcing="laplacian"):
    """u = curl(s, s, s), s = sin^3(pi x) sin^3(pi y) sin^3(pi z) on the unit cube.

    u is divergence free and u x n = 0, curl u = 0 on the boundary.
    """
    params = ModelParams() if params is None else params
    return exact_from_expressions(sincube_expressions(), params,
                                  "curl(s,s,s), s = (sin(pi x) sin(pi y) sin(pi z))^3", forcing)


def zero_forcing(exact):
    """Same exact-solution bundle with f = 0 (for null-load runs)."""
    return ExactSolution(exact.u, exact.curl, exact.grad_curl, lambda p: np.zeros_like(np.asarray(p, float)),
                         exact.params, exact.description + " with f = 0")


MMS = {"sincube": sincube_exact}


# ---------------------------------------------------------------- interpolation

def edge_moments(space, field, degree=INTERP_DEGREE):
    """Global edge DOFs (M1, M2) of a field, shape (n_edges, 2)."""
    v = space.mesh.vertices[space.topology.edges]  # (ne, 2, 3) low -> high id
    rule = gauss_edge(degree)
    s = rule.points[:, 1]
    pts = np.einsum("pi,eix->epx", rule.points, v)
    tangent = v[:, 1] - v[:, 0]
    ut = np.einsum("epx,ex->ep", field(pts.reshape(-1, 3)).reshape(pts.shape), tangent)
    return np.stack([ut @ rule.weights, ut @ (rule.weights * (3 - 6 * s))], axis=1)


def _face_tangents_global(space):
    """Global face frame: unit normal (nf, 3), q vectors (nf, 2, 3), area (nf,)."""
    v = space.mesh.vertices[space.topology.faces]
    e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    c = np.cross(e1, e2)
    cn = np.linalg.norm(c, axis=1)
    return c / cn[:, None], np.stack([-e1, -e2], axis=1), cn / 2


def _nedelec_face_rows(space, sl):
    """Raw-set values of the Nedelec face moments (1/|f|) int_f u.(n x q) dA.

    Returns (nt, 4, 2, 20). Uses int_f lam_a lam_b dA = |f| (1 + d_ab) / 12.
    """
    geom = space.geom[sl]
    orient = space.dofmap.orientation[sl]
    normals, q, _ = face_frames(geom, orient)
    t = np.cross(normals[..., None, :], q)  # (nt, 4, 2, 3)
    W = np.zeros((4, 4, 4))
    for l, verts in enumerate(LOCAL_FACES):
        for a in verts:
            for b in verts:
                W[l, a, b] = (1 + (a == b)) / 12
    Tw = np.einsum("kabc,lab->lkc", RAW_TENSORS, W)  # (4, 20, 4)
    Gt = np.einsum("ecd,elrd->elrc", geom.grad_lambda, t)
    return np.einsum("lkc,elrc->elrk", Tw, Gt)


def nedelec_face_moments(space, field, degree=INTERP_DEGREE):
    """(1/|f|) int_f u.(n x q_r) dA in the global frame of every face, (nf, 2)."""
    n, q, area = _face_tangents_global(space)
    rule = rule_triangle(degree)
    v = space.mesh.vertices[space.topology.faces]
    pts = np.einsum("pi,fix->fpx", rule.points, v)
    u = field(pts.reshape(-1, 3)).reshape(pts.shape)
    t = np.cross(n[:, None, :], q)  # (nf, 2, 3)
    return np.einsum("p,fpx,frx->fr", rule.weights, u, t)


def local_interpolant(space, exact, degree=INTERP_DEGREE):
    """Element-local DOFs (nt, 20) of r_h u, the Nedelec interpolant on each tet.

    r_K u is the member of R_2(K) sharing the edge moments against P_1 and the
    tangential face moments of u; its quad-curl face DOFs are one-sided.
    """
    em = edge_moments(space, exact.u, degree)
    fm = nedelec_face_moments(space, exact.u, degree)
    topo = space.topology
    out = np.empty((space.mesh.n_tets, 20))
    for sl in space.chunks():
        V = dof_vandermonde(space.geom[sl], space.dofmap.orientation[sl])
        N = V.copy()
        N[:, 12:] = _nedelec_face_rows(space, sl).reshape(-1, 8, 20)
        rhs = np.concatenate([em[topo.tet_edges[sl]].reshape(-1, 12),
                              fm[topo.tet_faces[sl]].reshape(-1, 8)], axis=1)
        c = np.linalg.solve(N, rhs[..., None])[..., 0]
        out[sl, :12] = rhs[:, :12]
        out[sl, 12:] = np.einsum("eak,ek->ea", V[:, 12:], c)
    return out


def average_face_dofs(space, local):
    """Global vector from element-local DOFs: edges shared, faces averaged.

    Boundary faces keep their single one-sided value.
    """
    x = np.zeros(space.n_dofs)
    count = np.zeros(space.n_dofs)
    dofs = space.dofmap.cell_dofs
    np.add.at(x, dofs, local)
    np.add.at(count, dofs, 1.0)
    return x / np.maximum(count, 1.0)


def interpolate(exact, space, variant="u_I", degree=INTERP_DEGREE):
    """Interpolant of the exact field.

    ``"r_h"`` returns element-local DOFs (nt, 20) of the broken Nedelec
    interpolant; ``"u_I"`` returns the global vector of the conforming-DOF
    interpolant (shared edge moments, averaged face DOFs).
    """
    local = local_interpolant(space, exact, degree)
    if variant == "r_h":
        return local
    if variant == "u_I":
        return average_face_dofs(space, local)
    raise ValueError(f"unknown interpolant {variant!r}")


# ---------------------------------------------------------------- norms

@dataclass
class NormReport:
    l2: float
    curl: float
    gradcurl: float

    @property
    def total(self):
        return float(np.sqrt(self.l2**2 + self.curl**2 + self.gradcurl**2))

    def as_dict(self):
        return {"l2": self.l2, "curl": self.curl, "gradcurl": self.gradcurl, "total": self.total}


def broken_norms(coefficients, exact, space, degree=ERROR_DEGREE):
    """Broken L2, curl and grad-curl norms of u_h - u.

    ``coefficients`` is a global vector or element-local (nt, 20) array;
    ``exact=None`` measures u_h itself.
    """
    U = space.element_values(coefficients)
    rule = rule_tet(degree)
    sums = np.zeros(3)
    for sl in space.chunks():
        basis = space.basis[sl]
        vol = basis.geom.volume
        val = basis.field_values(U[sl], rule.points)
        cur = basis.field_curls(U[sl], rule.points)
        gc = basis.field_curl_grads(U[sl])[:, None]
        if exact is not None:
            x = basis.geom.physical(rule.points).reshape(-1, 3)
            shape = val.shape
            val = val - exact.u(x).reshape(shape)
            cur = cur - exact.curl(x).reshape(shape)
            gc = gc - exact.grad_curl(x).reshape(*shape, 3)
        else:
            gc = np.broadcast_to(gc, (*val.shape, 3))
        for i, w in enumerate([val**2, cur**2, gc**2]):
            per_point = w.reshape(*w.shape[:2], -1).sum(axis=-1)
            sums[i] += float(vol @ (per_point @ rule.weights))
    return NormReport(*np.sqrt(sums))


def l2_norm_local(space, local):
    """L2 norm of a broken field given by element-local DOFs, exact via mass blocks."""
    total = 0.0
    for sl in space.chunks():
        M = local_blocks(space.basis[sl])["mass"]
        d = local[sl]
        total += float(np.einsum("ea,eab,eb->", d, M, d))
    return np.sqrt(max(total, 0.0))


def level_label(space):
    """Subdivision count n of a box mesh, or the tet count for other meshes."""
    d = space.mesh.divisions
    return int(d) if d is not None else space.mesh.n_tets


def rates(errors, hs):
    e, h = np.asarray(errors, float), np.asarray(hs, float)
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


# ---------------------------------------------------------------- diagnostics

@dataclass
class SupercloseLevel:
    n: int
    h: float
    distance: float
    rate: float = None


def superclose_distance(exact, space):
    """||r_h u - u_I||_0; the two share edge DOFs so only face DOFs differ."""
    local = local_interpolant(space, exact)
    global_ = average_face_dofs(space, local)
    return l2_norm_local(space, local - space.dofmap.gather(global_))


def superclose_report(exact, spaces):
    if len(spaces) < 2:
        raise ValueError("need at least two mesh levels")
    out = [SupercloseLevel(level_label(s), s.stats().h_max, superclose_distance(exact, s))
           for s in spaces]
    for prev, cur in zip(out, out[1:]):
        cur.rate = float(np.log(prev.distance / cur.distance) / np.log(prev.h / cur.h))
    return out


@dataclass
class JumpReport:
    max_jump: float
    scale: float

    @property
    def relative(self):
        return self.max_jump / self.scale if self.scale > 0 else 0.0


def face_curl_means(space, coefficients):
    """Face average of curl v_h from each element, (nt, 4, 3).

    curl v_h is affine on K, so its face mean is its value at the centroid.
    """
    U = space.element_values(coefficients)
    lam = np.full((4, 4), 1 / 3)
    np.fill_diagonal(lam, 0.0)  # centroid of face l has lam_l = 0
    out = np.empty((space.mesh.n_tets, 4, 3))
    for sl in space.chunks():
        out[sl] = space.basis[sl].field_curls(U[sl], lam)
    return out


def face_jump_report(coefficients, space):
    """Largest componentwise jump of the face mean of curl v_h over interior faces."""
    means = face_curl_means(space, coefficients)
    topo = space.topology
    interior = topo.interior_faces()
    if len(interior) == 0:
        return JumpReport(0.0, float(np.abs(means).max(initial=0.0)))
    t0, t1 = topo.face_tets[interior, 0], topo.face_tets[interior, 1]
    l0 = np.argmax(topo.tet_faces[t0] == interior[:, None], axis=1)
    l1 = np.argmax(topo.tet_faces[t1] == interior[:, None], axis=1)
    jump = np.abs(means[t0, l0] - means[t1, l1])
    return JumpReport(float(jump.max()), float(np.abs(means).max()))


def consistency_residual(exact, space, probe, degree=ERROR_DEGREE):
    """|a_h(u, v_h) - (f, v_h)| / (sum_K ||curl v_h||_{1,K}^2)^{1/2}."""
    params = exact.params
    V = space.element_values(probe)
    rule = rule_tet(degree)
    num = 0.0
    den = 0.0
    size = 0.0
    for sl in space.chunks():
        basis = space.basis[sl]
        vol = basis.geom.volume
        val = basis.field_values(V[sl], rule.points)
        cur = basis.field_curls(V[sl], rule.points)
        gc = basis.field_curl_grads(V[sl])
        x = basis.geom.physical(rule.points).reshape(-1, 3)
        shape = val.shape
        integrand = (params.alpha * np.einsum("epij,eij->ep", exact.grad_curl(x).reshape(*shape, 3), gc)
                     + params.beta * np.einsum("epd,epd->ep", exact.curl(x).reshape(shape), cur)
                     + np.einsum("epd,epd->ep", params.gamma * exact.u(x).reshape(shape)
                                 - exact.f(x).reshape(shape), val))
        num += float(vol @ (integrand @ rule.weights))
        den += float(vol @ ((cur**2).sum(-1) @ rule.weights) + vol @ (gc**2).sum(axis=(1, 2)))
        size += float(vol @ ((val**2).sum(-1) @ rule.weights))
    if den <= 1e-24 * size or den == 0.0:
        raise ValueError("probe function is curl free to roundoff")
    return abs(num) / np.sqrt(den)


def p2_gradient_dofs(space):
    """DOF vectors of grad p for the interior nodal P2 basis, (n_dofs, n_nodes) sparse.

    For p quadratic along an edge a -> b with midpoint value p_m:
    M1 = p_b - p_a and M2 = 4 p_m - 2 p_a - 2 p_b. Face DOFs vanish.
    """
    import scipy.sparse as sp_

    topo = space.topology
    nv = space.mesh.n_vertices
    boundary_vertex = np.zeros(nv, dtype=bool)
    boundary_vertex[topo.faces[topo.boundary_faces].ravel()] = True
    interior_v = np.flatnonzero(~boundary_vertex)
    interior_e = np.flatnonzero(~topo.boundary_edges)
    col_of_vertex = -np.ones(nv, dtype=np.int64)
    col_of_vertex[interior_v] = np.arange(len(interior_v))

    rows, cols, vals = [], [], []
    a, b = topo.edges[:, 0], topo.edges[:, 1]
    e = np.arange(topo.n_edges)
    for end, m1 in ((a, -1.0), (b, 1.0)):
        c = col_of_vertex[end]
        keep = c >= 0
        rows += [2 * e[keep], 2 * e[keep] + 1]
        cols += [c[keep], c[keep]]
        vals += [np.full(keep.sum(), m1), np.full(keep.sum(), -2.0)]
    rows.append(2 * interior_e + 1)
    cols.append(len(interior_v) + np.arange(len(interior_e)))
    vals.append(np.full(len(interior_e), 4.0))
    ncol = len(interior_v) + len(interior_e)
    return sp_.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(space.n_dofs, ncol))


@dataclass
class DivergenceReport:
    max_normalized: float
    n_tests: int


def divergence_test(solution, space, mass=None):
    """max |(u_h, grad p_h)| / (||u_h|| ||grad p_h||) over interior P2 nodal p_h."""
    x = np.asarray(solution, dtype=float)
    M = assemble_blocks(space)["mass"] if mass is None else mass
    G = p2_gradient_dofs(space)
    unorm = np.sqrt(max(float(x @ (M @ x)), 0.0))
    if G.shape[1] == 0 or unorm == 0.0:
        return DivergenceReport(0.0, G.shape[1])
    pair = G.T @ (M @ x)
    gnorm = np.sqrt(np.asarray((G.multiply(M @ G)).sum(axis=0)).ravel())
    return DivergenceReport(float(np.max(np.abs(pair) / (unorm * gnorm))), G.shape[1])


# ---------------------------------------------------------------- studies

@dataclass
class LevelResult:
    n: int
    h: float
    ndof_free: int
    errors: NormReport
    cg_iterations: int
    seconds: float
    residual: float = None
    solution: np.ndarray = field(default=None, repr=False)


@dataclass
class ConvergenceTable:
    levels: list
    description: str = ""
    failed: bool = False
    error: str = None

    def rates(self, attr="total"):
        if len(self.levels) < 2:
            return []
        errs = [getattr(l.errors, attr) for l in self.levels]
        return rates(errs, [l.h for l in self.levels])

    COLUMNS = ["n", "h", "ndof_free", "err_L2", "err_curl", "err_gradcurl", "err_total",
               "rate_total", "cg_iters", "seconds"]

    def rows(self, timing=True):
        r = [None] + self.rates()
        out = []
        for lev, rate in zip(self.levels, r):
            out.append([
                str(lev.n), f"{lev.h:.17g}", str(lev.ndof_free),
                f"{lev.errors.l2:.10e}", f"{lev.errors.curl:.10e}", f"{lev.errors.gradcurl:.10e}",
                f"{lev.errors.total:.10e}", "" if rate is None else f"{rate:.6f}",
                str(lev.cg_iterations), f"{lev.seconds:.3f}" if timing else "",
            ])
        return out

    def to_csv(self, timing=True):
        lines = [",".join(self.COLUMNS)] + [",".join(r) for r in self.rows(timing)]
        return "\n".join(lines) + "\n"

    def as_dict(self):
        rate = [None] + self.rates()
        return {
            "description": self.description,
            "failed": self.failed,
            "error": self.error,
            "levels": [
                {"n": l.n, "h": l.h, "ndof_free": l.ndof_free, "errors": l.errors.as_dict(),
                 "rate_total": r, "cg_iters": l.cg_iterations, "seconds": l.seconds,
                 "residual": l.residual}
                for l, r in zip(self.levels, rate)
            ],
        }


def solve_level(space, exact, tol=DEFAULT_TOL, maxit=None, load_degree=8):
    """Assemble, solve and measure one mesh level against ``exact``."""
    start = time.perf_counter()
    blocks = assemble_blocks(space)
    system = assemble(space, exact.params, exact.f, load_degree=load_degree, blocks=blocks)
    x_free, report = solve_cg(system, tol=tol, maxit=maxit)
    x = system.expand(x_free)
    errors = broken_norms(x, exact, space)
    return LevelResult(level_label(space), space.stats().h_max, system.size, errors, report.iterations,
                       time.perf_counter() - start, report.residual, x), blocks


def convergence_study(levels, exact, tol=DEFAULT_TOL, maxit=None):
    """Solve on box meshes n in ``levels``; rates between consecutive levels."""
    table = ConvergenceTable([], exact.description)
    for n in levels:
        space = FESpace.from_mesh(generate_box_mesh(n))
        try:
            result, _ = solve_level(space, exact, tol, maxit)
        except SolverError as exc:
            table.failed, table.error = True, f"n={n}: {exc}"
            break
        table.levels.append(result)
    return table
