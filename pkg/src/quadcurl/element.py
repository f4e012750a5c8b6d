"""The 20-DOF tetrahedral element for the quad-curl problem.

Local space: second-order Nedelec edge functions of the first kind, R_2(K).
Degrees of freedom: two tangential moments per edge and two scaled
tangential-curl moments per face,

    M1_e(u)  = int_e u.t ds
    M2_e(u)  = int_e u.t (3 - 6 s/|e|) ds
    M_f,q(u) = |f|^-2 int_f (curl u x n) . q dA,   q in {q_ij, q_ik}

Every field handled here is a quadratic form in the barycentric coordinates
times a barycentric gradient,

    u = sum_{a,b,c} T[a,b,c] lam_a lam_b grad(lam_c),

with T symmetric in (a, b). The tensor T is the same on every element; only
grad(lam) depends on the geometry. Geometry arrays may carry leading batch
dimensions so whole meshes are processed at once.

Local DOF order: for each edge in ``LOCAL_EDGES`` the pair (M1, M2), then for
each face l (opposite vertex l) the pair (q1, q2) of its frame.
"""
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .mesh import DEGENERACY_TOL, LOCAL_EDGES, LOCAL_FACES
from .quadrature import gauss_edge, rule_triangle

N_DOFS = 20
EDGE_DOFS = slice(0, 12)
FACE_DOFS = slice(12, 20)


class DegenerateElementError(ValueError):
    pass


# ---------------------------------------------------------------- tensors

def _quad_term(T, a, b, c, coef):
    T[..., a, b, c] += coef / 2
    T[..., b, a, c] += coef / 2


def _lin_term(T, a, c, coef):
    # lam_a grad(lam_c) = sum_b lam_a lam_b grad(lam_c)
    for b in range(4):
        _quad_term(T, a, b, c, coef)


def edge_function(i, j, symmetric=False):
    """L_ij = lam_i grad lam_j - lam_j grad lam_i, or with '+' if symmetric."""
    T = np.zeros((4, 4, 4))
    _lin_term(T, i, j, 1.0)
    _lin_term(T, j, i, 1.0 if symmetric else -1.0)
    return T


def face_function(a, b, c):
    """L_abc = lam_a (lam_b grad lam_c - lam_c grad lam_b)."""
    T = np.zeros((4, 4, 4))
    _quad_term(T, a, b, c, 1.0)
    _quad_term(T, a, c, b, -1.0)
    return T


def _raw_tensors():
    raw = []
    for i, j in LOCAL_EDGES:
        raw += [edge_function(i, j), edge_function(i, j, symmetric=True)]
    for i, j, k in LOCAL_FACES:
        raw += [face_function(i, j, k), face_function(j, i, k)]
    return np.array(raw)


# Generating set of R_2(K): (L_ij, L_ji) per edge, (L_ijk, L_jik) per face.
RAW_TENSORS = _raw_tensors()
RAW_TENSORS.setflags(write=False)


def _contract(w, frame, coefficients=None):
    """sum_c w[k, p, c] frame[..., c, d], optionally mixed by coefficients[..., k, m].

    Written as batched matmuls; einsum is an order of magnitude slower here.
    """
    K, P, C = w.shape
    w = w.reshape(K, P * C)
    if coefficients is not None:
        w = np.swapaxes(coefficients, -1, -2) @ w  # (..., m, P*C)
        K = w.shape[-2]
    out = w.reshape(*w.shape[:-2], K * P, C) @ frame
    return out.reshape(*out.shape[:-2], K, P, frame.shape[-1])


def _value_weights(T, lam):
    return np.einsum("kabc,pa,pb->kpc", T, lam, lam)


def _curl_weights(T, lam):
    return 2 * np.einsum("kabc,pa->kpbc", T, lam).reshape(T.shape[0], len(lam), 16)


def tensor_values(T, lam, grad_lambda, coefficients=None):
    """Values of tensor fields ``T`` (K,4,4,4) at barycentric points ``lam``.

    Returns an array (..., K, P, 3) for grad_lambda of shape (..., 4, 3).
    """
    return _contract(_value_weights(T, np.atleast_2d(lam)), grad_lambda, coefficients)


def _cross_table(grad_lambda):
    g = grad_lambda
    return np.cross(g[..., :, None, :], g[..., None, :, :])  # (..., 4, 4, 3)


def tensor_curls(T, lam, grad_lambda, coefficients=None):
    """curl(lam_a lam_b grad lam_c) = lam_a gl_b x gl_c + lam_b gl_a x gl_c."""
    X = _cross_table(grad_lambda)
    X = X.reshape(*X.shape[:-3], 16, 3)
    return _contract(_curl_weights(T, np.atleast_2d(lam)), X, coefficients)


def tensor_curl_grads(T, grad_lambda):
    """Constant matrices D[m, n] = d_m (curl u)_n, shape (..., K, 3, 3)."""
    return 2 * np.einsum("kabc,...am,...bcn->...kmn", T, grad_lambda, _cross_table(grad_lambda))


# ---------------------------------------------------------------- geometry

@dataclass
class TetGeometry:
    vertices: np.ndarray  # (..., 4, 3)
    grad_lambda: np.ndarray  # (..., 4, 3)
    volume: np.ndarray  # (...)
    face_areas: np.ndarray  # (..., 4)
    heights: np.ndarray  # (..., 4)
    edge_lengths: np.ndarray  # (..., 6)
    edge_tangents: np.ndarray  # (..., 6, 3) unit, from lower to higher local index
    face_normals: np.ndarray  # (..., 4, 3) outward unit
    face_tangents: np.ndarray  # (..., 4, 2, 3) q_ij = a_i - a_j, q_ik = a_i - a_k

    @property
    def batch_shape(self):
        return self.volume.shape

    def __getitem__(self, idx):
        return TetGeometry(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))

    def barycentric(self, points):
        """Barycentric coordinates (..., P, 4) of physical points (..., P, 3)."""
        x0 = self.vertices[..., 0, :]
        rel = np.asarray(points, dtype=float) - x0[..., None, :]
        lam = np.einsum("...px,...ix->...pi", rel, self.grad_lambda)
        lam[..., 0] += 1.0
        return lam

    def physical(self, lam):
        return np.einsum("pi,...ix->...px", lam, self.vertices)


def tet_geometry(vertices):
    x = np.asarray(vertices, dtype=float)
    J = np.swapaxes(x[..., 1:, :] - x[..., :1, :], -1, -2)  # columns a_k - a_0
    det = np.linalg.det(J)
    d = x[..., LOCAL_EDGES[:, 1], :] - x[..., LOCAL_EDGES[:, 0], :]
    lengths = np.linalg.norm(d, axis=-1)
    if np.any(np.abs(det) / 6 <= DEGENERACY_TOL * lengths.max(axis=-1) ** 3):
        raise DegenerateElementError("degenerate tetrahedron")
    Jinv = np.linalg.inv(J)  # rows are grad lam_1..3
    grad = np.concatenate([-Jinv.sum(axis=-2, keepdims=True), Jinv], axis=-2)
    volume = np.abs(det) / 6
    f = x[..., LOCAL_FACES, :]
    areas = np.linalg.norm(np.cross(f[..., 1, :] - f[..., 0, :], f[..., 2, :] - f[..., 0, :]), axis=-1) / 2
    gnorm = np.linalg.norm(grad, axis=-1)
    return TetGeometry(
        vertices=x,
        grad_lambda=grad,
        volume=volume,
        face_areas=areas,
        heights=1.0 / gnorm,
        edge_lengths=lengths,
        edge_tangents=d / lengths[..., None],
        face_normals=-grad / gnorm[..., None],
        face_tangents=np.stack([f[..., 0, :] - f[..., 1, :], f[..., 0, :] - f[..., 2, :]], axis=-2),
    )


# ---------------------------------------------------------------- orientation

@dataclass
class Orientation:
    """How the 20 functionals are oriented on each element.

    edges[..., m] = (start, end) local vertices of edge m; s runs from start.
    faces[..., l] = (v0, v1, v2) local vertices of face l; the tangent pair is
    q1 = a_v0 - a_v1, q2 = a_v0 - a_v2, and the normal is
    normal_sign * unit((a_v1 - a_v0) x (a_v2 - a_v0)).
    """

    edges: np.ndarray  # (..., 6, 2) int
    faces: np.ndarray  # (..., 4, 3) int
    normal_sign: np.ndarray  # (..., 4) +-1

    def __getitem__(self, idx):
        return Orientation(self.edges[idx], self.faces[idx], self.normal_sign[idx])


def _perm_parity(p):
    p = list(p)
    sign = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


_PARITY = {p: _perm_parity(p) for p in permutations(range(4))}


def outward_sign(frame, l):
    """+1 if the frame normal of face l points outward on a positive tet."""
    return -_PARITY[(*frame, l)]


def canonical_orientation(batch_shape=()):
    """Ascending local labels: edge (i, j) with i < j, face (i, j, k) sorted.

    Normals are outward assuming positively oriented vertex order.
    """
    edges = np.broadcast_to(LOCAL_EDGES, (*batch_shape, 6, 2)).copy()
    faces = np.broadcast_to(LOCAL_FACES, (*batch_shape, 4, 3)).copy()
    signs = np.array([outward_sign(LOCAL_FACES[l], l) for l in range(4)], dtype=float)
    return Orientation(edges, faces, np.broadcast_to(signs, (*batch_shape, 4)).copy())


def global_orientation(tets):
    """Orientation induced by global vertex ids ``tets`` (nt, 4).

    Edges run from the lower to the higher global id. Face frames list the
    face vertices by ascending global id and use the unsigned frame normal,
    so both elements sharing a face see the same functional.
    """
    tets = np.asarray(tets)
    g = tets[:, LOCAL_EDGES]
    swap = g[..., 0] > g[..., 1]
    edges = np.where(swap[..., None], LOCAL_EDGES[:, ::-1], LOCAL_EDGES)
    gf = tets[:, LOCAL_FACES]  # (nt, 4, 3)
    order = np.argsort(gf, axis=-1)
    faces = np.take_along_axis(np.broadcast_to(LOCAL_FACES, gf.shape), order, axis=-1)
    return Orientation(edges, faces, np.ones(faces.shape[:-1]))


def face_frames(geom, orient):
    """Unit normals (..., 4, 3), tangents q (..., 4, 2, 3), areas (..., 4)."""
    x = geom.vertices
    idx = orient.faces
    pts = np.take_along_axis(x[..., None, :, :], idx[..., None], axis=-2)  # (...,4,3,3)
    e1 = pts[..., 1, :] - pts[..., 0, :]
    e2 = pts[..., 2, :] - pts[..., 0, :]
    c = np.cross(e1, e2)
    cn = np.linalg.norm(c, axis=-1)
    normals = orient.normal_sign[..., None] * c / cn[..., None]
    q = np.stack([-e1, -e2], axis=-2)
    return normals, q, cn / 2


# ---------------------------------------------------------------- functionals

@dataclass(frozen=True)
class DofFunctional:
    kind: str  # "edge-moment-0", "edge-moment-1", "face-moment-q1", "face-moment-q2"
    entity: int  # local edge or face id
    vertices: tuple  # oriented local vertices of the carrier entity
    normal_sign: float = 1.0


def dof_functionals(orient=None):
    """The 20 functionals of a single element, in local DOF order."""
    orient = canonical_orientation() if orient is None else orient
    out = []
    for m in range(6):
        v = tuple(int(i) for i in orient.edges[m])
        out += [DofFunctional("edge-moment-0", m, v), DofFunctional("edge-moment-1", m, v)]
    for l in range(4):
        v = tuple(int(i) for i in orient.faces[l])
        s = float(orient.normal_sign[l])
        out += [DofFunctional("face-moment-q1", l, v, s), DofFunctional("face-moment-q2", l, v, s)]
    return out


def _edge_moment_table(T):
    """Closed-form (M1, M2) of tensor fields on every directed local edge.

    Returns (4, 4, 2, K): entry [a, b] is edge a -> b. Along the edge
    lam_a = 1 - t, lam_b = t and grad(lam_c) . (a_b - a_a) = d_cb - d_ca,
    so the moments only involve T and integrals of t-polynomials.
    """
    K = T.shape[0]
    out = np.zeros((4, 4, 2, K))
    for a in range(4):
        for b in range(4):
            if a == b:
                continue
            D = T[..., b] - T[..., a]  # (K, 4, 4)
            out[a, b, 0] = (D[:, a, a] + D[:, a, b] + D[:, b, b]) / 3
            out[a, b, 1] = (D[:, a, a] - D[:, b, b]) / 2
    return out


_RAW_EDGE_TABLE = _edge_moment_table(RAW_TENSORS)


def functional_matrix(geom, orient, tensors=None):
    """Closed-form values of the 20 functionals on tensor fields.

    Returns (..., 20, K). With ``tensors=None`` the raw generating set is
    used, which gives the DOF Vandermonde matrix.
    """
    if tensors is None:
        T, table = RAW_TENSORS, _RAW_EDGE_TABLE
    else:
        T = np.asarray(tensors, dtype=float)
        table = _edge_moment_table(T)
    a, b = orient.edges[..., 0], orient.edges[..., 1]
    edge_rows = table[a, b]  # (..., 6, 2, K)

    normals, q, areas = face_frames(geom, orient)
    w = np.cross(normals[..., None, :], q)  # (..., 4, 2, 3)   (curl x n).q = curl.(n x q)
    # int_f lam_a dA = |f|/3 for a on f, so only the face vertices contribute
    S = np.stack([T[:, list(LOCAL_FACES[l])].sum(axis=1) for l in range(4)])  # (4, K, 4, 4)
    X = _cross_table(geom.grad_lambda)  # (..., 4, 4, 3)
    face_rows = 2 * np.einsum("lkbc,...bcd,...lrd->...lrk", S, X, w) / (3 * areas[..., None, None])
    shape = edge_rows.shape[:-3]
    K = T.shape[0]
    return np.concatenate([edge_rows.reshape(*shape, 12, K), face_rows.reshape(*shape, 8, K)], axis=-2)


def dof_vandermonde(geom, orient=None):
    """V[a, b] = M_a(raw_b) for the 20 functionals and the raw generating set."""
    orient = canonical_orientation(geom.batch_shape) if orient is None else orient
    return functional_matrix(geom, orient)


# quadrature route: functionals applied to arbitrary callables

def apply_edge_dof(geom, edge, moment, field, degree=3):
    """Edge moment of ``field`` (callable on (P, 3) points) for a single tet.

    ``edge`` is a directed local vertex pair (start, end); ``moment`` is 1 or 2.
    """
    x = geom.vertices
    a, b = edge
    rule = gauss_edge(degree)
    s = rule.points[:, 1]
    pts = np.outer(1 - s, x[a]) + np.outer(s, x[b])
    tangent = x[b] - x[a]  # |e| * unit tangent, absorbs ds = |e| dt
    ut = np.asarray(field(pts)) @ tangent
    weight = np.ones_like(s) if moment == 1 else 3 - 6 * s
    return float(rule.weights @ (ut * weight))


def apply_face_dof(geom, face, normal_sign, tangent, curl_field, degree=2):
    """Face moment |f|^-2 int_f (curl u x n).q dA for a single tet.

    ``face`` lists the oriented local vertices (v0, v1, v2); ``tangent`` 0 or
    1 picks q1 = a_v0 - a_v1 or q2 = a_v0 - a_v2.
    """
    x = geom.vertices[list(face)]
    rule = rule_triangle(degree)
    pts = rule.points @ x
    c = np.cross(x[1] - x[0], x[2] - x[0])
    area = np.linalg.norm(c) / 2
    n = normal_sign * c / (2 * area)
    q = x[0] - x[1 + tangent]
    vals = np.cross(np.asarray(curl_field(pts)), n) @ q
    return float(area * (rule.weights @ vals) / area**2)


def apply_dofs(geom, field, curl_field, orient=None, edge_degree=3, face_degree=2):
    """All 20 functionals of a single tet by quadrature, in local DOF order."""
    out = []
    for F in dof_functionals(orient):
        if F.kind.startswith("edge"):
            out.append(apply_edge_dof(geom, F.vertices, 1 if F.kind.endswith("0") else 2,
                                      field, edge_degree))
        else:
            out.append(apply_face_dof(geom, F.vertices, F.normal_sign,
                                      0 if F.kind.endswith("q1") else 1, curl_field, face_degree))
    return np.array(out)


def quadrature_functional_matrix(geom, coefficients=None, edge_degree=3, face_degree=2):
    """Batched quadrature route for the canonically oriented functionals.

    Values are evaluated pointwise on the edges and faces, independent of
    the closed forms in ``functional_matrix``. ``coefficients`` (..., 20, K)
    selects the fields as combinations of the raw set (default: raw set).
    Returns (..., 20, K).
    """
    er, fr = gauss_edge(edge_degree), rule_triangle(face_degree)
    s = er.points[:, 1]
    eye = np.eye(4)
    lam_e = np.concatenate([np.outer(1 - s, eye[a]) + np.outer(s, eye[b]) for a, b in LOCAL_EDGES])
    lam_f = np.concatenate([fr.points @ eye[list(f)] for f in LOCAL_FACES])
    g = geom.grad_lambda
    vals = tensor_values(RAW_TENSORS, lam_e, g, coefficients)  # (..., K, 6*Pe, 3)
    curls = tensor_curls(RAW_TENSORS, lam_f, g, coefficients)  # (..., K, 4*Pf, 3)
    K = vals.shape[-3]
    vals = vals.reshape(*vals.shape[:-2], 6, len(s), 3)
    curls = curls.reshape(*curls.shape[:-2], 4, len(fr), 3)

    x = geom.vertices
    tvec = x[..., LOCAL_EDGES[:, 1], :] - x[..., LOCAL_EDGES[:, 0], :]  # (..., 6, 3)
    ut = np.einsum("...kmpd,...md->...mkp", vals, tvec)
    weights = np.stack([er.weights, er.weights * (3 - 6 * s)])  # (2, Pe)
    edge_rows = np.einsum("...mkp,rp->...mrk", ut, weights)

    normals, q, areas = face_frames(geom, canonical_orientation(geom.batch_shape))
    w = np.cross(normals[..., None, :], q)  # (..., 4, 2, 3)
    face_rows = np.einsum("...klpd,...lrd,p->...lrk", curls, w, fr.weights) / areas[..., None, None]
    shape = edge_rows.shape[:-3]
    return np.concatenate([edge_rows.reshape(*shape, 12, K), face_rows.reshape(*shape, 8, K)], axis=-2)


# ---------------------------------------------------------------- bases

@dataclass
class BasisSet:
    """20 local functions as combinations of the raw generating set.

    ``coefficients[..., k, m]`` is the weight of raw function k in basis
    function m.
    """

    geom: TetGeometry
    coefficients: np.ndarray  # (..., 20, 20)
    condition: np.ndarray = None  # Vandermonde condition numbers

    def __getitem__(self, idx):
        cond = None if self.condition is None else self.condition[idx]
        return BasisSet(self.geom[idx], self.coefficients[idx], cond)

    def tensors(self):
        return np.einsum("...km,kabc->...mabc", self.coefficients, RAW_TENSORS)

    def values(self, lam):
        return tensor_values(RAW_TENSORS, lam, self.geom.grad_lambda, self.coefficients)

    def curls(self, lam):
        return tensor_curls(RAW_TENSORS, lam, self.geom.grad_lambda, self.coefficients)

    def curl_grads(self):
        raw = tensor_curl_grads(RAW_TENSORS, self.geom.grad_lambda)
        flat = raw.reshape(*raw.shape[:-2], 9)
        return (np.swapaxes(self.coefficients, -1, -2) @ flat).reshape(raw.shape)

    # A single discrete field sum_m u[..., m] b_m, cheaper than all 20 functions.

    def _raw_weights(self, u):
        return (self.coefficients @ np.asarray(u, dtype=float)[..., None])  # (..., 20, 1)

    def field_values(self, u, lam):
        return tensor_values(RAW_TENSORS, lam, self.geom.grad_lambda, self._raw_weights(u))[..., 0, :, :]

    def field_curls(self, u, lam):
        return tensor_curls(RAW_TENSORS, lam, self.geom.grad_lambda, self._raw_weights(u))[..., 0, :, :]

    def field_curl_grads(self, u):
        return np.einsum("...m,...mij->...ij", u, self.curl_grads())


def eval_raw_basis(geom, lam):
    """Values, curls (..., 20, P, 3) and curl gradients (..., 20, 3, 3)."""
    lam = np.atleast_2d(lam)
    g = geom.grad_lambda
    return (tensor_values(RAW_TENSORS, lam, g), tensor_curls(RAW_TENSORS, lam, g),
            tensor_curl_grads(RAW_TENSORS, g))


def dual_basis(geom, orient=None, rtol=1e-12):
    """Basis dual to the functionals, by inverting the DOF Vandermonde matrix."""
    V = dof_vandermonde(geom, orient)
    s = np.linalg.svd(V, compute_uv=False)
    if np.any(s[..., -1] <= rtol * s[..., 0]):
        raise DegenerateElementError("DOF Vandermonde matrix is numerically singular")
    return BasisSet(geom, np.linalg.inv(V), s[..., 0] / s[..., -1])


def explicit_basis_tensors(geom):
    """Closed-form dual basis for canonical local labels, single tet.

    Face l = (i, j, k):  phi_lij = 3|K| (L_lij - L_ljk)
                         phi_lik = 3|K| (L_lik + L_ljk)
    Edge (i, j):         M1-dual = L_ij - sum_f M_f(L_ij) phi_f
                         M2-dual = L_ji
    """
    vol = float(geom.volume)
    phis = []
    for l, (i, j, k) in enumerate(LOCAL_FACES):
        phis.append(3 * vol * (face_function(l, i, j) - face_function(l, j, k)))
        phis.append(3 * vol * (face_function(l, i, k) + face_function(l, j, k)))
    phis = np.array(phis)
    orient = canonical_orientation()
    out = []
    for i, j in LOCAL_EDGES:
        L = edge_function(i, j)
        m = functional_matrix(geom, orient, L[None])[FACE_DOFS, 0]
        out.append(L - np.einsum("f,fabc->abc", m, phis))
        out.append(edge_function(i, j, symmetric=True))
    return np.concatenate([np.array(out), phis])


def eval_explicit_basis(geom, lam):
    """Values, curls and curl gradients of the closed-form basis."""
    T = explicit_basis_tensors(geom)
    lam = np.atleast_2d(lam)
    g = geom.grad_lambda
    return tensor_values(T, lam, g), tensor_curls(T, lam, g), tensor_curl_grads(T, g)


def explicit_coefficients(geom, n_points=30, seed=0):
    """Raw-set coefficients of the closed-form basis, by least-squares fit of values."""
    rng = np.random.default_rng(seed)
    lam = rng.dirichlet(np.ones(4), size=n_points)
    raw = tensor_values(RAW_TENSORS, lam, geom.grad_lambda).reshape(20, -1)
    target = tensor_values(explicit_basis_tensors(geom), lam, geom.grad_lambda).reshape(20, -1)
    coef, *_ = np.linalg.lstsq(raw.T, target.T, rcond=None)
    return coef


def orientation_transform(source, target):
    """Matrix T with target functionals = T @ source functionals, single tet.

    Edge M1 flips sign with direction, M2 does not. Face pairs transform by
    the change of tangent basis times the relative normal sign; both frames
    are expressed through vertex differences so T is exact in integers.
    """
    T = np.zeros((20, 20))
    for m in range(6):
        flip = 1.0 if tuple(source.edges[m]) == tuple(target.edges[m]) else -1.0
        T[2 * m, 2 * m] = flip
        T[2 * m + 1, 2 * m + 1] = 1.0
    for l in range(4):
        sv, tv = list(source.faces[l]), list(target.faces[l])
        # a_v expressed as a_v0 - (d1, d2) . (q1, q2) of the source frame
        d = {sv[0]: np.zeros(2), sv[1]: np.array([1.0, 0.0]), sv[2]: np.array([0.0, 1.0])}
        B = np.array([d[tv[1]] - d[tv[0]], d[tv[2]] - d[tv[0]]])
        # relative sign of the two unnormalized frame normals
        rel = _PARITY[(*sv, l)] * _PARITY[(*tv, l)]
        sigma = rel * source.normal_sign[l] * target.normal_sign[l]
        T[12 + 2 * l:14 + 2 * l, 12 + 2 * l:14 + 2 * l] = sigma * B
    return T
