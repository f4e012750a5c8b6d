"""Executable self-checks of the element on random tetrahedra.

Each check returns a CheckResult whose ``value`` is a worst-case deviation
compared against ``limit``. The checks use the quadrature route for the
functionals, so they do not reuse the closed forms that built the basis.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .element import (
    FACE_DOFS,
    RAW_TENSORS,
    dual_basis,
    explicit_coefficients,
    face_function,
    quadrature_functional_matrix,
    tensor_curls,
    tet_geometry,
)
from .mesh import LOCAL_FACES, tet_diameter_inradius
from .quadrature import rule_triangle

DEFAULT_TRIALS = 1000
DEFAULT_SEED = 42
MAX_REGULARITY = 20.0
REFERENCE_TET = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


@dataclass
class CheckResult:
    name: str
    value: float
    limit: float
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.limit)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (limit {self.limit:.1e})"

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "limit": self.limit, **self.info}


def random_tets(count, seed=DEFAULT_SEED, max_regularity=MAX_REGULARITY):
    """``count`` positively oriented tets in the unit cube, longest edge / inradius <= max."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x = rng.random((max(2 * (count - len(out)), 16), 4, 3))
        diam, rho = tet_diameter_inradius(x)
        with np.errstate(divide="ignore"):
            ok = diam / rho <= max_regularity
        out.extend(x[ok])
    x = np.array(out[:count]).reshape(count, 4, 3)
    neg = np.linalg.det(x[:, 1:] - x[:, :1]) < 0
    x[neg] = x[neg][:, [0, 1, 3, 2]]
    return x


def check_unisolvence(vertices, flip=None):
    """Dual basis from the Vandermonde inverse, tested by quadrature-route functionals.

    ``flip`` negates one functional on the testing side (negative control).
    """
    geom = tet_geometry(vertices)
    basis = dual_basis(geom)
    D = quadrature_functional_matrix(geom, basis.coefficients)
    if flip is not None:
        D = D.copy()
        D[..., flip, :] *= -1
    err = float(np.abs(D - np.eye(20)).max())
    cond = basis.condition
    info = {"cond_min": float(cond.min()), "cond_median": float(np.median(cond)),
            "cond_max": float(cond.max()), "trials": len(cond)}
    return CheckResult("duality", err, 1e-9, info)


def check_explicit(vertices):
    """Closed-form basis vs inverted Vandermonde, relative max difference."""
    geom = tet_geometry(vertices)
    basis = dual_basis(geom)
    worst = 0.0
    for t in range(len(vertices)):
        C = explicit_coefficients(geom[t])
        ref = basis.coefficients[t]
        worst = max(worst, float(np.abs(C - ref).max() / np.abs(ref).max()))
    return CheckResult("explicit-basis", worst, 1e-9, {"trials": len(vertices)})


def reference_face_integrals():
    """int_f3 (curl L) x grad lam3 . (grad lam3 x grad lam2) dA for L = L_301, L_312."""
    geom = tet_geometry(REFERENCE_TET)
    g = geom.grad_lambda
    face = list(LOCAL_FACES[3])
    rule = rule_triangle(2)
    lam = rule.points @ np.eye(4)[face]
    area = geom.face_areas[3]
    w = np.cross(g[3], g[2])
    out = []
    for T in (face_function(3, 0, 1), face_function(3, 1, 2)):
        c = tensor_curls(T[None], lam, g)[0]
        out.append(float(area * rule.weights @ (np.cross(c, g[3]) @ w)))
    return tuple(out)


def check_reference_integrals():
    a, b = reference_face_integrals()
    err = max(abs(a + 1 / 3), abs(b - 1 / 6))
    return CheckResult("reference-face-integrals", err, 1e-13, {"values": [a, b]})


def check_stokes(vertices, degree=2):
    """Face-DOF basis functions have zero curl flux through every face."""
    geom = tet_geometry(vertices)
    basis = dual_basis(geom)
    rule = rule_triangle(degree)
    eye = np.eye(4)
    coeff = basis.coefficients[..., FACE_DOFS]
    worst = 0.0
    for l, f in enumerate(LOCAL_FACES):
        lam = rule.points @ eye[list(f)]
        c = tensor_curls(RAW_TENSORS, lam, geom.grad_lambda, coeff)  # (nt, 8, P, 3)
        n = geom.face_normals[:, l]
        flux = geom.face_areas[:, l, None] * np.einsum("tkpd,td,p->tk", c, n, rule.weights)
        scale = geom.face_areas[:, l, None] * np.abs(c).max(axis=(-1, -2))
        worst = max(worst, float((np.abs(flux) / scale).max()))
    return CheckResult("stokes-face-flux", worst, 1e-12, {"trials": len(vertices)})


def curl_rank(geom, n_points=12, seed=0):
    """Singular values of the curl-evaluation matrix of the 20 basis functions."""
    lam = np.random.default_rng(seed).dirichlet(np.ones(4), size=n_points)
    basis = dual_basis(geom)
    c = basis.curls(lam).reshape(20, -1)
    return np.linalg.svd(c, compute_uv=False)


def check_kernel_rank(vertices, rank=11, gap=1e6):
    """Curl evaluation has rank 11: the kernel is grad P2, of dimension 9."""
    geom = tet_geometry(vertices)
    worst_gap = np.inf
    ranks = set()
    for t in range(len(vertices)):
        s = curl_rank(geom[t], seed=t)
        ranks.add(int((s > s[0] * 1e-10).sum()))
        worst_gap = min(worst_gap, s[rank - 1] / max(s[rank], 1e-300))
    # value: 0 when every tet has rank 11 and the gap is met
    ok = ranks == {rank} and worst_gap >= gap
    return CheckResult("curl-kernel-rank", 0.0 if ok else 1.0, 0.0,
                       {"ranks": sorted(ranks), "min_gap": float(worst_gap)})


def check_constant_curl_grad(vertices, step=1e-3):
    """grad curl is constant: central differences of curl match curl_grads().

    curl is affine, so the central difference is exact up to roundoff.
    """
    geom = tet_geometry(vertices)
    basis = dual_basis(geom)
    D = basis.curl_grads()  # (nt, 20, 3, 3)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(3):
        lam0 = rng.dirichlet(np.ones(4))
        x0 = lam0 @ geom.vertices  # (nt, 3)
        for m in range(3):
            dx = np.zeros(3)
            dx[m] = step
            lp = geom.barycentric((x0 + dx)[:, None, :])
            lm = geom.barycentric((x0 - dx)[:, None, :])
            cp = np.stack([basis[t].curls(lp[t]) for t in range(len(vertices))])[..., 0, :]
            cm = np.stack([basis[t].curls(lm[t]) for t in range(len(vertices))])[..., 0, :]
            fd = (cp - cm) / (2 * step)
            worst = max(worst, float(np.abs(fd - D[..., m, :]).max() / np.abs(D).max()))
    return CheckResult("constant-curl-gradient", worst, 1e-8, {"trials": len(vertices)})


def run_element_checks(trials=DEFAULT_TRIALS, seed=DEFAULT_SEED, flip=None, subset=100):
    """All element checks; the more expensive per-tet loops use ``subset`` tets."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    start = time.perf_counter()
    x = random_tets(trials, seed)
    small = x[:min(subset, trials)]
    results = [
        check_unisolvence(x, flip),
        check_explicit(small),
        check_reference_integrals(),
        check_stokes(x),
        check_kernel_rank(small),
        check_constant_curl_grad(small),
    ]
    results[0].info["seconds"] = time.perf_counter() - start
    return results
