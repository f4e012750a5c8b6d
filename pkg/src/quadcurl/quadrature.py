"""Quadrature on edges, triangles and tetrahedra.

Points are stored in barycentric coordinates and weights are normalized to
sum to one, so that for an entity with vertices ``v``

    integral = measure(entity) * sum_i w_i * f(points[i] @ v)

Low-degree triangle/tet rules are the classical symmetric ones. Higher
degrees use collapsed (Stroud conical product) Gauss-Jacobi rules, which
have positive weights and interior points for every degree.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

MAX_DEGREE = {1: 9, 2: 8, 3: 10}


@dataclass(frozen=True)
class QuadRule:
    dimension: int
    points: np.ndarray  # (npts, dimension + 1) barycentric
    weights: np.ndarray  # (npts,), sums to 1
    degree: int

    def __len__(self):
        return len(self.weights)


def _check_degree(dim, degree):
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE[dim]:
        raise ValueError(
            f"unsupported quadrature degree {degree!r} for dimension {dim} "
            f"(expected 1..{MAX_DEGREE[dim]})"
        )


def _gauss01(npts):
    t, w = leggauss(npts)
    return (t + 1) / 2, w / 2


def _jacobi01(npts, alpha):
    # Gauss-Jacobi on [0, 1] with weight (1 - x)**alpha, weights normalized.
    t, w = roots_jacobi(npts, alpha, 0)
    return (t + 1) / 2, w / w.sum()


def _rule(dim, points, weights, degree):
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule(dim, points, weights, degree)


@lru_cache(maxsize=None)
def gauss_edge(degree):
    """Gauss-Legendre rule on a segment, ``ceil((degree + 1) / 2)`` points."""
    _check_degree(1, degree)
    s, w = _gauss01(ceil((degree + 1) / 2))
    return _rule(1, np.column_stack([1 - s, s]), w, degree)


@lru_cache(maxsize=None)
def rule_triangle(degree):
    _check_degree(2, degree)
    if degree == 1:
        return _rule(2, [[1 / 3, 1 / 3, 1 / 3]], [1.0], 1)
    if degree == 2:
        a, b = 2 / 3, 1 / 6
        return _rule(2, [[a, b, b], [b, a, b], [b, b, a]], [1 / 3] * 3, 2)
    m = ceil((degree + 1) / 2)
    x, wx = _jacobi01(m, 1)
    y, wy = _gauss01(m)
    X, Y = np.meshgrid(x, y, indexing="ij")
    l1 = X
    l2 = (1 - X) * Y
    pts = np.column_stack([(1 - l1 - l2).ravel(), l1.ravel(), l2.ravel()])
    w = np.outer(wx, wy).ravel()
    return _rule(2, pts, w / w.sum(), degree)


@lru_cache(maxsize=None)
def rule_tet(degree):
    _check_degree(3, degree)
    if degree == 1:
        return _rule(3, [[0.25] * 4], [1.0], 1)
    if degree == 2:
        a = (5 + 3 * np.sqrt(5)) / 20
        b = (5 - np.sqrt(5)) / 20
        pts = [[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]]
        return _rule(3, pts, [0.25] * 4, 2)
    m = ceil((degree + 1) / 2)
    x, wx = _jacobi01(m, 2)
    y, wy = _jacobi01(m, 1)
    z, wz = _gauss01(m)
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    l1 = X
    l2 = (1 - X) * Y
    l3 = (1 - X) * (1 - Y) * Z
    pts = np.column_stack(
        [(1 - l1 - l2 - l3).ravel(), l1.ravel(), l2.ravel(), l3.ravel()]
    )
    w = np.einsum("i,j,k->ijk", wx, wy, wz).ravel()
    return _rule(3, pts, w / w.sum(), degree)


def _red_children(T):
    """Split a tet (rows = vertex coordinates) into 8 tets of equal volume."""
    m = {(i, j): (T[i] + T[j]) / 2 for i in range(4) for j in range(i + 1, 4)}
    v = [T[0], T[1], T[2], T[3]]
    kids = [
        [v[0], m[0, 1], m[0, 2], m[0, 3]],
        [m[0, 1], v[1], m[1, 2], m[1, 3]],
        [m[0, 2], m[1, 2], v[2], m[2, 3]],
        [m[0, 3], m[1, 3], m[2, 3], v[3]],
        # inner octahedron, cut along the m02-m13 diagonal
        [m[0, 1], m[0, 2], m[0, 3], m[1, 3]],
        [m[0, 1], m[0, 2], m[1, 2], m[1, 3]],
        [m[0, 2], m[0, 3], m[1, 3], m[2, 3]],
        [m[0, 2], m[1, 2], m[1, 3], m[2, 3]],
    ]
    return [np.array(k) for k in kids]


@lru_cache(maxsize=None)
def composite_rule_tet(degree, levels=1):
    """rule_tet(degree) repeated on the 8**levels tets of uniform red refinement."""
    base = rule_tet(degree)
    if not isinstance(levels, (int, np.integer)) or levels < 0:
        raise ValueError(f"levels must be a non-negative integer, got {levels!r}")
    cells = [np.eye(4)]
    for _ in range(levels):
        cells = [kid for c in cells for kid in _red_children(c)]
    pts = np.concatenate([base.points @ c for c in cells])
    w = np.tile(base.weights, len(cells)) / len(cells)
    return _rule(3, pts, w, degree)


def rule_for(dimension, degree):
    return {1: gauss_edge, 2: rule_triangle, 3: rule_tet}[dimension](degree)


def measure(vertices):
    """Length, area or volume of a simplex given its (d+1, 3) vertex array.

    Leading batch dimensions are allowed.
    """
    v = np.asarray(vertices, dtype=float)
    d = v.shape[-2] - 1
    e = v[..., 1:, :] - v[..., :1, :]
    if d == 1:
        return np.linalg.norm(e[..., 0, :], axis=-1)
    if d == 2:
        return np.linalg.norm(np.cross(e[..., 0, :], e[..., 1, :]), axis=-1) / 2
    if d == 3:
        return np.abs(np.linalg.det(e)) / 6
    raise ValueError(f"simplex of dimension {d} not supported")


def map_points(rule, vertices):
    """Physical coordinates of the rule points on a simplex (batch allowed)."""
    return np.einsum("pi,...ix->...px", rule.points, np.asarray(vertices, dtype=float))


def integrate(vertices, rule, integrand):
    """Integrate ``integrand`` over the simplex with the given vertices.

    ``integrand`` takes an (npts, 3) array of physical points and returns
    an array whose leading axis runs over the points.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[0] != rule.dimension + 1:
        raise ValueError(
            f"rule of dimension {rule.dimension} used on a simplex with "
            f"{vertices.shape[0]} vertices"
        )
    values = np.asarray(integrand(map_points(rule, vertices)), dtype=float)
    return measure(vertices) * np.tensordot(rule.weights, values, axes=(0, 0))
