"""Tetrahedral meshes, entity tables and size statistics."""
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

# Local entity conventions shared by every module.
# Edge m joins local vertices LOCAL_EDGES[m]; face l is opposite vertex l.
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])

DEGENERACY_TOL = 1e-14


class MeshError(ValueError):
    pass


def signed_volumes(vertices, tets):
    x = vertices[tets]
    return np.linalg.det(x[:, 1:] - x[:, :1]) / 6


def longest_edges(vertices, tets):
    x = vertices[tets]
    d = x[:, LOCAL_EDGES[:, 1]] - x[:, LOCAL_EDGES[:, 0]]
    return np.linalg.norm(d, axis=-1).max(axis=1)


@dataclass
class Mesh:
    vertices: np.ndarray  # (nv, 3) float
    tets: np.ndarray  # (nt, 4) int, positively oriented
    reoriented: int = field(default=0, compare=False)
    divisions: int = field(default=None, compare=False)  # n for box meshes

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    def tet_vertices(self):
        """(nt, 4, 3) coordinates of every tetrahedron."""
        return self.vertices[self.tets]

    def volumes(self):
        return signed_volumes(self.vertices, self.tets)

    def validate(self):
        if self.n_tets == 0:
            return
        if self.tets.min() < 0 or self.tets.max() >= self.n_vertices:
            raise MeshError("tet references a vertex index out of range")
        if np.any(np.sort(self.tets, axis=1)[:, 1:] == np.sort(self.tets, axis=1)[:, :-1]):
            raise MeshError("tet with repeated vertex")
        keys = np.unique(np.sort(self.tets, axis=1), axis=0)
        if len(keys) != self.n_tets:
            raise MeshError("duplicate tets")
        vol = self.volumes()
        tol = DEGENERACY_TOL * longest_edges(self.vertices, self.tets) ** 3
        bad = np.flatnonzero(vol <= tol)
        if len(bad):
            raise MeshError(f"tet {bad[0]} is degenerate or negatively oriented")


def generate_box_mesh(n):
    """Uniform mesh of the unit cube: n^3 subcubes, each cut into 6 Kuhn tets.

    Every subcube uses the same main diagonal, so the mesh is conforming.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    # Kuhn simplices: walk from corner (0,0,0) to (1,1,1) along axis order perm.
    local = []
    for perm in permutations(range(3)):
        p = np.zeros(3, dtype=int)
        path = [p.copy()]
        for axis in perm:
            p[axis] += 1
            path.append(p.copy())
        path = np.array(path)
        det = np.linalg.det((path[1:] - path[0]).astype(float))
        if det < 0:
            path = path[[0, 1, 3, 2]]
        local.append(path)
    local = np.array(local)  # (6, 4, 3) offsets

    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    base = np.column_stack([i.ravel(), j.ravel(), k.ravel()])  # (n^3, 3)
    corners = base[:, None, None, :] + local[None]  # (n^3, 6, 4, 3)
    tets = vid(corners[..., 0], corners[..., 1], corners[..., 2]).reshape(-1, 4)
    return Mesh(vertices, tets, divisions=n)


@dataclass
class Topology:
    edges: np.ndarray  # (ne, 2) sorted global vertex pairs, lexicographic
    faces: np.ndarray  # (nf, 3) sorted global vertex triples, lexicographic
    tet_edges: np.ndarray  # (nt, 6) ids, local order LOCAL_EDGES
    tet_faces: np.ndarray  # (nt, 4) ids, face l opposite local vertex l
    face_tets: np.ndarray  # (nf, 2) adjacent tets, -1 when absent
    boundary_faces: np.ndarray  # (nf,) bool
    boundary_edges: np.ndarray  # (ne,) bool

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    def interior_faces(self):
        return np.flatnonzero(~self.boundary_faces)


def build_topology(mesh):
    """Edge and face tables with lexicographic numbering by sorted vertex key."""
    tets = mesh.tets
    nt = len(tets)
    if nt == 0:
        z2, z3 = np.zeros((0, 2), np.int64), np.zeros((0, 3), np.int64)
        return Topology(z2, z3, np.zeros((0, 6), np.int64), np.zeros((0, 4), np.int64),
                        np.zeros((0, 2), np.int64), np.zeros(0, bool), np.zeros(0, bool))

    all_edges = np.sort(tets[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    edges, einv = np.unique(all_edges, axis=0, return_inverse=True)
    tet_edges = einv.reshape(nt, 6)

    all_faces = np.sort(tets[:, LOCAL_FACES], axis=2).reshape(-1, 3)
    faces, finv = np.unique(all_faces, axis=0, return_inverse=True)
    tet_faces = finv.reshape(nt, 4)

    counts = np.bincount(finv, minlength=len(faces))
    if counts.max() > 2:
        f = int(np.argmax(counts))
        raise MeshError(f"non-manifold mesh: face {tuple(faces[f])} shared by {counts[f]} tets")

    face_tets = -np.ones((len(faces), 2), dtype=np.int64)
    owner = np.repeat(np.arange(nt), 4)
    order = np.argsort(finv, kind="stable")
    sorted_f = finv[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_f[1:] != sorted_f[:-1]
    face_tets[sorted_f[first], 0] = owner[order[first]]
    face_tets[sorted_f[~first], 1] = owner[order[~first]]

    boundary_faces = counts == 1
    boundary_edges = np.zeros(len(edges), dtype=bool)
    bf = faces[boundary_faces]
    if len(bf):
        be = np.sort(np.concatenate([bf[:, [0, 1]], bf[:, [0, 2]], bf[:, [1, 2]]]), axis=1)
        idx = _lookup_rows(edges, be)
        boundary_edges[idx] = True
    return Topology(edges, faces, tet_edges, tet_faces, face_tets, boundary_faces, boundary_edges)


def _lookup_rows(table, rows):
    """Indices of ``rows`` in the lexicographically sorted unique ``table``."""
    base = int(max(table.max(), rows.max())) + 1
    key_t = np.ravel_multi_index(table.T, (base,) * table.shape[1])
    key_r = np.ravel_multi_index(rows.T, (base,) * rows.shape[1])
    idx = np.searchsorted(key_t, key_r)
    if np.any(key_t[np.minimum(idx, len(key_t) - 1)] != key_r):
        raise KeyError("entity not found in table")
    return idx


@dataclass
class MeshStats:
    h_max: float
    h_min: float
    shape_regularity: float
    n_vertices: int
    n_tets: int
    n_edges: int
    n_faces: int


def tet_diameter_inradius(x):
    """Longest edge and inradius of tets with coordinates ``x`` (..., 4, 3)."""
    x = np.asarray(x, dtype=float)
    d = x[..., LOCAL_EDGES[:, 1], :] - x[..., LOCAL_EDGES[:, 0], :]
    diam = np.linalg.norm(d, axis=-1).max(axis=-1)
    vol = np.abs(np.linalg.det(x[..., 1:, :] - x[..., :1, :])) / 6
    f = x[..., LOCAL_FACES, :]
    areas = np.linalg.norm(np.cross(f[..., 1, :] - f[..., 0, :], f[..., 2, :] - f[..., 0, :]), axis=-1) / 2
    return diam, 3 * vol / areas.sum(axis=-1)


def mesh_stats(mesh, topology):
    diam, rho = tet_diameter_inradius(mesh.tet_vertices())
    return MeshStats(
        h_max=float(diam.max()),
        h_min=float(diam.min()),
        shape_regularity=float((diam / rho).max()),
        n_vertices=mesh.n_vertices,
        n_tets=mesh.n_tets,
        n_edges=topology.n_edges,
        n_faces=topology.n_faces,
    )
