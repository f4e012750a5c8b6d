"""Global DOF numbering and boundary masking.

Global layout: edge e carries DOFs (2e, 2e+1) = (M1, M2); face f carries
(2E + 2f, 2E + 2f + 1) = (q1, q2) of its global frame. Edges are directed
from the lower to the higher global vertex id; a face frame lists its
vertices by ascending global id (g0 < g1 < g2) with q1 = a_g0 - a_g1,
q2 = a_g0 - a_g2 and normal along (a_g1 - a_g0) x (a_g2 - a_g0).
"""
from dataclasses import dataclass

import numpy as np

from .element import canonical_orientation, global_orientation, orientation_transform


@dataclass
class DofMap:
    n_edges: int
    n_faces: int
    cell_dofs: np.ndarray  # (nt, 20) global ids, local DOF order
    orientation: object  # element.Orientation, batched over tets

    @property
    def n_dofs(self):
        return 2 * (self.n_edges + self.n_faces)

    def edge_dofs(self, e):
        return np.array([2 * e, 2 * e + 1])

    def face_dofs(self, f):
        base = 2 * self.n_edges
        return np.array([base + 2 * f, base + 2 * f + 1])

    def gather(self, x):
        """Element-local DOF values (nt, 20) of a global vector."""
        return np.asarray(x)[self.cell_dofs]


@dataclass
class BoundaryMask:
    constrained: np.ndarray  # (n_dofs,) bool
    n_edge_dofs: int
    n_face_dofs: int

    @property
    def free(self):
        return np.flatnonzero(~self.constrained)

    @property
    def n_free(self):
        return int((~self.constrained).sum())


def build_dofmap(topology, tets):
    """DOF map for a mesh with global vertex ids ``tets`` (nt, 4)."""
    E = topology.n_edges
    edge_part = 2 * topology.tet_edges[:, :, None] + np.arange(2)
    face_part = 2 * E + 2 * topology.tet_faces[:, :, None] + np.arange(2)
    cell_dofs = np.concatenate(
        [edge_part.reshape(-1, 12), face_part.reshape(-1, 8)], axis=1
    )
    return DofMap(E, topology.n_faces, cell_dofs, global_orientation(tets))


def element_dofs(dofmap, tet):
    """Global ids and the canonical-to-global functional transform of one tet.

    The global functionals on the tet equal ``transform @ canonical``.
    """
    orient = dofmap.orientation[tet]
    return dofmap.cell_dofs[tet], orientation_transform(canonical_orientation(), orient)


def boundary_mask(topology, dofmap):
    """Constrain every DOF carried by a boundary edge or boundary face."""
    constrained = np.zeros(dofmap.n_dofs, dtype=bool)
    be = np.flatnonzero(topology.boundary_edges)
    bf = np.flatnonzero(topology.boundary_faces)
    constrained[2 * be] = constrained[2 * be + 1] = True
    base = 2 * dofmap.n_edges
    constrained[base + 2 * bf] = constrained[base + 2 * bf + 1] = True
    return BoundaryMask(constrained, 2 * len(be), 2 * len(bf))
