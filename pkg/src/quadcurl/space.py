"""Everything needed to work with the discrete space V_h on one mesh."""
from dataclasses import dataclass

import numpy as np

from .dofmap import BoundaryMask, DofMap, boundary_mask, build_dofmap
from .element import BasisSet, TetGeometry, dual_basis, tet_geometry
from .mesh import Mesh, Topology, build_topology, mesh_stats

CHUNK = 256


@dataclass
class FESpace:
    mesh: Mesh
    topology: Topology
    dofmap: DofMap
    mask: BoundaryMask
    geom: TetGeometry  # batched over tets
    basis: BasisSet  # dual to the globally oriented functionals

    @classmethod
    def from_mesh(cls, mesh):
        mesh.validate()
        topo = build_topology(mesh)
        dm = build_dofmap(topo, mesh.tets)
        geom = tet_geometry(mesh.tet_vertices())
        return cls(mesh, topo, dm, boundary_mask(topo, dm), geom, dual_basis(geom, dm.orientation))

    @property
    def n_dofs(self):
        return self.dofmap.n_dofs

    @property
    def n_free(self):
        return self.mask.n_free

    def stats(self):
        return mesh_stats(self.mesh, self.topology)

    def chunks(self, size=CHUNK):
        n = self.mesh.n_tets
        for start in range(0, n, size):
            yield slice(start, min(start + size, n))

    def element_values(self, x):
        """Element-local coefficients (nt, 20) from a global or local array."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return x
        return self.dofmap.gather(x)

    def expand(self, x_free):
        """Global vector with constrained DOFs set to zero."""
        x = np.zeros(self.n_dofs)
        x[self.mask.free] = x_free
        return x

    def constrain(self, x):
        """Copy of global vector ``x`` with boundary DOFs zeroed, i.e. a member of V_h."""
        y = np.array(x, dtype=float)
        y[self.mask.constrained] = 0.0
        return y
