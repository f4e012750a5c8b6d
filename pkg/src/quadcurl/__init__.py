"""20-DOF nonconforming tetrahedral element for the quad-curl problem.

    alpha curl^4 u + beta curl^2 u + gamma u = f,  u x n = 0, curl u = 0 on the boundary.
"""
from .assembly import ModelParams, assemble, assemble_blocks
from .element import dual_basis, tet_geometry
from .mesh import Mesh, build_topology, generate_box_mesh
from .msh import parse_msh, read_msh, save_msh, write_msh
from .solver import SolverError, solve_cg, solve_dense
from .space import FESpace

__version__ = "0.1.0"

__all__ = ["FESpace", "Mesh", "ModelParams", "SolverError", "assemble", "assemble_blocks",
           "build_topology", "dual_basis", "generate_box_mesh", "parse_msh", "read_msh",
           "save_msh", "solve_cg", "solve_dense", "tet_geometry", "write_msh"]
