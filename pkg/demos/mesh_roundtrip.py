"""Write a box mesh in Gmsh 2.2 format, read it back and solve on both.

The two solves see the same tets in the same order, so the errors agree to roundoff.
"""
import tempfile
from pathlib import Path

from quadcurl import FESpace, build_topology, generate_box_mesh, read_msh, save_msh, write_msh
from quadcurl.mms import sincube_exact, solve_level

mesh = generate_box_mesh(3)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "cube.msh"
    save_msh(mesh, path)
    back = read_msh(path)

print(f"second write identical: {write_msh(back) == write_msh(mesh)}")
for name, m in (("generated", mesh), ("from file", back)):
    t = build_topology(m)
    print(f"{name:10s} vertices {m.n_vertices} tets {m.n_tets} edges {t.n_edges} faces {t.n_faces}")

exact = sincube_exact()
a, _ = solve_level(FESpace.from_mesh(mesh), exact)
b, _ = solve_level(FESpace.from_mesh(back), exact)
print(f"errors {a.errors.total:.12e} vs {b.errors.total:.12e}")
