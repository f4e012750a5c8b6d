"""CG iteration counts as the fourth-order coefficient alpha shrinks.

With beta = gamma = 1 fixed, small alpha weakens the grad-curl term and the
Jacobi-preconditioned system changes character. No bound is asserted here;
the counts are just recorded.
"""
from quadcurl import FESpace, ModelParams, assemble, assemble_blocks, generate_box_mesh, solve_cg
from quadcurl.mms import sincube_exact

space = FESpace.from_mesh(generate_box_mesh(4))
blocks = assemble_blocks(space)
print(f"{space.n_free} free DOFs")
for alpha in (1.0, 1e-1, 1e-2, 1e-3, 1e-4):
    exact = sincube_exact(ModelParams(alpha, 1.0, 1.0))
    _, rep = solve_cg(assemble(space, exact.params, exact.f, blocks=blocks))
    print(f"alpha {alpha:7.0e}  cg iterations {rep.iterations:5d}  residual {rep.residual:.1e}")
