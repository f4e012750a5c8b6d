"""Error and interpolation rates over a sequence of box meshes.

Prints the broken-norm error of u_h and of the interpolant u_I, the
supercloseness distance between the two interpolants r_h u and u_I, and
the consistency residual with u_I as the probe.
"""
import sys

from quadcurl import FESpace, generate_box_mesh
from quadcurl.mms import (broken_norms, consistency_residual, interpolate, rates, sincube_exact,
                          solve_level, superclose_distance)

levels = [int(v) for v in sys.argv[1].split(",")] if len(sys.argv) > 1 else [2, 4, 8]
exact = sincube_exact()

rows = []
for n in levels:
    space = FESpace.from_mesh(generate_box_mesh(n))
    res, _ = solve_level(space, exact)
    u_I = interpolate(exact, space, "u_I")
    rows.append((n, res.h, res.errors.total, broken_norms(u_I, exact, space).total,
                 superclose_distance(exact, space),
                 consistency_residual(exact, space, space.constrain(u_I))))
    print(f"n={n:3d}  free {res.ndof_free:6d}  cg {res.cg_iterations:4d}  {res.seconds:6.1f} s")

h = [r[1] for r in rows]
names = ["|u - u_h|_h", "|u - u_I|_h", "|r_h u - u_I|_0", "consistency"]
for k, name in enumerate(names, start=2):
    vals = [r[k] for r in rows]
    rate = rates(vals, h)
    print(f"{name:16s} " + "  ".join(f"{v:.4e}" for v in vals)
          + "   rates " + " ".join(f"{r:.2f}" for r in rate))
