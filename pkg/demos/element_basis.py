"""Build the 20-function dual basis on one tetrahedron and look at it.

Checks the duality M_a(b_c) = delta_ac, shows which members are gradients
(curl identically zero) and prints the constant curl gradient of a face member.
"""
import numpy as np

from quadcurl import dual_basis, tet_geometry
from quadcurl.element import quadrature_functional_matrix

vertices = np.array([[0.0, 0, 0], [1.2, 0.1, 0], [0.2, 0.9, 0.1], [0.3, 0.2, 1.1]])
geom = tet_geometry(vertices)
basis = dual_basis(geom)

print(f"volume {geom.volume:.4f}, Vandermonde condition {basis.condition:.2e}")

# every functional, evaluated by quadrature, applied to every member: the identity
D = quadrature_functional_matrix(geom, basis.coefficients)
print(f"max |M_a(b_c) - delta_ac| = {np.abs(D - np.eye(20)).max():.2e}")

# the second edge member of each edge is a gradient, so its curl vanishes
pts = np.random.default_rng(0).dirichlet(np.ones(4), size=50)
curl_size = np.abs(basis.curls(pts)).max(axis=(1, 2))
for a, c in enumerate(curl_size):
    kind = "edge" if a < 12 else "face"
    print(f"  member {a:2d} ({kind})  max |curl| {c:.2e}")

# curl is affine, so grad curl is one constant 3x3 matrix per member
np.set_printoptions(precision=4, suppress=True)
print("grad curl of member 12:")
print(basis.curl_grads()[12])
