"""
Freudenthal meshes of the unit cube
===================================

Every cell of an n^d grid is split into d! congruent simplices, one per
ordering of the coordinates.  This script builds a few meshes and checks
the counts and shape data.
"""
import math

import numpy as np

from bpxhd import build

# a 3D mesh with two cells per axis
m = build(3, 2)
print(m)
print("vertices", m.num_vertices, "elements", m.num_elements, "h", m.mesh_size)

# all elements are translates of the six unit-cube simplices scaled by 1/n
s = m.perm_simplices[0]
print("volume", s.volume, "= 1/(d! n^d) =", 1 / (math.factorial(3) * 2 ** 3))
print("shape ratio h/r", s.shape_ratio, "closed form", 2 * math.sqrt(3) + 2 * math.sqrt(6))

# the shape ratio grows linearly in d, like that of the regular simplex
for d in range(1, 7):
    print(d, round(build(d, 1).perm_simplices[0].shape_ratio, 3), round(math.sqrt(2 * d * (d + 1)), 3))

# point location sorts the fractional coordinates inside the cell
x = np.array([0.9, 0.1, 0.6])
eid, lam = m.locate(x)
print("element", eid, "barycentrics", lam.round(3))
print("reconstructed point", lam @ m.vertices[m.elements[eid]])

# boundary faces: 2d n^(d-1) (d-1)!
print("boundary faces", len(m.boundary_faces()), "expected", 2 * 3 * 2 ** 2 * 2)
