"""
BPX condition numbers
=====================

The preconditioner C = sum_l h_l^2 I_l M_l^{-1} I_l^T applies a mass solve on
every level of the dyadic hierarchy.  Compared with the plain stiffness
matrix, whose condition number grows like 4^J, the preconditioned condition
number grows slowly and levels off.
"""
from bpxhd import BpxOperator, build_hierarchy, kappa
from bpxhd.spectral import DENSE_LIMIT

for d, levels in [(1, range(2, 9)), (2, range(2, 7)), (3, range(2, 5))]:
    print(f"d = {d}")
    print("   J   dofs   plain      exact  lumped  diag")
    for J in levels:
        H = build_hierarchy(d, J)
        A = H.stiffness[-1]
        method = "dense" if A.shape[0] <= DENSE_LIMIT else "lanczos"
        plain = kappa(A, None, method).kappa
        ks = [kappa(A, BpxOperator(H, v), method).kappa for v in ("exact", "lumped", "diag")]
        print(f"  {J:2d} {A.shape[0]:6d} {plain:9.1f}   " + "  ".join(f"{k:6.2f}" for k in ks))
