"""
Probing the inequalities behind the stability analysis
======================================================

Every constant in the stability proofs is generic. These probes evaluate
both sides of each inequality on actual solutions and report the fitted
constants: Caccioppoli (gradient bounded by function mass on a larger
ball), doubling, the three-spheres interpolation exponent, the
double-exponential unique-continuation lower bound, and the Carleman
weighted inequality.
"""

import numpy as np

from qscope.forward import k2_problem, solve_forward
from qscope.grid import ScalarField, TensorField
from qscope.probes import (alpha_beta, caccioppoli_ratio, carleman_ratio,
                           doubling_ratio, interior_lattice,
                           three_spheres_fit, ucp_lowerbound_fit)

p = k2_problem(129)
u, _ = solve_forward(p)
centers = interior_lattice(5, margin=0.25)
r = 0.05

print("--- ball inequalities on the k2 solution ---")
cacc = max(caccioppoli_ratio(u, c, r)[0] / caccioppoli_ratio(u, c, r)[1]
           for c in centers)
doub = max(doubling_ratio(u, c, r) for c in centers)
print(f"  caccioppoli constant (max over {len(centers)} centers): {cacc:.3f}")
print(f"  doubling constant:                         {doub:.3f}")

fits = [three_spheres_fit(u, c, r)[3] for c in centers]
print(f"  three-spheres exponent range: [{min(fits):.3f}, {max(fits):.3f}] "
      f"(must lie in (0,1))")

c_fit, slacks = ucp_lowerbound_fit(u, [(c, r) for c in centers])
print(f"  unique-continuation constant c: {c_fit:.3f} "
      f"(bound exp(-c e^(c/r)) <= local H1 norm, min slack {min(slacks):.2e})")

print("\n--- Carleman inequality on an interior bump ---")


def bump(X, Y):
    r2 = ((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.16
    out = np.zeros_like(X)
    m = r2 < 1.0
    out[m] = np.exp(-1.0 / (1.0 - r2[m]))
    return out


v = ScalarField.from_function(p.grid, bump)
psi = ScalarField.from_function(p.grid, lambda X, Y: X)
for tau in (4.0, 8.0, 16.0, 32.0):
    lhs, rhs, _ = carleman_ratio(v, p.A, psi, lambda_c=2.0, tau=tau)
    print(f"  tau={tau:5.1f}  weighted lhs/rhs = {lhs / rhs:.4f}")

a, b = alpha_beta(2.0)
print(f"\nthree-spheres derivation constants at lambda=2: "
      f"alpha={a:.4f}, beta={b:.4f}")
