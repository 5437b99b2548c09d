"""
Capacities of discs and boundary dimensions
===========================================

Discrete (1/2, 2)-capacity of nested discs in the unit square, then the
Assouad dimension estimates that decide which boundary condition applies.
"""

from fraclab.assouad import corollary_conditions
from fraclab.capacity import CapacityProblem, capacity_estimate, disc_compact
from fraclab.functional import FracParams
from fraclab.geometry import make_domain
from fraclab.grid import Lattice

D = make_domain("unit_square")
P = FracParams(0.5, 2.0)
lat = Lattice.cells(D.window, 32)
for r in (0.05, 0.1, 0.2, 0.3):
    res = capacity_estimate(CapacityProblem(disc_compact(lat, D, (0.5, 0.5), r), D, P, lat))
    print(f"disc radius {r:.2f}: capacity <= {res.value_upper:.4f} ({res.iterations} CG steps)")

# compare the boundary dimension with n - delta p
for name, delta in [("plane_minus_segment", 0.3), ("plane_minus_segment", 0.5), ("cone", 0.6)]:
    res = corollary_conditions(make_domain(name), FracParams(delta, 2.0))
    print(f"{name:20s} delta={delta}: threshold {res['threshold']:.2f}, "
          f"upper {res['upper']:.3f}, lower {res['lower']:.3f} -> A {res['A']}, B {res['B']}")
