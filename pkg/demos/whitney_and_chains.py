"""
Whitney cubes and chains on the gallery domains
===============================================

Decompose each bounded domain into dyadic Whitney cubes, join every cube to
the central one by a chain, and look at the measured chain constants.
"""

import numpy as np

from fraclab.chains import build_chains, verify_chain_properties
from fraclab.geometry import make_domain
from fraclab.whitney import dilation_overlap, uncovered_measure, whitney_decompose

# every accepted cube satisfies diam <= dist <= 4 diam
for name in ["unit_square", "ball", "l_shape"]:
    W = whitney_decompose(make_domain(name), 6)
    ratio = W.dists / W.diams
    print(f"{name:12s} {len(W):5d} cubes, dist/diam in [{ratio.min():.3f}, {ratio.max():.3f}], "
          f"uncovered {uncovered_measure(W):.2e}, overlap of 9/8-dilates {dilation_overlap(W)}")

# chains are shortest paths preferring large cubes; rho and sigma are measured
for name in ["unit_square", "ball", "l_shape"]:
    C = build_chains(whitney_decompose(make_domain(name), 6))
    longest = max(len(c) for c in C.chains.values())
    sig = [verify_chain_properties(C, q).sigma_measured for q in (1, 2, 4)]
    print(f"{name:12s} center {C.center_cube}, rho {C.rho}, longest chain {longest}, "
          f"sigma(q=1,2,4) = {np.round(sig, 1).tolist()}")

# sigma keeps growing with the resolution: every finer layer adds to the central shadow
for level in (4, 5, 6, 7):
    C = build_chains(whitney_decompose(make_domain("unit_square"), level))
    print(f"max_level {level}: sigma(q=4) = {C.sigma(4.0):.1f}")
