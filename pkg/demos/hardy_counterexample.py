"""
Hardy ratios on the plane minus a segment
=========================================

Logarithmic functions collapsing onto the slit make the Hardy ratio grow
when delta p = 1; at delta = 0.3 the same family stays bounded.
"""

from fraclab.inequality import counterexample_sequence

_, critical = counterexample_sequence(m_max=6, delta=0.5, p=2.0, q=2.0, N=256)
_, control = counterexample_sequence(m_max=6, delta=0.3, p=2.0, q=2.0, N=256, control=True)

print(" m   delta=1/2   delta=0.3")
for m, (a, b) in enumerate(zip(critical, control), start=1):
    print(f"{m:2d}   {a:9.4f}   {b:9.4f}")
print(f"growth ratio(6)/ratio(1): {critical[-1] / critical[0]:.3f} at delta=1/2, "
      f"{control[-1] / control[0]:.3f} at delta=0.3")
