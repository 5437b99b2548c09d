"""Monte-Carlo value of the full (1/2, 2)-seminorm of u(x) = x_1 on the unit square.

In polar coordinates around x the integrand |x_1 - y_1|^2 |x - y|^-3 dy
becomes cos^2(theta) dr dtheta, so with x uniform in the square, theta
uniform on [0, 2 pi) and r uniform on (0, sqrt 2) the energy is
2 pi sqrt(2) E[cos^2(theta) 1{y in square}].  Run as a script to regenerate
the frozen constants.
"""

import numpy as np


def estimate(samples: int = 40_000_000, seed: int = 20240601, batch: int = 4_000_000):
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        x = rng.random((m, 2))
        th = rng.uniform(0.0, 2 * np.pi, m)
        r = rng.uniform(0.0, np.sqrt(2.0), m)
        y0 = x[:, 0] + r * np.cos(th)
        y1 = x[:, 1] + r * np.sin(th)
        inside = (y0 > 0) & (y0 < 1) & (y1 > 0) & (y1 < 1)
        f = np.where(inside, np.cos(th) ** 2, 0.0) * 2 * np.pi * np.sqrt(2.0)
        total += f.sum()
        total_sq += (f * f).sum()
        done += m
    mean = total / samples
    err = np.sqrt((total_sq / samples - mean**2) / samples)
    return mean, err


if __name__ == "__main__":
    e, s = estimate()
    print(f"energy {e!r} +- {s!r}; seminorm {np.sqrt(e)!r}")
