"""Seeded test-function families on a lattice.

Every family is a deterministic function of ``(name, seed, index)``; the first
member of the deterministic families is the plain textbook function and
later members are seeded variants of it.
"""

from __future__ import annotations

import re

import numpy as np

from .geometry import Domain
from .grid import GridFunction, Lattice

__all__ = ["FAMILIES", "parse_family", "fixture_family"]

FAMILIES = ("linear", "radial_bump", "log_bump", "two_level", "random_smooth")

_NAME = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*(\d+)\s*\))?\s*$")


def parse_family(name: str) -> tuple[str, int | None]:
    """Split ``"random_smooth(4)"`` into ``("random_smooth", 4)``."""
    m = _NAME.match(name)
    if not m or m.group(1) not in FAMILIES:
        raise ValueError(f"unknown fixture family {name!r}; choose from {', '.join(FAMILIES)}")
    fam, k = m.group(1), m.group(2)
    if k is not None and fam != "random_smooth":
        raise ValueError(f"family {fam!r} takes no argument")
    return fam, (int(k) if k is not None else None)


def _rng(seed: int, fam: str, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, FAMILIES.index(fam), i])


def _bump_geometry(domain: Domain, rng: np.random.Generator | None):
    c0 = np.asarray(domain.center_point, dtype=float)
    L = float(domain.dist_boundary(c0[None])[0])
    if rng is None:
        return c0, 0.5 * L
    v = rng.normal(size=c0.shape)
    v *= rng.uniform(0, 0.25 * L) / np.linalg.norm(v)
    return c0 + v, rng.uniform(0.25, 0.5) * L


def _member(fam: str, k: int | None, lattice: Lattice, domain: Domain, rng, first: bool):
    n = lattice.n
    if fam == "linear":
        e = np.eye(n)[0] if first else rng.normal(size=n)
        e = e / np.linalg.norm(e)
        return lambda x: x @ e
    if fam == "radial_bump":
        c, r = _bump_geometry(domain, None if first else rng)
        return lambda x: np.clip(1.0 - np.sum((x - c) ** 2, -1) / r**2, 0.0, None) ** 2
    if fam == "log_bump":
        c, r = _bump_geometry(domain, None if first else rng)
        return lambda x: np.log(r / np.maximum(np.linalg.norm(x - c, axis=-1), r / 64.0)).clip(0.0)
    if fam == "two_level":
        mid = domain.window.center[0]
        if first:
            return lambda x: (x[..., 0] < mid).astype(float)
        lo, hi = rng.uniform(-1, 1, size=2)
        return lambda x: np.where(x[..., 0] < mid, hi, lo)
    # random_smooth: cosine modes with integer frequencies up to k on the window
    k = 4 if k is None else k
    if k < 1:
        raise ValueError("random_smooth needs k >= 1")
    freqs = np.array([f for f in np.ndindex(*(k + 1,) * n) if any(f)], dtype=float)
    amp = rng.normal(size=len(freqs)) / (1.0 + np.linalg.norm(freqs, axis=1))
    phase = rng.uniform(0, 2 * np.pi, size=len(freqs))
    lo = np.asarray(lattice.window.lo)
    side = lattice.window.sides
    return lambda x: np.cos(np.pi * ((x - lo) / side) @ freqs.T + phase) @ amp


def fixture_family(name: str, seed: int, lattice: Lattice, domain: Domain, count: int = 1) -> list[GridFunction]:
    """``count`` members of a named family sampled on ``lattice``.

    Parameters
    ----------
    name : str
        ``linear``, ``radial_bump``, ``log_bump``, ``two_level`` or
        ``random_smooth(k)`` (``k`` the largest integer frequency, default 4).
    seed : int
        Seed for the variants; the first deterministic member ignores it.

    Raises
    ------
    ValueError
        Unknown family name.
    """
    fam, k = parse_family(name)
    out = []
    for i in range(count):
        rng = _rng(seed, fam, i)
        f = _member(fam, k, lattice, domain, rng, first=(i == 0 and fam != "random_smooth"))
        out.append(GridFunction.from_callable(lattice, domain, f))
    return out
