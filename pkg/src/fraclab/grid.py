"""Uniform lattices over a domain window and functions sampled on their cells."""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import Box, DyadicCube, Domain, domain_from_json

__all__ = ["Lattice", "GridFunction", "parse_h"]

MAGIC = b"FLGF"
VERSION = 1


def parse_h(value) -> float:
    """Accept ``0.015625``, ``"1/64"`` or ``64`` (as a cell count) style inputs."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class Lattice:
    """Cells ``lo + h * (i + [0, 1]^n)`` with ``0 <= i < shape``."""

    lo: tuple[float, ...]
    h: float
    shape: tuple[int, ...]

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("cell size must be positive")
        if len(self.lo) != len(self.shape):
            raise ValueError("lo and shape dimensions differ")

    @classmethod
    def over(cls, window: Box, h: float | str) -> "Lattice":
        """Lattice filling ``window``; ``h`` must divide every window side."""
        h = parse_h(h)
        counts = []
        for side in window.sides:
            m = side / h
            if abs(m - round(m)) > 1e-9 * max(m, 1):
                raise ValueError(f"h = {h} does not divide the window side {side}")
            counts.append(int(round(m)))
        return cls(tuple(float(v) for v in window.lo), h, tuple(counts))

    @classmethod
    def cells(cls, window: Box, count: int) -> "Lattice":
        """``count`` cells along the longest window side."""
        return cls.over(window, window.side / count)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def window(self) -> Box:
        lo = np.asarray(self.lo)
        return Box(tuple(lo), tuple(lo + self.h * np.asarray(self.shape)))

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return [self.lo[d] + (np.arange(self.shape[d]) + 0.5) * self.h for d in range(self.n)]

    @cached_property
    def centers(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        out = np.stack(grids, axis=-1)
        out.setflags(write=False)
        return out

    def inside_mask(self, D: Domain) -> np.ndarray:
        return D.inside(self.centers)

    def cube_slice(self, Q: DyadicCube | Box) -> tuple[slice, ...]:
        """Cells whose centers lie in the closed cube."""
        box = Q.box() if isinstance(Q, DyadicCube) else Q
        lo = (np.asarray(box.lo) - np.asarray(self.lo)) / self.h - 0.5
        hi = (np.asarray(box.hi) - np.asarray(self.lo)) / self.h - 0.5
        a = np.clip(np.ceil(lo - 1e-9).astype(int), 0, None)
        b = np.minimum(np.floor(hi + 1e-9).astype(int) + 1, self.shape)
        return tuple(slice(int(x), int(max(x, y))) for x, y in zip(a, b))

    def dyadic_level(self) -> int | None:
        """``J`` with ``h = 2^-J`` when the lattice is aligned with the dyadic grid."""
        J = -math.log2(self.h)
        if abs(J - round(J)) > 1e-12:
            return None
        J = int(round(J))
        if any(abs(v / self.h - round(v / self.h)) > 1e-9 for v in self.lo):
            return None
        return J

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "h": self.h, "shape": list(self.shape)}


class GridFunction:
    """Real values on the lattice cells lying in a domain; zero elsewhere.

    Parameters
    ----------
    lattice : Lattice
    domain : Domain
    values : ndarray, shape ``lattice.shape``
        Values on cells outside the domain must be 0 (they are dropped).
    """

    __slots__ = ("lattice", "domain", "values", "inside", "__weakref__")

    def __init__(self, lattice: Lattice, domain: Domain, values, inside: np.ndarray | None = None):
        vals = np.array(values, dtype=float, copy=True)
        if vals.shape != lattice.shape:
            raise ValueError(f"values shape {vals.shape} != lattice shape {lattice.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        ins = lattice.inside_mask(domain) if inside is None else np.asarray(inside, dtype=bool)
        vals[~ins] = 0.0
        vals.setflags(write=False)
        ins = ins.copy()
        ins.setflags(write=False)
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "inside", ins)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def from_callable(cls, lattice: Lattice, domain: Domain, f) -> "GridFunction":
        """Sample ``f(points) -> values`` at cell centers."""
        ins = lattice.inside_mask(domain)
        vals = np.zeros(lattice.shape)
        vals[ins] = f(lattice.centers[ins])
        return cls(lattice, domain, vals, ins)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.lattice, self.domain, values, self.inside)

    def __repr__(self):
        return f"GridFunction({self.domain!r}, shape={self.lattice.shape}, h={self.lattice.h:g})"

    @property
    def support_mask(self) -> np.ndarray:
        return self.inside & (self.values != 0)

    @property
    def h(self) -> float:
        return self.lattice.h

    @property
    def n(self) -> int:
        return self.lattice.n

    def inside_values(self) -> np.ndarray:
        return self.values[self.inside]

    def measure(self) -> float:
        return float(self.inside.sum()) * self.lattice.cell_volume

    def mean(self) -> float:
        return float(self.values[self.inside].mean())

    def integral(self, f=None) -> float:
        v = self.values[self.inside]
        if f is not None:
            v = f(v)
        return math.fsum(v) * self.lattice.cell_volume

    def lq_power(self, q: float, shift: float = 0.0) -> float:
        """``sum |u - shift|^q h^n`` over the domain cells."""
        return math.fsum(np.abs(self.values[self.inside] - shift) ** q) * self.lattice.cell_volume

    def __add__(self, c: float) -> "GridFunction":
        return self.with_values(np.where(self.inside, self.values + c, 0.0))

    def __mul__(self, c: float) -> "GridFunction":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    # -- I/O
    def save(self, path: str | Path) -> None:
        """Flat binary file plus a ``.json`` sidecar carrying the domain."""
        path = Path(path)
        lat = self.lattice
        header = MAGIC + struct.pack("<II", VERSION, lat.n)
        header += struct.pack(f"<{lat.n}Q", *lat.shape)
        header += struct.pack("<d", lat.h)
        header += struct.pack(f"<{lat.n}d", *lat.lo)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.inside, dtype=np.uint8).tobytes())
        side = {"lattice": lat.to_json(), "domain": self.domain.to_json(), "format": "FLGF", "version": VERSION}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(side, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "GridFunction":
        path = Path(path)
        raw = path.read_bytes()
        if raw[:4] != MAGIC:
            raise ValueError(f"{path} is not a grid function file")
        version, n = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise ValueError(f"unsupported version {version}")
        off = 12
        shape = struct.unpack_from(f"<{n}Q", raw, off)
        off += 8 * n
        (h,) = struct.unpack_from("<d", raw, off)
        off += 8
        lo = struct.unpack_from(f"<{n}d", raw, off)
        off += 8 * n
        size = int(np.prod(shape))
        vals = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape)
        ins = np.frombuffer(raw, dtype=np.uint8, count=size, offset=off + 8 * size).reshape(shape).astype(bool)
        side = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        domain = domain_from_json(side["domain"])
        return cls(Lattice(tuple(lo), h, tuple(int(s) for s in shape)), domain, vals, ins)

    def to_csv(self, path: str | Path) -> None:
        """One row per domain cell: integer index, center coordinates, value."""
        lat = self.lattice
        idx = np.argwhere(self.inside)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"i{d}" for d in range(lat.n)] + [f"x{d}" for d in range(lat.n)] + ["value"])
            for row in idx:
                c = lat.centers[tuple(row)]
                w.writerow([*map(int, row), *(repr(float(v)) for v in c), repr(float(self.values[tuple(row)]))])
