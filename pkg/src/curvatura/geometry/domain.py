"""Flat tori and axis-aligned boxes, and their grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_QUADRATURE_DIM = 6
MAX_EXTRACTION_DIM = 3


@dataclass(frozen=True)
class Domain:
    """A flat torus prod(R / L_i Z) or a box prod [lo_i, hi_i].

    For a torus ``lo`` is the origin and ``hi`` holds the periods.
    """

    kind: str
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if self.kind not in ("torus", "box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be nonempty and of equal length")
        if not 1 <= len(self.lo) <= MAX_QUADRATURE_DIM:
            raise ValueError(f"dimension must lie in [1, {MAX_QUADRATURE_DIM}]")
        for l, h in zip(self.lo, self.hi):
            if not (np.isfinite(l) and np.isfinite(h) and h > l):
                if self.kind == "torus":
                    raise ValueError("torus periods must be positive and finite")
                raise ValueError("box bounds must satisfy lo < hi")

    @classmethod
    def torus(cls, periods) -> "Domain":
        periods = tuple(float(p) for p in np.atleast_1d(periods))
        return cls("torus", tuple(0.0 for _ in periods), periods)

    @classmethod
    def box(cls, lo, hi) -> "Domain":
        return cls("box", tuple(float(v) for v in np.atleast_1d(lo)),
                   tuple(float(v) for v in np.atleast_1d(hi)))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def periods(self) -> tuple:
        if not self.is_torus:
            raise AttributeError("a box has no periods")
        return self.hi

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def resolution(self, res) -> tuple:
        """Per-axis cell counts from an int or a sequence."""
        if np.ndim(res) == 0:
            res = (int(res),) * self.dim
        res = tuple(int(r) for r in res)
        if len(res) != self.dim:
            raise ValueError(f"resolution needs {self.dim} entries, got {len(res)}")
        if min(res) < 1:
            raise ValueError("resolution must be positive")
        return res

    def spacing(self, res) -> np.ndarray:
        return self.lengths / np.asarray(self.resolution(res), dtype=float)

    def cell_measure(self, res) -> float:
        return float(np.prod(self.spacing(res)))

    def centers_1d(self, res, axis: int) -> np.ndarray:
        r = self.resolution(res)[axis]
        h = self.lengths[axis] / r
        return self.lo[axis] + (np.arange(r) + 0.5) * h

    def nodes_1d(self, res, axis: int) -> np.ndarray:
        """Grid nodes; a torus has r nodes per axis (wrapping), a box r + 1."""
        r = self.resolution(res)[axis]
        h = self.lengths[axis] / r
        count = r if self.is_torus else r + 1
        return self.lo[axis] + np.arange(count) * h

    def wrap(self, points) -> np.ndarray:
        """Reduce torus coordinates into [lo, hi); boxes are returned as is."""
        points = np.asarray(points, dtype=float)
        if not self.is_torus:
            return points
        lo = np.asarray(self.lo)
        return lo + np.mod(points - lo, self.lengths)

    def min_image(self, delta) -> np.ndarray:
        """Shortest representative of a displacement (torus only)."""
        delta = np.asarray(delta, dtype=float)
        if not self.is_torus:
            return delta
        L = self.lengths
        return delta - L * np.round(delta / L)

    def describe(self) -> dict:
        if self.is_torus:
            return {"kind": "torus", "periods": list(self.hi)}
        return {"kind": "box", "bounds": [[l, h] for l, h in zip(self.lo, self.hi)]}
