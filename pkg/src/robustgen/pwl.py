"""Exact one-dimensional piecewise-linear functions.

These serve as the predictor family with an exactly known Lipschitz constant
and exactly computable extrema over intervals, and as the random scalar maps
used in contraction checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Stream


@dataclass(frozen=True)
class PiecewiseLinear1D:
    breakpoints: np.ndarray
    values: np.ndarray
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64).ravel()
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if b.size == 0 or b.size != v.size:
            raise ValueError("need matching, non-empty breakpoints and values")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "left_slope", float(self.left_slope))
        object.__setattr__(self, "right_slope", float(self.right_slope))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def lipschitz(self) -> float:
        s = np.abs(self.slopes)
        inner = float(s.max()) if s.size else 0.0
        return max(inner, abs(self.left_slope), abs(self.right_slope))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        b, v = self.breakpoints, self.values
        out = np.interp(x, b, v)
        out = np.where(x < b[0], v[0] + self.left_slope * (x - b[0]), out)
        out = np.where(x > b[-1], v[-1] + self.right_slope * (x - b[-1]), out)
        return out if out.ndim else float(out)

    def extrema(self, a: float, b: float) -> tuple[float, float]:
        """(min, max) of the function over the closed interval [a, b]."""
        inside = self.breakpoints[(self.breakpoints > a) & (self.breakpoints < b)]
        pts = np.concatenate([[a, b], inside])
        vals = self(pts)
        return float(vals.min()), float(vals.max())

    def upper_envelope(self, x: float, rho: float) -> float:
        return self.extrema(x - rho, x + rho)[1]

    def lower_envelope(self, x: float, rho: float) -> float:
        return self.extrema(x - rho, x + rho)[0]

    def range_bounds(self) -> tuple[float, float]:
        """Global (inf, sup); infinite when an extrapolation ray is unbounded."""
        lo, hi = float(self.values.min()), float(self.values.max())
        if self.left_slope > 0 or self.right_slope < 0:
            lo = -np.inf
        if self.left_slope < 0 or self.right_slope > 0:
            hi = np.inf
        return lo, hi

    def clamp(self, lo: float = -1.0, hi: float = 1.0) -> "PiecewiseLinear1D":
        """Exact representation of ``clip(f, lo, hi)`` as another PWL function."""
        b = list(self.breakpoints)
        v = list(self.values)
        left_slope, right_slope = self.left_slope, self.right_slope

        # extend rays to where they leave [lo, hi]
        if left_slope != 0.0:
            target = lo if left_slope > 0 else hi
            if (v[0] - target) * left_slope > 0:
                b.insert(0, b[0] - (v[0] - target) / left_slope)
                v.insert(0, target)
            left_slope = 0.0
        if right_slope != 0.0:
            target = hi if right_slope > 0 else lo
            if (target - v[-1]) * right_slope > 0:
                b.append(b[-1] + (target - v[-1]) / right_slope)
                v.append(target)
            right_slope = 0.0

        knots_x, knots_v = [b[0]], [v[0]]
        for x0, x1, v0, v1 in zip(b[:-1], b[1:], v[:-1], v[1:]):
            crossings = []
            for level in (lo, hi):
                if (v0 - level) * (v1 - level) < 0:
                    crossings.append(x0 + (level - v0) * (x1 - x0) / (v1 - v0))
            for xc in sorted(crossings):
                if knots_x[-1] < xc < x1:
                    knots_x.append(xc)
                    knots_v.append(v0 + (v1 - v0) * (xc - x0) / (x1 - x0))
            knots_x.append(x1)
            knots_v.append(v1)

        return PiecewiseLinear1D(
            np.array(knots_x), np.clip(knots_v, lo, hi), left_slope, right_slope
        )

    @classmethod
    def identity(cls, slope: float = 1.0) -> "PiecewiseLinear1D":
        return cls(np.array([0.0]), np.array([0.0]), slope, slope)

    @classmethod
    def constant(cls, c: float) -> "PiecewiseLinear1D":
        return cls(np.array([0.0]), np.array([float(c)]))

    @classmethod
    def random(
        cls,
        stream: Stream,
        lipschitz: float,
        max_breaks: int = 5,
        span: float = 2.0,
        through_origin: bool = False,
    ) -> "PiecewiseLinear1D":
        """Random PWL with every slope drawn uniformly from [-lipschitz, lipschitz].

        With ``through_origin`` the function is anchored at f(0) = 0 and 0 is
        one of the breakpoints; otherwise the value at the first breakpoint is
        uniform in [-1, 1].
        """
        k = 1 + stream.below(max_breaks)
        if through_origin:
            others = np.sort(stream.uniform(k - 1, -span, span))
            b = np.unique(np.concatenate([[0.0], others]))
        else:
            b = np.unique(np.sort(stream.uniform(k, -span, span)))
        slopes = stream.uniform(b.size + 1, -lipschitz, lipschitz)
        inner = slopes[1:-1]
        v = np.empty(b.size)
        v[0] = 0.0 if through_origin else float(stream.uniform(1, -1.0, 1.0)[0])
        for i in range(1, b.size):
            v[i] = v[i - 1] + inner[i - 1] * (b[i] - b[i - 1])
        if through_origin:
            v -= v[np.searchsorted(b, 0.0)]
        return cls(b, v, float(slopes[0]), float(slopes[-1]))
