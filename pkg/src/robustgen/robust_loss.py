"""Predictors, local extremal envelopes and the robust squared loss.

The perturbation ball is the closed l2 ball of radius rho. For 1-D
piecewise-linear predictors the envelopes are exact; for anything else they
are inner approximations (lower >= true inf, upper <= true sup), which keeps
every "robust loss <= ..." check sound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pwl import PiecewiseLinear1D
from .rademacher import EXACT_SLACK, Check, DimensionError, VectorSet, rad_exact
from .rng import Stream

SUP_METHODS = ("exact_pwl", "grid", "projected_ascent")


class EnvelopeMethodError(ValueError):
    pass


class RangeError(ValueError):
    """Predictor leaves [-1, 1], so it is not a member of the bounded class."""


@dataclass(frozen=True)
class Predictor:
    """Map R^d -> R^C evaluated on row batches of shape (m, d) -> (m, C)."""

    fn: Callable[[np.ndarray], np.ndarray]
    input_dim: int
    output_count: int = 1
    lipschitz_bound: float | None = None
    pwl: PiecewiseLinear1D | None = None
    grad: Callable[[np.ndarray], np.ndarray] | None = None  # (d,) -> (d,) for scalar outputs

    def eval(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise DimensionError(f"expected inputs of width {self.input_dim}, got {X.shape[1]}")
        out = np.asarray(self.fn(X), dtype=np.float64)
        return out.reshape(X.shape[0], self.output_count)

    def scalar(self, x) -> float:
        return float(self.eval(np.asarray(x, dtype=np.float64).reshape(1, -1))[0, 0])

    @classmethod
    def from_pwl(cls, f: PiecewiseLinear1D) -> "Predictor":
        return cls(lambda X: f(X[:, 0]), 1, 1, f.lipschitz, pwl=f)

    @classmethod
    def constant(cls, c: float, input_dim: int = 1) -> "Predictor":
        if input_dim == 1:
            return cls.from_pwl(PiecewiseLinear1D.constant(c))
        return cls(lambda X: np.full(X.shape[0], float(c)), input_dim, 1, 0.0,
                   grad=lambda x: np.zeros(input_dim))

    @classmethod
    def linear(cls, w, b: float = 0.0) -> "Predictor":
        w = np.asarray(w, dtype=np.float64).ravel()
        if w.size == 1:
            f = PiecewiseLinear1D(np.array([0.0]), np.array([float(b)]), w[0], w[0])
            return cls.from_pwl(f)
        return cls(lambda X: X @ w + b, w.size, 1, float(np.linalg.norm(w)), grad=lambda x: w.copy())


@dataclass(frozen=True)
class RobustnessConfig:
    rho: float
    norm: str = "l2"
    sup_method: str = "exact_pwl"
    ascent_steps: int = 20
    restarts: int = 5
    step_size: float | None = None  # defaults to rho / 10
    grid_points: int = 1001
    seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.norm != "l2":
            raise ValueError("only the l2 ball is supported")
        if self.sup_method not in SUP_METHODS:
            raise ValueError(f"unknown sup_method {self.sup_method!r}")
        if self.sup_method == "projected_ascent" and (self.ascent_steps <= 0 or self.restarts <= 0):
            raise ValueError("ascent parameters must be positive")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")

    @property
    def step(self) -> float:
        return self.step_size if self.step_size is not None else self.rho / 10.0


@dataclass(frozen=True)
class SampleSet:
    X: np.ndarray  # (n, d)
    y: np.ndarray  # (n,)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if X.shape[0] < 1 or X.shape[0] != y.size:
            raise DimensionError("need n >= 1 samples with one label each")
        if np.any(np.abs(y) > 1.0):
            raise RangeError("regression labels must lie in [-1, 1]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __iter__(self):
        return iter(zip(self.X, self.y))


@dataclass(frozen=True)
class Envelope:
    lower: float
    upper: float
    method_used: str
    certified_exact: bool


def _ball_project(x0: np.ndarray, z: np.ndarray, rho: float) -> np.ndarray:
    d = z - x0
    r = np.linalg.norm(d)
    return z if r <= rho else x0 + d * (rho / r)


def _num_grad(f: Predictor, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f.scalar(x + e) - f.scalar(x - e)) / (2 * h)
    return g


def _ascent_extreme(f: Predictor, x0: np.ndarray, cfg: RobustnessConfig, sign: float, stream: Stream) -> float:
    """Best value of sign * f found by normalised gradient steps inside the ball."""
    grad = f.grad or (lambda z: _num_grad(f, z))
    best = sign * f.scalar(x0)
    for r in range(cfg.restarts):
        if r == 0:
            z = x0.copy()
        else:
            u = stream.normal(x0.size)
            u *= cfg.rho * float(stream.uniform(1)[0]) ** (1.0 / x0.size) / max(np.linalg.norm(u), 1e-300)
            z = x0 + u
        best = max(best, sign * f.scalar(z))
        for _ in range(cfg.ascent_steps):
            g = sign * grad(z)
            gn = np.linalg.norm(g)
            if gn == 0.0:
                break
            z = _ball_project(x0, z + cfg.step * g / gn, cfg.rho)
            best = max(best, sign * f.scalar(z))
    return sign * best


def envelope(f: Predictor, x, cfg: RobustnessConfig) -> Envelope:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != f.input_dim:
        raise DimensionError(f"point of length {x.size} for a {f.input_dim}-d predictor")
    if f.output_count != 1:
        raise DimensionError("envelopes are defined for scalar predictors")
    rho = cfg.rho

    if cfg.sup_method == "exact_pwl":
        if f.pwl is None:
            raise EnvelopeMethodError("exact_pwl needs a piecewise-linear predictor")
        if f.input_dim != 1:
            raise EnvelopeMethodError("exact_pwl is only available in one dimension")
        lo, hi = f.pwl.extrema(x[0] - rho, x[0] + rho)
        return Envelope(lo, hi, "exact_pwl", True)

    fx = f.scalar(x)
    if rho == 0.0:
        return Envelope(fx, fx, cfg.sup_method, False)

    if cfg.sup_method == "grid":
        if f.input_dim == 1:
            pts = x[0] + np.linspace(-rho, rho, cfg.grid_points)
            vals = f.eval(pts[:, None])[:, 0]
        else:
            stream = Stream(cfg.seed)
            dirs = stream.normal((cfg.grid_points, f.input_dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            vals = f.eval(x + rho * dirs)[:, 0]
        return Envelope(min(fx, float(vals.min())), max(fx, float(vals.max())), "grid", False)

    stream = Stream(cfg.seed)
    upper = _ascent_extreme(f, x, cfg, 1.0, stream)
    lower = _ascent_extreme(f, x, cfg, -1.0, stream)
    return Envelope(min(lower, fx), max(upper, fx), "projected_ascent", False)


def robust_sq_loss(f: Predictor, x, y: float, cfg: RobustnessConfig) -> float:
    env = envelope(f, x, cfg)
    return max((env.upper - y) ** 2, (env.lower - y) ** 2)


def clean_sq_loss(f: Predictor, x, y: float) -> float:
    return (f.scalar(x) - y) ** 2


def envelope_predictor(f: Predictor, rho: float, side: str) -> Predictor:
    """f+ (side='upper') or f- (side='lower') as a predictor of its own."""
    if f.pwl is None or f.input_dim != 1:
        raise EnvelopeMethodError("exact envelope predictors need a 1-D PWL predictor")
    g = f.pwl
    pick = g.upper_envelope if side == "upper" else g.lower_envelope
    return Predictor(
        lambda X: np.array([pick(float(t), rho) for t in X[:, 0]]), 1, 1, f.lipschitz_bound
    )


def loss_vectors(fs: Sequence[Predictor], S: SampleSet, cfg: RobustnessConfig, kind: str) -> VectorSet:
    if not fs:
        raise ValueError("need at least one predictor")
    rows = []
    for f in fs:
        if f.input_dim != S.dim:
            raise DimensionError(f"predictor input dim {f.input_dim} vs sample dim {S.dim}")
        if kind == "eval":
            rows.append(f.eval(S.X)[:, 0])
        elif kind == "clean":
            rows.append((f.eval(S.X)[:, 0] - S.y) ** 2)
        elif kind == "robust":
            rows.append([robust_sq_loss(f, x, y, cfg) for x, y in S])
        else:
            raise ValueError(f"unknown loss-vector kind {kind!r}")
    return VectorSet(np.array(rows, dtype=np.float64))


@dataclass
class ChainReport:
    checks: list[Check]
    closed_size: int
    rad_eval: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def verify_loss_complexity_chain(fs: Sequence[PiecewiseLinear1D], S: SampleSet, rho: float) -> ChainReport:
    """Robust-vs-clean and clean-vs-prediction complexity inequalities, exactly.

    The left-hand robust class uses the given predictors; the right-hand
    classes use the predictors together with their envelopes f+ and f-, the
    set the comparison argument actually ranges over.
    """
    if S.dim != 1:
        raise DimensionError("the chain check runs on 1-D samples")
    for f in fs:
        lo, hi = f.range_bounds()
        if lo < -1.0 or hi > 1.0:
            raise RangeError("predictors must take values in [-1, 1]")
    cfg = RobustnessConfig(rho)
    base = [Predictor.from_pwl(f) for f in fs]
    closed = list(base)
    for p in base:
        closed.append(envelope_predictor(p, rho, "upper"))
        closed.append(envelope_predictor(p, rho, "lower"))

    r_robust = rad_exact(loss_vectors(base, S, cfg, "robust")).value
    r_clean = rad_exact(loss_vectors(closed, S, cfg, "clean")).value
    r_eval = rad_exact(loss_vectors(closed, S, cfg, "eval")).value
    checks = [
        Check("robust_le_2x_clean", r_robust, 2.0 * r_clean, "<=", EXACT_SLACK),
        Check("clean_le_4x_eval", r_clean, 4.0 * r_eval, "<=", EXACT_SLACK),
        Check("robust_le_8x_eval", r_robust, 8.0 * r_eval, "<=", EXACT_SLACK),
    ]
    return ChainReport(checks, len(closed), r_eval)


@dataclass
class EnvelopeLipschitzReport:
    lipschitz: float
    max_upper_slope: float
    max_lower_slope: float
    violations: int
    slack: float = 1e-10
    pairs: int = field(default=0)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def envelope_lipschitz_check(f: PiecewiseLinear1D, rho: float, probe_pairs, slack: float = 1e-10) -> EnvelopeLipschitzReport:
    pairs = np.asarray(probe_pairs, dtype=np.float64).reshape(-1, 2)
    L = f.lipschitz
    worst_up = worst_lo = 0.0
    violations = 0
    for a, b in pairs:
        gap = abs(a - b)
        du = abs(f.upper_envelope(a, rho) - f.upper_envelope(b, rho))
        dl = abs(f.lower_envelope(a, rho) - f.lower_envelope(b, rho))
        violations += int(du > L * gap + slack) + int(dl > L * gap + slack)
        if gap > 0:
            worst_up = max(worst_up, du / gap)
            worst_lo = max(worst_lo, dl / gap)
    return EnvelopeLipschitzReport(L, worst_up, worst_lo, violations, slack, len(pairs))


def grid_robust_loss(f: PiecewiseLinear1D, x: float, y: float, rho: float, points: int = 100_000) -> float:
    """Direct sup of (f(x + delta) - y)^2 over a dense grid of the ball plus f's kinks inside it."""
    grid = np.linspace(x - rho, x + rho, points)
    kinks = f.breakpoints[(f.breakpoints > x - rho) & (f.breakpoints < x + rho)]
    pts = np.concatenate([grid, kinks])
    return float(np.max((f(pts) - y) ** 2))
