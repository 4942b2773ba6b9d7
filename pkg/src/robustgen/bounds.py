"""Closed-form bound calculators and the checks built on them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pwl import PiecewiseLinear1D
from .rademacher import VectorSet, rad_exact
from .robust_loss import Predictor, RobustnessConfig, SampleSet, robust_sq_loss
from .rng import Stream

GAP_SLACK = 1e-10


class MissingLipschitzError(ValueError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    L: float
    rho: float
    sigma: float = 0.0
    epsilon: float = 0.0
    delta_conf: float = 0.05
    n: int = 1

    def __post_init__(self):
        if not 0.0 < self.delta_conf < 1.0:
            raise ValueError("delta_conf must lie strictly inside (0, 1)")
        if min(self.L, self.rho, self.sigma, self.epsilon) < 0:
            raise ValueError("L, rho, sigma and epsilon must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be a positive integer")


@dataclass(frozen=True)
class LossReport:
    clean_train: float
    robust_train: float
    residual_abs_mean: float
    n: int
    robust_test: float | None = None


def gap_bound(L: float, rho: float, clean_risk: float) -> float:
    """Upper bound on robust minus clean empirical risk for an L-Lipschitz predictor."""
    if min(L, rho, clean_risk) < 0:
        raise ValueError("inputs must be nonnegative")
    return 2.0 * L * rho * math.sqrt(clean_risk) + (L * rho) ** 2


def a_rho(L: float, rho: float) -> float:
    return (2.0 + L * rho) ** 2


def _confidence_term(n: int, delta_conf: float) -> float:
    if not 0.0 < delta_conf < 1.0:
        raise ValueError("delta_conf must lie strictly inside (0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    return math.sqrt(2.0 * math.log(2.0 / delta_conf) / n)


def gen_bound_rhs(expected_rad: float, L: float, rho: float, n: int, delta_conf: float) -> float:
    """Right-hand side of the high-probability bound on T - R."""
    if expected_rad < 0:
        raise ValueError("expected_rad must be nonnegative")
    return 2.0 * expected_rad + a_rho(L, rho) * _confidence_term(n, delta_conf)


def rad_lower_bound(gamma: float, L: float, rho: float, n: int, delta_conf: float) -> float:
    """Lower bound on expected robust-loss complexity given a gap T - R >= gamma.

    Negative values mean the bound is vacuous; they are returned unclamped.
    """
    return gamma / 2.0 - a_rho(L, rho) / 2.0 * _confidence_term(n, delta_conf)


def overfit_gap(epsilon: float, L: float, rho: float, sigma: float) -> float:
    return epsilon - (2.0 * L * rho * sigma + (L * rho) ** 2)


def rad_lower_bound_overfit(epsilon: float, L: float, rho: float, sigma: float, n: int, delta_conf: float) -> float:
    return rad_lower_bound(overfit_gap(epsilon, L, rho, sigma), L, rho, n, delta_conf)


def is_vacuous(lower_bound: float) -> bool:
    return lower_bound <= 0.0


def theoretical_L(law: str, n: float, p: float, d: float) -> tuple[float, tuple[float, float]]:
    """Order of the required Lipschitz constant (up to constants) and its (n, p) exponents."""
    if min(n, p, d) <= 0:
        raise ValueError("n, p and d must be positive")
    if law == "bubeck":
        return math.sqrt(n * d / p), (0.5, -0.5)
    if law == "wu":
        return n ** (1.0 / d), (1.0 / d, 0.0)
    raise ValueError(f"unknown law {law!r}")


def loss_report(f: Predictor, S: SampleSet, cfg: RobustnessConfig) -> LossReport:
    residuals = f.eval(S.X)[:, 0] - S.y
    robust = [robust_sq_loss(f, x, y, cfg) for x, y in S]
    return LossReport(
        clean_train=float(np.mean(residuals**2)),
        robust_train=float(np.mean(robust)),
        residual_abs_mean=float(np.mean(np.abs(residuals))),
        n=S.n,
    )


@dataclass(frozen=True)
class GapCheck:
    report: LossReport
    gap: float
    bound: float
    passed: bool


def check_gap_bound(f: Predictor, S: SampleSet, cfg: RobustnessConfig, L: float | None = None) -> GapCheck:
    if L is None:
        L = f.lipschitz_bound
    if L is None:
        raise MissingLipschitzError("predictor carries no Lipschitz bound and none was given")
    rep = loss_report(f, S, cfg)
    gap = rep.robust_train - rep.clean_train
    bound = gap_bound(L, cfg.rho, rep.clean_train)
    return GapCheck(rep, gap, bound, gap <= bound + GAP_SLACK)


# finite-class sanity check of the high-probability bound


@dataclass(frozen=True)
class FiniteProblem:
    """Finite distribution over labelled points and a finite predictor class."""

    points: np.ndarray  # (K,)
    labels: np.ndarray  # (K,)
    probs: np.ndarray  # (K,)
    predictors: tuple[PiecewiseLinear1D, ...]
    rho: float

    @property
    def lipschitz(self) -> float:
        return max(f.lipschitz for f in self.predictors)

    def loss_table(self) -> np.ndarray:
        """Exact robust losses, shape (predictors, points)."""
        cfg = RobustnessConfig(self.rho)
        return np.array(
            [
                [robust_sq_loss(Predictor.from_pwl(f), [x], y, cfg) for x, y in zip(self.points, self.labels)]
                for f in self.predictors
            ]
        )

    @classmethod
    def random(cls, stream: Stream, K: int = 4, n_predictors: int = 4, L: float = 2.0, rho: float = 0.1) -> "FiniteProblem":
        points = np.sort(stream.uniform(K, -1.0, 1.0))
        labels = stream.uniform(K, -1.0, 1.0)
        w = stream.uniform(K, 0.1, 1.0)
        preds = tuple(PiecewiseLinear1D.random(stream, L, max_breaks=4).clamp() for _ in range(n_predictors))
        return cls(points, labels, w / w.sum(), preds, rho)


def _compositions(total: int, parts: int):
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, counts = -1, []
        for c in cuts:
            counts.append(c - prev - 1)
            prev = c
        counts.append(total + parts - 1 - prev - 1)
        yield counts


def expected_robust_rad(problem: FiniteProblem, n: int, table: np.ndarray | None = None) -> float:
    """E over S' ~ D^n of the exact complexity of the robust loss class, by enumeration.

    Complexity is invariant under permuting coordinates, so only the count
    vector of S' matters; each composition is weighted by its multinomial
    probability.
    """
    if table is None:
        table = problem.loss_table()
    K = len(problem.points)
    logp = np.log(problem.probs)
    terms = []
    for counts in _compositions(n, K):
        cols = np.repeat(np.arange(K), counts)
        logw = math.lgamma(n + 1) + sum(c * lp - math.lgamma(c + 1) for c, lp in zip(counts, logp))
        terms.append(math.exp(logw) * rad_exact(VectorSet(table[:, cols])).value)
    return math.fsum(terms)


@dataclass(frozen=True)
class GeneralizationSanity:
    n: int
    delta_conf: float
    trials: int
    rhs: float
    expected_rad: float
    max_gap: float
    frequency: float

    @property
    def passed(self) -> bool:
        return self.frequency >= 1.0 - self.delta_conf


def generalization_event_frequency(
    problem: FiniteProblem, n: int, delta_conf: float, trials: int = 200, seed: int = 0
) -> GeneralizationSanity:
    """Fraction of resampled training sets on which sup_f (T - R) <= rhs."""
    table = problem.loss_table()
    T = table @ problem.probs
    erad = expected_robust_rad(problem, n, table)
    rhs = gen_bound_rhs(erad, problem.lipschitz, problem.rho, n, delta_conf)
    stream = Stream(seed, n)
    cdf = np.cumsum(problem.probs)
    hits, worst = 0, -math.inf
    for _ in range(trials):
        idx = np.minimum(np.searchsorted(cdf, stream.uniform(n), side="right"), len(cdf) - 1)
        R = table[:, idx].mean(axis=1)
        gap = float(np.max(T - R))
        worst = max(worst, gap)
        hits += gap <= rhs
    return GeneralizationSanity(n, delta_conf, trials, rhs, erad, worst, hits / trials)


def summarize_bounds(inp: BoundInputs, gamma: float | None = None, clean_risk: float = 0.0,
                     expected_rad: float = 0.0, p: float = 1.0, d: float = 10.0) -> dict:
    """Every closed-form quantity for one set of inputs, as a JSON-ready dict."""
    gamma_final = overfit_gap(inp.epsilon, inp.L, inp.rho, inp.sigma)
    out = {
        "inputs": {
            "L": inp.L, "rho": inp.rho, "sigma": inp.sigma, "epsilon": inp.epsilon,
            "delta_conf": inp.delta_conf, "n": inp.n, "clean_risk": clean_risk,
            "expected_rad": expected_rad, "p": p, "d": d,
        },
        "gap_bound": gap_bound(inp.L, inp.rho, clean_risk),
        "a_rho": a_rho(inp.L, inp.rho),
        "gen_bound_rhs": gen_bound_rhs(expected_rad, inp.L, inp.rho, inp.n, inp.delta_conf),
        "rad_lower_bound_overfit": {
            "gamma": gamma_final,
            "value": rad_lower_bound_overfit(inp.epsilon, inp.L, inp.rho, inp.sigma, inp.n, inp.delta_conf),
        },
        "theoretical_L": {},
    }
    out["rad_lower_bound_overfit"]["vacuous"] = is_vacuous(out["rad_lower_bound_overfit"]["value"])
    if gamma is not None:
        v = rad_lower_bound(gamma, inp.L, inp.rho, inp.n, inp.delta_conf)
        out["rad_lower_bound"] = {"gamma": gamma, "value": v, "vacuous": is_vacuous(v)}
    for law in ("bubeck", "wu"):
        value, (alpha, beta) = theoretical_L(law, inp.n, p, d)
        out["theoretical_L"][law] = {"value": value, "alpha": alpha, "beta": beta}
    return out


def sample_from_pairs(pairs: Sequence[tuple[float, float]]) -> SampleSet:
    xs, ys = zip(*pairs)
    return SampleSet(np.array(xs)[:, None], np.array(ys))

