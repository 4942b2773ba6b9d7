"""Randomised exact-oracle suites over every inequality of the theory.

Each suite returns a dict with the trial count, the number of violations and
per-trial records holding both sides of the checked inequality.
"""

from __future__ import annotations

import numpy as np

from .bounds import check_gap_bound
from .pwl import PiecewiseLinear1D
from .rademacher import random_instance, verify_lemma_suite
from .robust_loss import (
    Predictor,
    RobustnessConfig,
    SampleSet,
    envelope_lipschitz_check,
    grid_robust_loss,
    robust_sq_loss,
    verify_loss_complexity_chain,
)
from .rng import Stream

ENDPOINT_TOL = 1e-6
ENVELOPE_TOL = 1e-10
CHAIN_RHOS = (0.05, 0.1, 0.3)


def _suite(name: str, records: list[dict]) -> dict:
    return {
        "suite": name,
        "trials": len(records),
        "violations": sum(not r["passed"] for r in records),
        "records": records,
    }


def set_algebra_suite(trials: int, seed: int, max_dim: int = 8, max_size: int = 8,
                      understate_lipschitz: float = 1.0) -> list[dict]:
    """Translation, sums, differences, contraction, absolute value and maxima.

    ``understate_lipschitz`` < 1 scales the declared map constants down, a
    negative control that must produce contraction violations.
    """
    stream = Stream(seed, 101)
    per_check: dict[str, list[dict]] = {}
    for t in range(trials):
        A, B, maps = random_instance(stream, max_dim, max_size)
        if understate_lipschitz != 1.0:
            maps = maps.with_constants(maps.lipschitz_constants * understate_lipschitz)
        for chk in verify_lemma_suite(A, B, maps, mode="exact"):
            per_check.setdefault(chk.name, []).append({"trial": t, "dim": A.dim, **chk.as_dict()})
    return [_suite(name, recs) for name, recs in per_check.items()]


def _random_sample(stream: Stream, n: int, lo: float = -2.0, hi: float = 2.0) -> SampleSet:
    return SampleSet(stream.uniform(n, lo, hi)[:, None], stream.uniform(n, -1.0, 1.0))


def endpoint_suite(trials: int, seed: int, grid_points: int = 100_000) -> dict:
    stream = Stream(seed, 102)
    records = []
    for t in range(trials):
        f = PiecewiseLinear1D.random(stream, float(stream.uniform(1, 0.1, 5.0)[0]))
        x = float(stream.uniform(1, -2.0, 2.0)[0])
        y = float(stream.uniform(1, -1.0, 1.0)[0])
        rho = float(stream.uniform(1, 0.0, 0.5)[0])
        exact = robust_sq_loss(Predictor.from_pwl(f), [x], y, RobustnessConfig(rho))
        brute = grid_robust_loss(f, x, y, rho, grid_points)
        records.append({"trial": t, "lhs": exact, "rhs": brute, "relation": "==", "slack": ENDPOINT_TOL,
                        "passed": abs(exact - brute) <= ENDPOINT_TOL})
    return _suite("endpoint_exact", records)


def envelope_suite(trials: int, seed: int, probes: int = 100) -> dict:
    stream = Stream(seed, 103)
    records = []
    for t in range(trials):
        f = PiecewiseLinear1D.random(stream, float(stream.uniform(1, 0.0, 5.0)[0]))
        rho = float(stream.uniform(1, 0.0, 0.5)[0])
        pairs = stream.uniform((probes, 2), -3.0, 3.0)
        rep = envelope_lipschitz_check(f, rho, pairs, ENVELOPE_TOL)
        records.append({"trial": t, "lhs": max(rep.max_upper_slope, rep.max_lower_slope), "rhs": rep.lipschitz,
                        "relation": "<=", "slack": ENVELOPE_TOL, "passed": rep.passed})
    return _suite("envelope_lipschitz", records)


def gap_suite(trials: int, seed: int, max_n: int = 8) -> dict:
    stream = Stream(seed, 104)
    records = []
    for t in range(trials):
        f = PiecewiseLinear1D.random(stream, float(stream.uniform(1, 0.0, 5.0)[0]))
        S = _random_sample(stream, 1 + stream.below(max_n))
        rho = float(stream.uniform(1, 0.0, 0.5)[0])
        chk = check_gap_bound(Predictor.from_pwl(f), S, RobustnessConfig(rho))
        records.append({"trial": t, "lhs": chk.gap, "rhs": chk.bound, "relation": "<=", "slack": 1e-10,
                        "passed": chk.passed})
    return _suite("robust_clean_gap", records)


def chain_suite(trials: int, seed: int, max_n: int = 8, max_predictors: int = 6) -> list[dict]:
    stream = Stream(seed, 105)
    per_check: dict[str, list[dict]] = {}
    for t in range(trials):
        k = 1 + stream.below(max_predictors)
        fs = [PiecewiseLinear1D.random(stream, float(stream.uniform(1, 0.1, 3.0)[0])).clamp() for _ in range(k)]
        S = _random_sample(stream, 1 + stream.below(max_n))
        rho = stream.choice(CHAIN_RHOS)
        rep = verify_loss_complexity_chain(fs, S, rho)
        for chk in rep.checks:
            per_check.setdefault(chk.name, []).append({"trial": t, "rho": rho, **chk.as_dict()})
    return [_suite(name, recs) for name, recs in per_check.items()]


def run_all(trials: int = 500, seed: int = 0, max_dim: int = 8, max_size: int = 8,
            understate_lipschitz: float = 1.0) -> dict:
    suites = []
    suites += set_algebra_suite(trials, seed, max_dim, max_size, understate_lipschitz)
    suites.append(endpoint_suite(trials, seed))
    suites.append(envelope_suite(trials, seed))
    suites.append(gap_suite(trials, seed))
    suites += chain_suite(trials, seed, max_n=max_dim)
    return {
        "seed": seed,
        "trials": trials,
        "total_violations": sum(s["violations"] for s in suites),
        "suites": suites,
    }


def summary(report: dict) -> dict:
    return {
        "seed": report["seed"],
        "trials": report["trials"],
        "total_violations": report["total_violations"],
        "suites": {s["suite"]: {"trials": s["trials"], "violations": s["violations"]} for s in report["suites"]},
    }


def witness_f_identity(rho: float):
    """f(x) = x at the sample (0, 0): the gap equals the bound exactly."""
    f = Predictor.linear([1.0])
    S = SampleSet(np.array([[0.0]]), np.array([0.0]))
    return check_gap_bound(f, S, RobustnessConfig(rho))
