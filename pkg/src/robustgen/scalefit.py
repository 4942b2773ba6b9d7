"""Power-law fits L = C * n^alpha * p^beta in natural-log space."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .bounds import theoretical_L
from .dataset import EFFECTIVE_DIM

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "n", "width", "p", "seed", "L_emp", "stopped_epoch", "best_test_loss", "final_train_loss", "status",
]


class FitError(ValueError):
    pass


@dataclass
class ScalingRecord:
    n: int
    width: int
    p: int
    seed: int
    L_emp: float
    stopped_epoch: int = 0
    best_test_loss: float = math.nan
    final_train_loss: float = math.nan
    status: str = "ok"

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.n, self.width, self.seed)

    def row(self) -> list[str]:
        def fmt(v):
            if isinstance(v, float):
                return "" if math.isnan(v) else repr(v)
            return str(v)

        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]

    @classmethod
    def from_row(cls, row: dict) -> "ScalingRecord":
        def num(s, kind=float):
            return kind(s) if s not in ("", None) else (math.nan if kind is float else 0)

        return cls(
            n=int(row["n"]), width=int(row["width"]), p=int(row["p"]), seed=int(row["seed"]),
            L_emp=num(row["L_emp"]), stopped_epoch=num(row["stopped_epoch"], int),
            best_test_loss=num(row["best_test_loss"]), final_train_loss=num(row["final_train_loss"]),
            status=row.get("status") or "ok",
        )


def read_records(path) -> list[ScalingRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise FitError(f"unexpected CSV header {reader.fieldnames}")
        return [ScalingRecord.from_row(r) for r in reader]


def write_records(path, records: Iterable[ScalingRecord]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


@dataclass
class FitResult:
    method: str
    alpha: float
    beta: float
    logC: float
    stderr_alpha: float
    stderr_beta: float
    ci95_alpha: tuple[float, float]
    ci95_beta: tuple[float, float]
    p_value_alpha: float
    p_value_beta: float
    r_squared: float
    n_points: int
    partial: bool = False
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def _t_inference(est: float, se: float, dof: int) -> tuple[tuple[float, float], float]:
    if dof < 1 or not math.isfinite(se):
        return (math.nan, math.nan), math.nan
    if se == 0.0:
        return (est, est), (0.0 if est != 0 else 1.0)
    q = stats.t.ppf(0.975, dof)
    p = 2.0 * stats.t.sf(abs(est / se), dof)
    return (est - q * se, est + q * se), float(p)


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


@dataclass
class SliceFit:
    result: FitResult
    alpha_by_p: dict[int, float]
    beta_by_n: dict[int, float]
    excluded: list[str]


def fit_slices(records: Sequence[ScalingRecord]) -> SliceFit:
    """Per-slice log-log slopes, averaged with equal weight per slice.

    Slices with fewer than two distinct values of the varying coordinate are
    excluded and logged.
    """
    by_p, by_n = defaultdict(list), defaultdict(list)
    for r in records:
        if not (r.L_emp > 0):
            raise FitError("records must have positive L_emp; filter zeros first")
        by_p[r.p].append(r)
        by_n[r.n].append(r)

    excluded = []
    alpha_by_p, beta_by_n = {}, {}
    for p, rs in sorted(by_p.items()):
        if len({r.n for r in rs}) < 2:
            excluded.append(f"p={p}: fewer than 2 distinct n")
            continue
        alpha_by_p[p] = _slope(np.log([r.n for r in rs]), np.log([r.L_emp for r in rs]))
    for n, rs in sorted(by_n.items()):
        if len({r.p for r in rs}) < 2:
            excluded.append(f"n={n}: fewer than 2 distinct p")
            continue
        beta_by_n[n] = _slope(np.log([r.p for r in rs]), np.log([r.L_emp for r in rs]))
    for msg in excluded:
        log.info("slice excluded: %s", msg)
    if not alpha_by_p and not beta_by_n:
        raise FitError("no slice has two or more points")

    def agg(values):
        v = np.array(list(values))
        if v.size == 0:
            return math.nan, math.nan, (math.nan, math.nan), math.nan
        mean = float(v.mean())
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
        ci, pv = _t_inference(mean, se, v.size - 1)
        return mean, se, ci, pv

    a, sa, ca, pa = agg(alpha_by_p.values())
    b, sb, cb, pb = agg(beta_by_n.values())
    # intercept implied by the averaged exponents
    logs = np.array([[math.log(r.n), math.log(r.p), math.log(r.L_emp)] for r in records])
    aa = 0.0 if math.isnan(a) else a
    bb = 0.0 if math.isnan(b) else b
    logC = float(np.mean(logs[:, 2] - aa * logs[:, 0] - bb * logs[:, 1]))
    resid = logs[:, 2] - (logC + aa * logs[:, 0] + bb * logs[:, 1])
    sst = float(((logs[:, 2] - logs[:, 2].mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    partial = not alpha_by_p or not beta_by_n
    notes = ["slices weighted equally"] + excluded
    if partial:
        notes.append("partial: one exponent has no usable slice")
    res = FitResult("slices", a, b, logC, sa, sb, ca, cb, pa, pb, r2, len(records), partial, notes)
    return SliceFit(res, alpha_by_p, beta_by_n, excluded)


def design_matrix(records: Sequence[ScalingRecord]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[1.0, math.log(r.n), math.log(r.p)] for r in records])
    y = np.array([math.log(r.L_emp) for r in records])
    return X, y


def fit_joint(records: Sequence[ScalingRecord]) -> FitResult:
    """OLS of log L on (1, log n, log p) by QR, with t-based inference."""
    if len(records) < 4:
        raise FitError("joint fit needs at least 4 records")
    if any(not (r.L_emp > 0) for r in records):
        raise FitError("records must have positive L_emp; filter zeros first")
    X, y = design_matrix(records)
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise FitError("design matrix is rank deficient (collinear log n, log p)")
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ coef
    m = len(records)
    dof = m - 3
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    if dof > 0:
        s2 = sse / dof
        Rinv = np.linalg.solve(R, np.eye(3))
        se = np.sqrt(s2 * np.sum(Rinv**2, axis=1))  # diag((R^T R)^-1) = row norms of R^-1
    else:
        se = np.full(3, math.nan)
    ci_a, p_a = _t_inference(float(coef[1]), float(se[1]), dof)
    ci_b, p_b = _t_inference(float(coef[2]), float(se[2]), dof)
    return FitResult("joint", float(coef[1]), float(coef[2]), float(coef[0]), float(se[1]), float(se[2]),
                     ci_a, ci_b, p_a, p_b, r2, m)


@dataclass
class TheoryComparison:
    alpha: float
    beta: float
    d: int
    laws: dict[str, tuple[float, float]]
    distances: dict[str, tuple[float, float]]
    closer_alpha: str
    closer_beta: str

    def table(self) -> str:
        lines = [f"{'law':<8}{'alpha':>10}{'beta':>10}{'|d alpha|':>12}{'|d beta|':>12}"]
        lines.append(f"{'fit':<8}{self.alpha:>10.4f}{self.beta:>10.4f}{'':>12}{'':>12}")
        for law, (a, b) in self.laws.items():
            da, db = self.distances[law]
            lines.append(f"{law:<8}{a:>10.4f}{b:>10.4f}{da:>12.4f}{db:>12.4f}")
        lines.append(f"closer in alpha: {self.closer_alpha}; closer in beta: {self.closer_beta}")
        return "\n".join(lines)


def compare_to_theory(fit: FitResult, d: int = EFFECTIVE_DIM) -> TheoryComparison:
    laws = {law: theoretical_L(law, 1.0, 1.0, d)[1] for law in ("bubeck", "wu")}
    dist = {law: (abs(fit.alpha - a), abs(fit.beta - b)) for law, (a, b) in laws.items()}

    def closer(k):
        b, w = dist["bubeck"][k], dist["wu"][k]
        if math.isnan(b) or math.isnan(w):
            return "undetermined"
        return "wu" if w < b else "bubeck" if b < w else "tie"

    return TheoryComparison(fit.alpha, fit.beta, d, laws, dist, closer(0), closer(1))


def write_slice_csv(path, sf: SliceFit):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "fixed_value", "exponent"])
        for p, a in sf.alpha_by_p.items():
            w.writerow(["alpha_at_p", p, repr(a)])
        for n, b in sf.beta_by_n.items():
            w.writerow(["beta_at_n", n, repr(b)])


def synthetic_records(ns: Sequence[int], ps: Sequence[int], alpha: float, beta: float, C: float = 1.0,
                      noise: float = 0.0, stream=None) -> list[ScalingRecord]:
    """Power-law grid, optionally with Gaussian noise on log L."""
    out = []
    for n in ns:
        for p in ps:
            logL = math.log(C) + alpha * math.log(n) + beta * math.log(p)
            if noise:
                logL += noise * float(stream.normal(1)[0])
            out.append(ScalingRecord(n=n, width=p, p=p, seed=0, L_emp=math.exp(logL)))
    return out


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
