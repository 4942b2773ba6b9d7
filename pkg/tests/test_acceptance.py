"""Acceptance gate: one test per criterion, summarised at the end of the run."""

import json
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from oracles import decimal_lower_bound, naive_pairwise_lip

from robustgen import verify
from robustgen.bounds import FiniteProblem, a_rho, generalization_event_frequency, rad_lower_bound_overfit, theoretical_L
from robustgen.cli import fit_reports, main
from robustgen.dataset import (
    BadMagicError,
    TrailingBytesError,
    TruncatedError,
    load_idx_dataset,
    parse_idx,
    read_idx,
    serialize_idx,
)
from robustgen.experiment import load_config, run_grid
from robustgen.lipestimate import lip_lower_bound_check, pairwise_lip
from robustgen.pwl import PiecewiseLinear1D
from robustgen.rademacher import VectorSet, rad_exact, rad_mc
from robustgen.rng import Stream
from robustgen.robust_loss import Predictor
from robustgen.scalefit import fit_joint, fit_slices, read_records, synthetic_records
from robustgen.trainer import MlpSpec, build_mlp, gradient_check

ROOT = Path(__file__).resolve().parents[1]
MNIST_DIR = ROOT / "data" / "mnist5k"
MNIST_CONFIG = ROOT / "configs" / "mnist_reduced.toml"


@pytest.mark.criterion(1, "verify: 500 trials per inequality, zero violations, < 5 min")
def test_inequality_suite(tmp_path, capsys, record_property):
    start = time.perf_counter()
    code = main(["verify", "--trials", "500", "--max-dim", "8", "--max-size", "8", "--seed", "0",
                 "--out", str(tmp_path)])
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    report = json.loads((tmp_path / "verify_report.json").read_text())
    names = {s["suite"] for s in report["suites"]}
    record_property("detail", f"{len(names)} suites, {report['total_violations']} violations, {elapsed:.0f} s")
    assert names == {
        "translation_invariance", "subadditivity", "difference_bound", "contraction", "abs_contraction",
        "coordinatewise_max",
        "endpoint_exact", "envelope_lipschitz", "robust_clean_gap",
        "robust_le_2x_clean", "clean_le_4x_eval", "robust_le_8x_eval",
    }
    assert all(s["trials"] == 500 for s in report["suites"])
    assert code == 0 and report["total_violations"] == 0
    assert elapsed < 300


@pytest.mark.criterion(2, "gap bound attained by f(x)=x at (0, 0)")
def test_tightness_witness(record_property):
    worst = 0.0
    for rho in (1e-3, 0.1, 0.37, 1.0, 2.5):
        chk = verify.witness_f_identity(rho)
        worst = max(worst, abs(chk.gap - chk.bound) / chk.bound)
        assert chk.gap == pytest.approx(rho**2, rel=1e-12)
    record_property("detail", f"max relative error {worst:.1e}")
    assert worst <= 1e-12


@pytest.mark.criterion(3, "closed forms: a_rho, theory exponents, independent calculator")
def test_closed_forms(record_property):
    assert a_rho(1, 1) == 9
    assert theoretical_L("bubeck", 100, 10, 10)[1] == (0.5, -0.5)
    assert theoretical_L("wu", 100, 10, 10)[1] == pytest.approx((0.1, 0.0), abs=1e-15)
    stream = Stream(3, 3)
    worst = 0.0
    for _ in range(100):
        eps, L, rho, sigma = stream.uniform(4, 0, 2)
        n = 1 + stream.below(100_000)
        delta = float(stream.uniform(1, 0.001, 0.999)[0])
        worst = max(worst, abs(rad_lower_bound_overfit(eps, L, rho, sigma, n, delta)
                               - decimal_lower_bound(eps, L, rho, sigma, n, delta)))
    record_property("detail", f"max deviation {worst:.1e} over 100 inputs")
    assert worst <= 1e-10


@pytest.mark.criterion(4, "Monte-Carlo complexity within 4 stderr of exact in >= 99/100 sets")
def test_mc_calibration(record_property):
    stream = Stream(4, 4)
    hits = 0
    for t in range(100):
        dim = 1 + stream.below(12)
        size = 1 + stream.below(8)
        A = VectorSet(stream.uniform((size, dim), -1, 1))
        exact = rad_exact(A).value
        est = rad_mc(A, 100_000, seed=t)
        hits += abs(est.value - exact) <= 4 * est.stderr
    record_property("detail", f"{hits}/100 within 4 stderr")
    assert hits >= 99


@pytest.mark.criterion(5, "pairwise Lipschitz estimate: naive oracle, linear equality, PWL bound")
def test_lipschitz_correctness(record_property):
    stream = Stream(5, 5)
    for _ in range(50):
        n, d, C = 2 + stream.below(100), 1 + stream.below(40), 1 + stream.below(10)
        X, F = stream.uniform((n, d)), np.tanh(stream.normal((n, C)))
        assert pairwise_lip(F, X).L_emp == naive_pairwise_lip(F, X)
    w = np.array([3.0, 4.0])
    lin = lip_lower_bound_check(Predictor.linear(w), np.vstack([np.zeros(2), w / 5]), expect_tight=True)
    assert abs(lin.L_emp - 5.0) <= 1e-9
    for _ in range(200):
        L = float(stream.uniform(1, 0.1, 5.0)[0])
        f = Predictor.from_pwl(PiecewiseLinear1D.random(stream, L))
        assert lip_lower_bound_check(f, stream.uniform((100, 1), -4, 4)).passed
    record_property("detail", f"50 exact matches, |L_emp - 5| = {abs(lin.L_emp - 5):.1e}, 200 PWL bounds hold")


@pytest.mark.criterion(6, "pairwise scan n=5000, d=784, C=10 under 60 s")
def test_scan_budget(record_property):
    import numba

    stream = Stream(6)
    pairwise_lip(stream.uniform((10, 784)), stream.uniform((10, 784)))  # compile or load cache
    X = stream.uniform((5000, 784))
    F = np.tanh(stream.normal((5000, 10)))
    start = time.perf_counter()
    est = pairwise_lip(F, X)
    elapsed = time.perf_counter() - start
    record_property("detail", f"{elapsed:.1f} s on {numba.get_num_threads()} thread(s)")
    assert est.L_emp > 0
    assert elapsed < 60


@pytest.mark.criterion(7, "fit recovery to 1e-10 and 95% CI coverage in [0.90, 0.99]")
def test_fit_recovery(record_property):
    ns = [1000 * i for i in range(1, 11)]
    ps = [2, 4, 8, 16, 32, 64, 128, 256, 512, 768]
    exact = synthetic_records(ns, ps, 0.16, 0.03, C=2.0)
    for res in (fit_slices(exact).result, fit_joint(exact)):
        assert abs(res.alpha - 0.16) <= 1e-10 and abs(res.beta - 0.03) <= 1e-10
    hits = {"slices_alpha": 0, "slices_beta": 0, "joint_alpha": 0, "joint_beta": 0}
    reps = 500
    for r in range(reps):
        recs = synthetic_records(ns, ps, 0.2, -0.1, 1.0, 0.05, Stream(7, r))
        for name, res in (("slices", fit_slices(recs).result), ("joint", fit_joint(recs))):
            hits[f"{name}_alpha"] += res.ci95_alpha[0] <= 0.2 <= res.ci95_alpha[1]
            hits[f"{name}_beta"] += res.ci95_beta[0] <= -0.1 <= res.ci95_beta[1]
    coverage = {k: v / reps for k, v in hits.items()}
    record_property("detail", ", ".join(f"{k} {v:.3f}" for k, v in coverage.items()))
    assert all(0.90 <= v <= 0.99 for v in coverage.values())


def _mnist_ready():
    if not (MNIST_DIR / "train-images-idx3-ubyte").exists():
        subprocess.run([sys.executable, str(ROOT / "scripts" / "prepare_mnist5k.py"),
                        "--csv", str(ROOT / "data" / "mnist_5k.csv.gz"), "--out", str(MNIST_DIR)],
                       check=True, capture_output=True)


def _mnist_config(out):
    cfg = load_config(MNIST_CONFIG, out=out, jobs=1)
    d = cfg.data
    cfg.data = replace(d, **{k: str(ROOT / getattr(d, k)) for k in
                             ("train_images", "train_labels", "test_images", "test_labels")})
    return cfg


@pytest.mark.slow
@pytest.mark.criterion(8, "reduced MNIST grid, gradient check, byte-identical reruns")
def test_mnist_substitute(tmp_path, record_property):
    _mnist_ready()
    start = time.perf_counter()
    first = run_grid(_mnist_config(tmp_path / "first"))
    elapsed = time.perf_counter() - start
    records = read_records(first)
    positive = sum(r.L_emp > 0 for r in records)
    joint = fit_reports(first, out=tmp_path / "first")["joint"]
    lo, hi = joint["ci95_alpha"]

    train = load_idx_dataset(MNIST_DIR / "train-images-idx3-ubyte", MNIST_DIR / "train-labels-idx1-ubyte")
    model = build_mlp(MlpSpec(784, (64,), 10), 0)
    batch = train.take(np.arange(32))
    grad_err = gradient_check(model, batch.features, batch.labels, n_params=100).max_relative_error

    second = run_grid(_mnist_config(tmp_path / "second"))
    identical = first.read_bytes() == second.read_bytes()

    record_property("detail", f"{elapsed:.0f} s, {positive}/16 positive, alpha {joint['alpha']:.4f} "
                              f"CI [{lo:.4f}, {hi:.4f}], beta {joint['beta']:.4f}, R2 {joint['r_squared']:.3f}, "
                              f"grad err {grad_err:.1e}, identical reruns {identical}")
    assert len(records) == 16 and elapsed < 7200
    assert positive >= 14
    assert joint["alpha"] > 0 and not (lo <= 0.5 <= hi)
    assert grad_err <= 1e-4
    assert identical


@pytest.mark.criterion(9, "IDX round trip and the three error classes")
def test_idx(record_property):
    _mnist_ready()
    files = sorted(MNIST_DIR.glob("*-ubyte"))
    for path in files:
        blob = path.read_bytes()
        assert serialize_idx(read_idx(path)) == blob
    blob = (MNIST_DIR / "test-labels-idx1-ubyte").read_bytes()
    with pytest.raises(BadMagicError):
        parse_idx(b"\x00\x00\x08\x02" + blob[4:])
    with pytest.raises(TruncatedError):
        parse_idx(blob[:-1])
    with pytest.raises(TrailingBytesError):
        parse_idx(blob + b"\x00")
    record_property("detail", f"{len(files)} files round-tripped, 3 error classes raised")


@pytest.mark.criterion(10, "finite-class bound event frequency >= 1 - delta over >= 200 resamples")
def test_generalization_sanity(record_property):
    parts = []
    for k in range(3):
        problem = FiniteProblem.random(Stream(10, k), K=4, n_predictors=4, L=2.0, rho=0.1)
        for delta in (0.1, 0.5):
            res = generalization_event_frequency(problem, n=8, delta_conf=delta, trials=400, seed=k)
            parts.append(f"d={delta}:{res.frequency:.3f}")
            assert res.trials >= 200 and res.frequency >= 1 - delta
    record_property("detail", " ".join(parts))
