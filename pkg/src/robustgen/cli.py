"""Command-line front end.

Exit codes: 0 success, 1 verification / inequality failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import verify
from .bounds import BoundInputs, summarize_bounds
from .dataset import EFFECTIVE_DIM, load_idx_dataset, sample_subset
from .experiment import load_config, run_grid
from .lipestimate import filter_zero_estimates, model_lipschitz
from .scalefit import FitError, compare_to_theory, fit_joint, fit_slices, read_records, write_slice_csv
from .trainer import load_checkpoint

log = logging.getLogger("robustgen")


class UsageError(Exception):
    pass


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, float) and math.isnan(o):
        return None
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _dump(obj, fh=None):
    fh = fh or sys.stdout
    json.dump(obj, fh, indent=2, default=_json_default, allow_nan=True)
    fh.write("\n")


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    report = verify.run_all(args.trials, args.seed, args.max_dim, args.max_size, args.understate_lipschitz)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "verify_report.json", "w") as fh:
            _dump(report, fh)
    _dump(report if args.full else verify.summary(report))
    return 1 if report["total_violations"] else 0


def cmd_run_grid(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out=args.out, jobs=args.jobs)
    path = run_grid(cfg, args.max_cells)
    print(path)
    return 0


def cmd_lipschitz(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ds = load_idx_dataset(args.images, args.labels, model.spec.output_classes)
    if args.n is not None:
        ds = sample_subset(ds, args.n, args.seed)
    est = model_lipschitz(model, ds.features)
    _dump({
        "L_emp": est.L_emp,
        "per_class": est.per_class,
        "witness": est.witness,
        "n_pairs_skipped": est.n_pairs_skipped,
        "n": est.n,
        "p": model.p,
    })
    return 0


def fit_reports(csv_path, d: int = EFFECTIVE_DIM, out=None) -> dict:
    records = read_records(csv_path)
    kept, dropped, all_dropped = filter_zero_estimates(records)
    if all_dropped or not kept:
        raise FitError("all records dropped: no positive Lipschitz estimates")
    slices = fit_slices(kept)
    joint = fit_joint(kept)
    report = {
        "n_records": len(records),
        "dropped": [{"n": n, "width": w} for n, w in dropped],
        "slices": slices.result.as_dict(),
        "joint": joint.as_dict(),
        "comparison": {},
    }
    tables = []
    for name, fit in (("slices", slices.result), ("joint", joint)):
        cmp = compare_to_theory(fit, d)
        report["comparison"][name] = {
            "laws": cmp.laws, "distances": cmp.distances,
            "closer_alpha": cmp.closer_alpha, "closer_beta": cmp.closer_beta,
        }
        tables.append(f"[{name}]\n{cmp.table()}")
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "fit_report.json", "w") as fh:
            _dump(report, fh)
        (out / "comparison.txt").write_text("\n\n".join(tables) + "\n")
        write_slice_csv(out / "slices.csv", slices)
    report["_tables"] = tables
    return report


def cmd_fit(args) -> int:
    report = fit_reports(args.csv, args.d, args.out)
    tables = report.pop("_tables")
    _dump(report)
    print("\n\n".join(tables))
    return 0


def cmd_bounds(args) -> int:
    try:
        inp = BoundInputs(args.L, args.rho, args.sigma, args.epsilon, args.delta_conf, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _dump(summarize_bounds(inp, args.gamma, args.clean_risk, args.expected_rad, args.p, args.d))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment manifest")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--jobs", type=int, default=None, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="robustgen", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="randomised inequality suites with exact oracles")
    v.add_argument("--trials", type=int, default=500)
    v.add_argument("--max-dim", type=int, default=8)
    v.add_argument("--max-size", type=int, default=8)
    v.add_argument("--full", action="store_true", help="print every per-trial record")
    v.add_argument("--understate-lipschitz", type=float, default=1.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("run-grid", parents=[common], help="train the (n, width) grid and measure L_emp")
    g.add_argument("--max-cells", type=int, default=None)
    g.set_defaults(func=cmd_run_grid)

    lp = sub.add_parser("lipschitz", parents=[common], help="pairwise estimate for a checkpoint on IDX data")
    lp.add_argument("--checkpoint", type=Path, required=True)
    lp.add_argument("--images", type=Path, required=True)
    lp.add_argument("--labels", type=Path, required=True)
    lp.add_argument("--n", type=int, default=None, help="seeded subset size")
    lp.set_defaults(func=cmd_lipschitz)

    f = sub.add_parser("fit", parents=[common], help="power-law fits on a results CSV")
    f.add_argument("csv", type=Path)
    f.add_argument("--d", type=int, default=EFFECTIVE_DIM)
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bounds", parents=[common], help="closed-form bound values as JSON")
    b.add_argument("--L", type=float, required=True)
    b.add_argument("--rho", type=float, required=True)
    b.add_argument("--sigma", type=float, default=0.0)
    b.add_argument("--epsilon", type=float, default=0.0)
    b.add_argument("--delta-conf", type=float, default=0.05)
    b.add_argument("--n", type=int, default=1)
    b.add_argument("--gamma", type=float, default=None)
    b.add_argument("--clean-risk", type=float, default=0.0)
    b.add_argument("--expected-rad", type=float, default=0.0)
    b.add_argument("--p", type=float, default=1.0)
    b.add_argument("--d", type=float, default=float(EFFECTIVE_DIM))
    b.set_defaults(func=cmd_bounds)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if getattr(args, "seed", None) is None and args.command in ("verify", "lipschitz"):
        args.seed = 0
    try:
        return args.func(args)
    except (UsageError, FitError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
