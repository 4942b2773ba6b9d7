"""(n, width) grid runner with resumable CSV output."""

from __future__ import annotations

import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .dataset import ImageDataset, load_idx_dataset, sample_subset, synthetic_blobs
from .lipestimate import DegenerateDataError, model_lipschitz
from .rng import Stream
from .scalefit import CSV_COLUMNS, ScalingRecord, read_records
from .trainer import DivergenceError, MlpSpec, TrainConfig, build_mlp, train_until_overfit

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULTS_CSV = "results.csv"


@dataclass
class DataSource:
    kind: str = "synthetic"  # "idx" or "synthetic"
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    classes: int = 10
    # synthetic blobs
    dim: int = 20
    n_train: int = 2000
    n_test: int = 500
    spread: float = 0.3
    data_seed: int = 0


@dataclass
class ExperimentConfig:
    data: DataSource = field(default_factory=DataSource)
    n_grid: list[int] = field(default_factory=lambda: [250, 500])
    width_grid: list[int] = field(default_factory=lambda: [8, 16])
    seeds: list[int] = field(default_factory=lambda: [0])
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "results"
    jobs: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.n_grid or not self.width_grid or not self.seeds:
            raise ValueError("grids must be non-empty")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    @property
    def results_path(self) -> Path:
        return Path(self.out) / RESULTS_CSV

    def cells(self) -> list[tuple[int, int, int]]:
        return [(n, w, s) for s in self.seeds for n in self.n_grid for w in self.width_grid]


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a TOML manifest; keyword overrides (None = keep) win over file values."""
    raw = {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema_version {version}")
    grid = raw.get("grid", {})
    run = raw.get("run", {})
    cfg = ExperimentConfig(
        data=DataSource(**raw.get("data", {})),
        n_grid=list(grid.get("n", [250, 500])),
        width_grid=list(grid.get("width", [8, 16])),
        seeds=list(grid.get("seeds", [0])),
        train=TrainConfig(**raw.get("train", {})),
        out=run.get("out", "results"),
        jobs=int(run.get("jobs", 1)),
    )
    if overrides.get("seed") is not None:
        cfg.seeds = [int(overrides["seed"])]
    if overrides.get("out") is not None:
        cfg.out = str(overrides["out"])
    if overrides.get("jobs") is not None:
        cfg.jobs = int(overrides["jobs"])
    return cfg


def load_data(src: DataSource) -> tuple[ImageDataset, ImageDataset]:
    if src.kind == "idx":
        train = load_idx_dataset(src.train_images, src.train_labels, src.classes)
        test = load_idx_dataset(src.test_images, src.test_labels, src.classes)
        return train, test
    if src.kind == "synthetic":
        train = synthetic_blobs(src.dim, src.classes, src.n_train, src.spread, src.data_seed)
        test = synthetic_blobs(src.dim, src.classes, src.n_test, src.spread, src.data_seed + 1)
        return train, test
    raise ValueError(f"unknown data source {src.kind!r}")


def run_cell(train_pool: ImageDataset, test: ImageDataset, n: int, width: int, seed: int,
             tcfg: TrainConfig) -> ScalingRecord:
    """subset -> build -> train -> squash -> pairwise scan, for one grid cell.

    The subset depends on (seed, n) only, so every width at a given n sees the
    same samples; initialisation and shuffling use the stream (seed, n, width).
    """
    spec = MlpSpec(train_pool.dim, (width,), train_pool.classes)
    sub = sample_subset(train_pool, n, seed)
    model = build_mlp(spec, seed, stream=Stream(seed, n, width, 0))
    rec = ScalingRecord(n=n, width=width, p=spec.param_count, seed=seed, L_emp=float("nan"))
    try:
        model = train_until_overfit(model, sub, test, replace(tcfg, seed=seed), stream=Stream(seed, n, width, 1))
    except DivergenceError as exc:
        rec.status = f"diverged@{exc.epoch}"
        return rec
    rec.stopped_epoch = model.stopped_epoch
    rec.best_test_loss = model.best_test_loss
    rec.final_train_loss = model.history[-1].train_loss
    try:
        rec.L_emp = model_lipschitz(model, sub.features).L_emp
    except DegenerateDataError:
        rec.status = "degenerate"
    return rec


_WORKER: dict = {}


def _init_worker(src: DataSource):
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    import numba

    numba.set_num_threads(1)
    _WORKER["data"] = load_data(src)


def _worker_cell(args):
    n, width, seed, tcfg = args
    train, test = _WORKER["data"]
    return run_cell(train, test, n, width, seed, tcfg)


def existing_keys(path: Path) -> set[tuple[int, int, int]]:
    if not path.exists() or path.stat().st_size == 0:
        return set()
    return {r.key for r in read_records(path)}


def run_grid(cfg: ExperimentConfig, max_cells: int | None = None) -> Path:
    """Run every missing cell, appending rows in grid order.

    Rows already in the CSV (matched on (n, width, seed)) are skipped, so an
    interrupted run resumes where it stopped. ``max_cells`` bounds the number
    of new cells in this invocation.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = cfg.results_path
    done = existing_keys(path)
    todo = [c for c in cfg.cells() if c not in done]
    if max_cells is not None:
        todo = todo[:max_cells]
    if not path.exists() or path.stat().st_size == 0:
        path.write_text(",".join(CSV_COLUMNS) + "\n")
    if not todo:
        log.info("grid complete, nothing to do")
        return path
    log.info("%d cells to run (%d already present)", len(todo), len(done))

    train, test = load_data(cfg.data)
    for n in cfg.n_grid:
        if n > train.n:
            raise ValueError(f"n={n} exceeds the {train.n} available training rows")

    def emit(rec: ScalingRecord):
        with open(path, "a", newline="") as fh:
            fh.write(",".join(rec.row()) + "\n")
        log.info("n=%d width=%d seed=%d L_emp=%s status=%s", rec.n, rec.width, rec.seed, rec.L_emp, rec.status)

    if cfg.jobs == 1:
        for n, w, s in todo:
            emit(run_cell(train, test, n, w, s, cfg.train))
    else:
        # spawn, not fork: the parent may already hold an OpenMP runtime from the numba scan
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(cfg.jobs, mp_context=ctx, initializer=_init_worker, initargs=(cfg.data,)) as pool:
            for rec in pool.map(_worker_cell, [(n, w, s, cfg.train) for n, w, s in todo]):
                emit(rec)
    return path


