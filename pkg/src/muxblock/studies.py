"""Simulation-study harness: group-recovery benchmarks on synthetic networks.

Four built-in studies share one block-probability matrix and differ in how
global groups express themselves:

* ``s41``  truncation sensitivity: two global groups, three layer groups,
           fitted at the true truncations and at looser ones;
* ``s42``  covariate informativeness sweep: three disjoint-behaviour global
           groups whose feature separation ``alpha`` shrinks to zero;
* ``s43``  layer-behaviour similarity sweep: well-separated features, layer
           behaviour mixed by ``alpha``, informed vs uniform initialization;
* ``s44``  size scaling over node counts and layer counts.

Every run samples its own network, feature matrix and truth from seeds
derived deterministically from (base seed, study, grid point, repetition),
so reruns and any worker scheduling produce identical records.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .engine import FitConfig, fit
from .errors import ValidationError
from .initialization import initialize_state
from .metrics import align_to_truth, extract_assignments, nmi
from .model import Hyperparameters, TruncationConfig, sample_network

BLOCK_PROBS = np.array([[0.8, 0.5, 0.2],
                        [0.4, 0.7, 0.05],
                        [0.2, 0.01, 0.6]])

_STUDY_CODES = {"s41": 41, "s42": 42, "s43": 43, "s44": 44}


@dataclass
class StudySpec:
    """One study's grid, repetitions and fit settings."""

    study: str
    grid: list = field(default_factory=list)
    repetitions: int = 50
    base_seed: int = 0
    num_nodes: int = 0
    num_layers: int = 3
    m_w: int = 3
    m_z: int = 3
    max_iter: int = 10

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if not self.grid:
            raise ValidationError("grid must be non-empty")


@dataclass
class ResultRecord:
    """One run's outcome, one row of the records CSV."""

    study: str
    point: str
    rep: int
    seed: int
    nmi_global: float
    nmi_layer: float
    occupied_global: int
    occupied_layer: int
    elbo: float
    wall_seconds: float

    COLUMNS = ("study", "point", "rep", "seed", "nmi_global", "nmi_layer",
               "occupied_global", "occupied_layer", "elbo", "wall_seconds")

    def row(self):
        return [self.study, self.point, self.rep, self.seed,
                f"{self.nmi_global:.10f}", f"{self.nmi_layer:.10f}",
                self.occupied_global, self.occupied_layer,
                f"{self.elbo:.6f}", f"{self.wall_seconds:.4f}"]


def mixing_rows(alpha: float, k: int = 3) -> np.ndarray:
    """Layer-group distributions (1-2a, a, a) and its cyclic permutations."""
    gamma = np.full((k, k), alpha)
    np.fill_diagonal(gamma, 1.0 - (k - 1) * alpha)
    return gamma


def study_spec(study: str, repetitions: int = 50, base_seed: int = 0,
               **overrides) -> StudySpec:
    """Built-in study definitions; keyword overrides replace any field."""
    if study == "s41":
        spec = StudySpec(study, grid=[{"m_w": 2, "m_z": 3}, {"m_w": 5, "m_z": 5}],
                         num_nodes=250, num_layers=3, max_iter=10)
    elif study == "s42":
        spec = StudySpec(study, grid=[{"alpha": a} for a in (2.5, 2.0, 1.5, 1.0, 0.5, 0.0)],
                         num_nodes=500, num_layers=3, max_iter=10)
    elif study == "s43":
        spec = StudySpec(study, grid=[{"alpha": a, "init": kind}
                                      for a in (0.05, 0.15, 0.25, 0.33)
                                      for kind in ("informed", "uninformed")],
                         num_nodes=500, num_layers=3, max_iter=25)
    elif study == "s44":
        spec = StudySpec(study, grid=[{"n": n, "l": l}
                                      for n in (100, 250) for l in (2, 5, 10, 20)],
                         num_nodes=250, num_layers=3, max_iter=10)
    else:
        raise ValidationError(f"unknown study {study!r}; expected s41|s42|s43|s44")
    spec = replace(spec, repetitions=repetitions, base_seed=base_seed)
    for key, value in overrides.items():
        if not hasattr(spec, key):
            raise ValidationError(f"unknown study override {key!r}")
        spec = replace(spec, **{key: value})
    return spec


def _point_settings(spec: StudySpec, point: dict) -> dict:
    """Resolve one grid point to a full generative + fit configuration."""
    study = spec.study
    settings = {
        "n": point.get("n", spec.num_nodes),
        "l": point.get("l", spec.num_layers),
        "m_w": point.get("m_w", spec.m_w),
        "m_z": point.get("m_z", spec.m_z),
        "informed": point.get("init", "informed") == "informed",
        "rho": BLOCK_PROBS,
    }
    if study == "s41":
        settings["gamma"] = np.array([[0.8, 0.1, 0.1], [0.0, 0.5, 0.5]])
        settings["ratio"] = (3, 2)
        settings["feature_means"] = np.array([[1.5] * 3, [-1.5] * 3])
    elif study == "s42":
        settings["gamma"] = np.eye(3)
        settings["ratio"] = (2, 2, 1)
        a = point["alpha"]
        settings["feature_means"] = np.array([[a] * 3, [0.0] * 3, [-a] * 3])
    elif study == "s43":
        settings["gamma"] = mixing_rows(point["alpha"])
        settings["ratio"] = (2, 2, 1)
        settings["feature_means"] = np.array([[5.0] * 3, [0.0] * 3, [-5.0] * 3])
    elif study == "s44":
        settings["gamma"] = mixing_rows(0.15)
        settings["ratio"] = (2, 2, 1)
        settings["feature_means"] = np.array([[5.0] * 3, [0.0] * 3, [-5.0] * 3])
    return settings


def _split_sizes(n: int, ratio) -> np.ndarray:
    parts = np.floor(n * np.asarray(ratio) / sum(ratio)).astype(int)
    parts[0] += n - parts.sum()
    return parts


def point_label(point: dict) -> str:
    return ";".join(f"{k}={point[k]}" for k in sorted(point))


def make_instance(spec: StudySpec, point_index: int, rep: int):
    """Sample (network, features, truth, seed) for one run, deterministically."""
    point = spec.grid[point_index]
    settings = _point_settings(spec, point)
    root = np.random.SeedSequence(
        [spec.base_seed, _STUDY_CODES[spec.study], point_index, rep])
    net_seed_ss, feature_ss = root.spawn(2)
    seed = int(net_seed_ss.generate_state(1, np.uint32)[0])
    sizes = _split_sizes(settings["n"], settings["ratio"])
    w = np.repeat(np.arange(len(sizes)), sizes)
    net, truth = sample_network(settings["n"], settings["l"], rho=settings["rho"],
                                gamma=settings["gamma"], w=w, seed=seed)
    rng = np.random.default_rng(feature_ss)
    features = settings["feature_means"][w] + rng.normal(size=(settings["n"], 3))
    return net, features, truth, seed, settings


def run_single(spec: StudySpec, point_index: int, rep: int) -> ResultRecord:
    """Generate, initialize, fit and score one repetition."""
    point = spec.grid[point_index]
    net, features, truth, seed, settings = make_instance(spec, point_index, rep)
    hyper = Hyperparameters()
    tick = time.perf_counter()
    state = initialize_state(net, features,
                             TruncationConfig(settings["m_w"], settings["m_z"]),
                             hyper, informed=settings["informed"])
    config = FitConfig(m_w=settings["m_w"], m_z=settings["m_z"],
                       max_iter=spec.max_iter, seed=seed)
    state, report = fit(net, features, hyper, config, state)
    wall = time.perf_counter() - tick
    result = align_to_truth(extract_assignments(state), truth)
    layer_scores = [nmi(result.layer_labels[ell], truth.z[ell])
                    for ell in range(net.num_layers)]
    return ResultRecord(
        study=spec.study, point=point_label(point), rep=rep, seed=seed,
        nmi_global=nmi(result.global_labels, truth.w),
        nmi_layer=float(np.mean(layer_scores)),
        occupied_global=result.occupied_global,
        occupied_layer=result.occupied_layer,
        elbo=report.elbo_trace[-1], wall_seconds=wall)


def _run_task(args):
    spec, point_index, rep = args
    try:
        return (point_index, rep, run_single(spec, point_index, rep), None)
    except Exception as exc:  # partial failures recorded, study continues
        return (point_index, rep, None, f"{type(exc).__name__}: {exc}")


def run_study(spec: StudySpec, threads: int = 1, out_dir=None,
              progress=None) -> tuple[list[ResultRecord], list[dict]]:
    """Execute the full grid x repetitions, summarize, optionally write CSVs.

    Records come back sorted by (grid point, repetition) regardless of how
    workers were scheduled, so output files are identical at any thread
    count.  Failed runs are collected per run and do not stop the study.
    """
    tasks = [(spec, pi, rep) for pi in range(len(spec.grid))
             for rep in range(spec.repetitions)]
    outcomes = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for outcome in pool.map(_run_task, tasks, chunksize=1):
                outcomes.append(outcome)
                if progress:
                    progress(len(outcomes), len(tasks))
    else:
        for task in tasks:
            outcomes.append(_run_task(task))
            if progress:
                progress(len(outcomes), len(tasks))
    outcomes.sort(key=lambda item: (item[0], item[1]))
    records = [rec for _, _, rec, _ in outcomes if rec is not None]
    failures = [(pi, rep, err) for pi, rep, rec, err in outcomes if rec is None]
    summary = summarize(spec, records)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_records(records, out_dir / "records.csv")
        write_summary(summary, out_dir / "summary.csv")
        write_boxplot_data(records, out_dir / "boxplot.csv")
        if failures:
            with (out_dir / "failures.csv").open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["point_index", "rep", "error"])
                writer.writerows(failures)
    return records, summary


def summarize(spec: StudySpec, records: list[ResultRecord]) -> list[dict]:
    """Per grid point: median, sample std and central 95% quantiles of NMI."""
    rows = []
    for point in spec.grid:
        label = point_label(point)
        chunk = [r for r in records if r.point == label]
        if not chunk:
            continue
        row = {"study": spec.study, "point": label, "runs": len(chunk)}
        for name in ("nmi_global", "nmi_layer"):
            values = np.array([getattr(r, name) for r in chunk])
            row[f"{name}_median"] = float(np.median(values))
            row[f"{name}_std"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            row[f"{name}_q025"] = float(np.quantile(values, 0.025))
            row[f"{name}_q975"] = float(np.quantile(values, 0.975))
        occ = np.array([(r.occupied_global, r.occupied_layer) for r in chunk])
        pairs, counts = np.unique(occ, axis=0, return_counts=True)
        modal = pairs[counts.argmax()]
        row["modal_occupied_global"] = int(modal[0])
        row["modal_occupied_layer"] = int(modal[1])
        row["modal_occupied_share"] = float(counts.max() / len(chunk))
        rows.append(row)
    return rows


def write_records(records: list[ResultRecord], path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(ResultRecord.COLUMNS)
        writer.writerows(r.row() for r in records)


def read_records(path) -> list[ResultRecord]:
    with Path(path).open() as handle:
        reader = csv.DictReader(handle)
        records = []
        for row in reader:
            records.append(ResultRecord(
                study=row["study"], point=row["point"], rep=int(row["rep"]),
                seed=int(row["seed"]), nmi_global=float(row["nmi_global"]),
                nmi_layer=float(row["nmi_layer"]),
                occupied_global=int(row["occupied_global"]),
                occupied_layer=int(row["occupied_layer"]),
                elbo=float(row["elbo"]),
                wall_seconds=float(row["wall_seconds"])))
    return records


def write_summary(summary: list[dict], path):
    if not summary:
        Path(path).write_text("")
        return
    with Path(path).open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(summary[0]))
        writer.writeheader()
        writer.writerows(summary)


def write_boxplot_data(records: list[ResultRecord], path):
    """Tidy per-run NMI keyed by grid point, ready for box plotting."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["point", "rep", "nmi_global", "nmi_layer"])
        writer.writerows([r.point, r.rep, f"{r.nmi_global:.10f}",
                          f"{r.nmi_layer:.10f}"] for r in records)
