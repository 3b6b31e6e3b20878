"""File formats, configuration defaults and result writers.

Network wire format: plain text, first line "L N", then one "layer source
target" triple per edge, all 0-based.  Covariates travel as headed CSV.
Everything written here is CSV or JSON so downstream tooling can diff and
recompute summaries without this package.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .engine import VariationalState
from .errors import ParseError, ValidationError
from .metrics import ClusteringResult
from .model import CovariateMatrix, GroundTruth, MultiplexNetwork

from . import __version__ as _PACKAGE_VERSION


# ---------------------------------------------------------------------------
# Network wire format
# ---------------------------------------------------------------------------

def write_network(net: MultiplexNetwork, path):
    path = Path(path)
    lines = [f"{net.num_layers} {net.num_nodes}"]
    layers, rows, cols = np.nonzero(net.adjacency)
    lines.extend(f"{l} {i} {j}" for l, i, j in zip(layers, rows, cols))
    path.write_text("\n".join(lines) + "\n")


def read_network(path) -> MultiplexNetwork:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"network file not found: {path}")
    with path.open() as handle:
        header = handle.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ParseError("expected header 'L N'", line=1)
        try:
            num_layers, num_nodes = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError("header entries must be integers", line=1) from None
        if num_layers < 1 or num_nodes < 1:
            raise ParseError("layer and node counts must be positive", line=1)
        adjacency = np.zeros((num_layers, num_nodes, num_nodes), dtype=np.int8)
        for lineno, raw in enumerate(handle, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split()
            if len(parts) != 3:
                raise ParseError("expected 'layer source target'", line=lineno)
            try:
                ell, i, j = (int(p) for p in parts)
            except ValueError:
                raise ParseError("indices must be integers", line=lineno) from None
            if not (0 <= ell < num_layers and 0 <= i < num_nodes and 0 <= j < num_nodes):
                raise ParseError("index out of range", line=lineno)
            if i == j:
                raise ParseError("self-loops are not allowed", line=lineno)
            adjacency[ell, i, j] = 1
    return MultiplexNetwork(adjacency)


def read_dense_layers(paths) -> MultiplexNetwork:
    """Importer for third-party data: one dense 0/1 CSV matrix per layer."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValidationError("no layer files given")
    layers = []
    for path in paths:
        try:
            mat = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        layers.append(mat)
    shapes = {m.shape for m in layers}
    if len(shapes) != 1:
        raise ValidationError(f"layer matrices disagree in shape: {sorted(shapes)}")
    stacked = np.stack(layers)
    np.einsum("lii->li", stacked)[:] = 0
    return MultiplexNetwork(stacked)


# ---------------------------------------------------------------------------
# Covariates
# ---------------------------------------------------------------------------

def write_covariates(values: np.ndarray, path, header=None):
    values = np.asarray(values, dtype=float)
    names = header or [f"x{j}" for j in range(values.shape[1])]
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(names)
        writer.writerows(values.tolist())


def read_covariates(path, *, log_transform=False, zscore=False,
                    add_intercept=False) -> tuple[CovariateMatrix, dict]:
    """Load a headed CSV of nodal features, optionally transformed.

    Returns the matrix plus a report of which columns were transformed.
    The log transform demands strictly positive entries; the intercept
    column is appended last and never transformed.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"covariates file not found: {path}")
    with path.open() as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty covariates file", line=1) from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise ParseError("non-numeric cell", line=lineno) from None
    if not rows:
        raise ParseError("no data rows", line=2)
    values = np.asarray(rows, dtype=float)
    if values.shape[1] != len(header):
        raise ParseError("row width disagrees with header")
    report = {"columns": list(header), "log": log_transform, "zscore": zscore,
              "intercept": add_intercept}
    if log_transform:
        if (values <= 0).any():
            raise ValidationError("log transform requires strictly positive values")
        values = np.log(values)
    if zscore:
        std = values.std(axis=0, ddof=0)
        if (std == 0).any():
            raise ValidationError("cannot z-score a constant column")
        values = (values - values.mean(axis=0)) / std
    if add_intercept:
        values = np.hstack([values, np.ones((values.shape[0], 1))])
    return CovariateMatrix(values, includes_intercept=add_intercept), report


def intercept_only(num_nodes: int) -> CovariateMatrix:
    return CovariateMatrix(np.ones((num_nodes, 1)), includes_intercept=True)


# ---------------------------------------------------------------------------
# Labels, assignments, reports
# ---------------------------------------------------------------------------

def write_labels(path, global_labels, layer_labels):
    layer_labels = np.asarray(layer_labels)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["node", "global"]
                        + [f"layer_{ell}" for ell in range(layer_labels.shape[0])])
        for i in range(layer_labels.shape[1]):
            writer.writerow([i, int(global_labels[i])]
                            + [int(layer_labels[ell, i])
                               for ell in range(layer_labels.shape[0])])


def read_labels(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a labels CSV back into (global (N,), layer (L, N)) arrays."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"labels file not found: {path}")
    with path.open() as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[:2] != ["node", "global"]:
            raise ParseError("expected columns node,global,layer_*", line=1)
        num_layers = len(header) - 2
        glob, layers = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                glob.append(int(row[1]))
                layers.append([int(c) for c in row[2:]])
            except (ValueError, IndexError):
                raise ParseError("malformed label row", line=lineno) from None
    layer_arr = np.asarray(layers, dtype=int).T if num_layers else np.empty((0, len(glob)), dtype=int)
    return np.asarray(glob, dtype=int), layer_arr


def write_elbo_trace(trace, path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sweep", "elbo"])
        writer.writerows((i, float(v)) for i, v in enumerate(trace))


def state_to_dict(state: VariationalState) -> dict:
    """All variational parameters as JSON-ready nested lists."""
    return {
        "phi_w": state.phi_w.tolist(),
        "phi_z": state.phi_z.tolist(),
        "rho_a": state.rho_a.tolist(),
        "rho_b": state.rho_b.tolist(),
        "gamma_a": state.gamma_a.tolist(),
        "gamma_b": state.gamma_b.tolist(),
        "theta": state.theta.tolist(),
        "chol_log": state.chol_log.tolist(),
        "sigma": state.sigma().tolist(),
        "theta0": state.theta0.tolist(),
        "sigma0": state.sigma0.tolist(),
        "nu": state.nu.tolist(),
        "omega": state.omega.tolist(),
    }


def write_posterior(state: VariationalState, path):
    Path(path).write_text(json.dumps(state_to_dict(state)))


# ---------------------------------------------------------------------------
# Configuration and manifests
# ---------------------------------------------------------------------------

def default_config() -> dict:
    """Every tunable default, spelled out so a written config is exhaustive."""
    return {
        "hyperparameters": {
            "alpha0": 1.0, "beta0": 1.0, "eta0": 1.0,
            "nu0": 2.0, "omega0": 1.0, "mu": None,
        },
        "truncations": {"m_w": 2, "m_z": 3},
        "fit": {
            "max_iter": 100, "tol": 1e-6,
            "lr_theta": 0.05, "lr_sigma": 0.05,
            "adam_beta1": 0.9, "adam_beta2": 0.999, "adam_eps": 1e-8,
            "max_steps": 30, "max_decreases": 5,
            "quad_points": 32,
        },
        "initialization": {
            "informed": True,
            "min_cluster_size_start": None,   # max(5, N // 25) when unset
            "epsilon": 0.05,
        },
        "seed": 0,
    }


def load_config(path=None) -> dict:
    config = default_config()
    if path is None:
        return config
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        overrides = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    for section, values in overrides.items():
        if section not in config:
            raise ValidationError(f"unknown config section {section!r}")
        if isinstance(config[section], dict):
            for key, value in values.items():
                if key not in config[section]:
                    raise ValidationError(f"unknown config key {section}.{key}")
                config[section][key] = value
        else:
            config[section] = values
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(path, *, config: dict, seed, extra=None):
    payload = {
        "package": "muxblock",
        "version": _PACKAGE_VERSION,
        "seed": seed,
        "config": config,
        "config_hash": config_hash(config),
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
