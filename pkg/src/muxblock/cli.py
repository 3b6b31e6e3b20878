"""Command-line surface: generate, fit, evaluate, study.

Exit codes: 0 success, 1 validation/parse failure, 2 unexpected runtime
failure.  The default worker count for studies comes from MUXBLOCK_THREADS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .engine import FitConfig, fit
from .errors import ValidationError
from .initialization import initialize_state
from .metrics import align_to_truth, extract_assignments, nmi
from .model import (GroundTruth, Hyperparameters, MultiplexNetwork,
                    TruncationConfig, sample_network)
from .studies import make_instance, run_study, study_spec


def _default_threads() -> int:
    raw = os.environ.get("MUXBLOCK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muxblock",
        description="Hierarchical clustering of multiplex networks by "
                    "variational inference.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a synthetic network with truth")
    gen.add_argument("--study", choices=("s41", "s42", "s43", "s44"),
                     help="use a built-in simulation setting")
    gen.add_argument("--point", type=int, default=0,
                     help="grid point index within the study")
    gen.add_argument("--config", type=Path,
                     help="JSON generative spec (nodes, layers, rho, gamma, "
                          "group_sizes | w, feature_means)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True, help="output directory")

    fit_p = sub.add_parser("fit", help="fit the model to a network")
    fit_p.add_argument("--network", type=Path)
    fit_p.add_argument("--dense-layers", nargs="+", type=Path,
                       help="dense 0/1 CSV matrices, one per layer")
    fit_p.add_argument("--covariates", type=Path)
    fit_p.add_argument("--config", type=Path)
    fit_p.add_argument("--seed", type=int)
    fit_p.add_argument("--mw", type=int)
    fit_p.add_argument("--mz", type=int)
    fit_p.add_argument("--max-iter", type=int)
    fit_p.add_argument("--uninformed", action="store_true",
                       help="uniform global responsibilities at initialization")
    fit_p.add_argument("--log-covariates", action="store_true")
    fit_p.add_argument("--zscore", action="store_true")
    fit_p.add_argument("--intercept", action="store_true")
    fit_p.add_argument("--threads", type=int, default=_default_threads())
    fit_p.add_argument("--out", type=Path, required=True)

    ev = sub.add_parser("evaluate", help="score assignments against truth labels")
    ev.add_argument("--assignments", type=Path, required=True)
    ev.add_argument("--truth", type=Path, required=True)
    ev.add_argument("--out", type=Path)

    st = sub.add_parser("study", help="run a simulation study")
    st.add_argument("--study", choices=("s41", "s42", "s43", "s44"), required=True)
    st.add_argument("--reps", type=int, default=50)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--mw", type=int)
    st.add_argument("--mz", type=int)
    st.add_argument("--max-iter", type=int)
    st.add_argument("--threads", type=int, default=_default_threads())
    st.add_argument("--quiet", action="store_true")
    st.add_argument("--out", type=Path, required=True)
    return parser


def _cmd_generate(args) -> int:
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.study:
        spec = study_spec(args.study, repetitions=1, base_seed=args.seed)
        if not 0 <= args.point < len(spec.grid):
            raise ValidationError(f"point index out of range for {args.study}")
        net, features, truth, seed, _ = make_instance(spec, args.point, 0)
        gen_spec = {"study": args.study, "point": spec.grid[args.point]}
    elif args.config:
        raw = json.loads(args.config.read_text())
        nodes, layers = int(raw["nodes"]), int(raw["layers"])
        rho = np.asarray(raw["rho"], dtype=float)
        gamma = np.asarray(raw["gamma"], dtype=float)
        if "w" in raw:
            w = np.asarray(raw["w"], dtype=int)
        elif "group_sizes" in raw:
            sizes = np.asarray(raw["group_sizes"], dtype=int)
            if sizes.sum() != nodes:
                raise ValidationError("group_sizes must sum to nodes")
            w = np.repeat(np.arange(len(sizes)), sizes)
        else:
            raise ValidationError("generative config needs 'w' or 'group_sizes'")
        net, truth = sample_network(nodes, layers, rho=rho, gamma=gamma, w=w,
                                    seed=args.seed)
        seed = args.seed
        means = np.asarray(raw.get("feature_means",
                                   np.zeros((gamma.shape[0], 1))), dtype=float)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
        features = means[w] + rng.normal(size=(nodes, means.shape[1]))
        gen_spec = raw
    else:
        raise ValidationError("generate needs --study or --config")

    mio.write_network(net, out / "network.txt")
    mio.write_labels(out / "truth.csv", truth.w, truth.z)
    mio.write_covariates(features, out / "covariates.csv")
    mio.write_manifest(out / "manifest.json", config={"generate": gen_spec},
                       seed=seed,
                       extra={"rho": truth.rho.tolist(),
                              "gamma": truth.gamma.tolist()})
    return 0


def _cmd_fit(args) -> int:
    if bool(args.network) == bool(args.dense_layers):
        raise ValidationError("fit needs exactly one of --network or --dense-layers")
    net = (mio.read_network(args.network) if args.network
           else mio.read_dense_layers(args.dense_layers))
    if args.covariates:
        covariates, report = mio.read_covariates(
            args.covariates, log_transform=args.log_covariates,
            zscore=args.zscore, add_intercept=args.intercept)
    elif args.intercept:
        covariates, report = mio.intercept_only(net.num_nodes), {"intercept": True}
    else:
        raise ValidationError("fit needs --covariates or --intercept")
    if covariates.values.shape[0] != net.num_nodes:
        raise ValidationError(
            f"covariate rows ({covariates.values.shape[0]}) do not match "
            f"network nodes ({net.num_nodes})")

    config = mio.load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.mw is not None:
        config["truncations"]["m_w"] = args.mw
    if args.mz is not None:
        config["truncations"]["m_z"] = args.mz
    if args.max_iter is not None:
        config["fit"]["max_iter"] = args.max_iter
    if args.uninformed:
        config["initialization"]["informed"] = False

    hyper = Hyperparameters(**config["hyperparameters"])
    trunc = TruncationConfig(**config["truncations"])
    fit_config = FitConfig(m_w=trunc.m_w, m_z=trunc.m_z, seed=config["seed"],
                           **config["fit"])
    init_cfg = config["initialization"]
    state = initialize_state(net, covariates, trunc, hyper,
                             informed=init_cfg["informed"],
                             min_cluster_size_start=init_cfg["min_cluster_size_start"],
                             epsilon=init_cfg["epsilon"])
    state, fit_report = fit(net, covariates, hyper, fit_config, state)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    result = extract_assignments(state)
    mio.write_labels(out / "assignments.csv", result.global_labels,
                     result.layer_labels)
    mio.write_posterior(state, out / "posterior.json")
    mio.write_elbo_trace(fit_report.elbo_trace, out / "elbo_trace.csv")
    mio.write_manifest(out / "manifest.json", config=config, seed=config["seed"],
                       extra={"converged": fit_report.converged,
                              "num_sweeps": fit_report.num_sweeps,
                              "occupied_global": fit_report.occupied_global,
                              "occupied_layer": fit_report.occupied_layer,
                              "runtime_seconds": fit_report.runtime_seconds,
                              "warnings": fit_report.warnings,
                              "covariates": report})
    print(f"fit: {fit_report.num_sweeps} sweeps, "
          f"converged={fit_report.converged}, "
          f"occupied=({fit_report.occupied_global},{fit_report.occupied_layer}), "
          f"elbo={fit_report.elbo_trace[-1]:.3f}")
    return 0


def _cmd_evaluate(args) -> int:
    got_global, got_layer = mio.read_labels(args.assignments)
    true_global, true_layer = mio.read_labels(args.truth)
    if got_global.shape != true_global.shape or got_layer.shape != true_layer.shape:
        raise ValidationError("assignment and truth shapes disagree")
    truth = GroundTruth(w=true_global, z=true_layer,
                        rho=np.zeros((1, 1)), gamma=np.ones((1, 1)))
    from .metrics import ClusteringResult
    result = ClusteringResult(
        global_labels=got_global, layer_labels=got_layer,
        occupied_global=int(np.unique(got_global).size),
        occupied_layer=int(np.unique(got_layer).size))
    aligned = align_to_truth(result, truth)
    layer_scores = [nmi(aligned.layer_labels[ell], true_layer[ell])
                    for ell in range(true_layer.shape[0])]
    payload = {
        "nmi_global": nmi(aligned.global_labels, true_global),
        "nmi_layer_mean": float(np.mean(layer_scores)) if layer_scores else 1.0,
        "nmi_layer": [float(s) for s in layer_scores],
        "occupied_global": result.occupied_global,
        "occupied_layer": result.occupied_layer,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        args.out.write_text(text)
    print(text)
    return 0


def _cmd_study(args) -> int:
    overrides = {}
    if args.mw is not None:
        overrides["m_w"] = args.mw
    if args.mz is not None:
        overrides["m_z"] = args.mz
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    spec = study_spec(args.study, repetitions=args.reps, base_seed=args.seed,
                      **overrides)
    progress = None
    if not args.quiet:
        def progress(done, total):
            print(f"\r{args.study}: {done}/{total} runs", end="", flush=True)
    records, summary = run_study(spec, threads=args.threads, out_dir=args.out,
                                 progress=progress)
    if not args.quiet:
        print()
    mio.write_manifest(args.out / "manifest.json",
                       config={"study": args.study, "reps": args.reps,
                               "overrides": overrides},
                       seed=args.seed,
                       extra={"threads": args.threads, "runs": len(records)})
    for row in summary:
        print(f"{row['point']}: global median {row['nmi_global_median']:.3f} "
              f"std {row['nmi_global_std']:.3f} "
              f"[{row['nmi_global_q025']:.3f}, {row['nmi_global_q975']:.3f}]  "
              f"layer median {row['nmi_layer_median']:.3f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"generate": _cmd_generate, "fit": _cmd_fit,
                "evaluate": _cmd_evaluate, "study": _cmd_study}
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
