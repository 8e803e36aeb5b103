"""Command-line interface: ``cae synth|train|eval|export-dag|stats``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import stats as stats_mod
from . import synth
from .dag import DagFitConfig, DagFitError, edge_list_text, graph_text
from .data import DataError, Dataset, load_csv, write_csv
from .graph import mb_report
from .trainer import PRESETS, TrainConfig, TrainedModel, TrainingError, evaluate, history_csv, train

log = logging.getLogger("cae")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    if args.nodes < 2:
        raise UsageError("--nodes must be >= 2")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if not 0.0 <= args.edge_prob <= 1.0:
        raise UsageError(f"--edge-prob must be in [0, 1], got {args.edge_prob}")
    if not 0.0 < args.quantile < 1.0:
        raise UsageError(f"--quantile must be in (0, 1), got {args.quantile}")
    if not 0 < args.weight_low <= args.weight_high:
        raise UsageError("need 0 < --weight-low <= --weight-high")

    if args.fixture == "blanket":
        sem = synth.blanket_fixture(args.seed, args.weight_low, args.weight_high)
        shift_nodes = list(synth.FIXTURE_SHIFT_NODES)
    else:
        sem = synth.random_dag(args.nodes, args.edge_prob, args.weight_low, args.weight_high, seed=args.seed)
        outside = sorted(set(range(sem.p)) - synth.true_markov_blanket(sem) - {sem.target})
        rng = np.random.default_rng(args.seed)
        count = min(args.shift_count, len(outside))
        shift_nodes = sorted(int(i) for i in rng.choice(outside, size=count, replace=False)) if count else []

    src = synth.sample_sem(sem, args.n, seed=args.seed)
    tgt = synth.sample_sem(sem, args.n, seed=args.seed + 1)
    tgt = synth.shift_domain(sem, tgt, shift_nodes, args.shift)
    cut = float(np.quantile(src[:, sem.target], args.quantile))
    ds_src = synth.sem_to_dataset(sem, src, args.quantile, cut=cut)
    ds_tgt = synth.sem_to_dataset(sem, tgt, args.quantile, cut=cut)

    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(ds_src, out / "source.csv")
        write_csv(ds_tgt, out / "target.csv")
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from None
    _write(out / "sem_edges.txt", synth.sem_to_edge_list(sem))
    mb = sorted(synth.true_markov_blanket(sem))
    _write(out / "true_mb.json", _dump_json({
        "nodes": sem.p,
        "target": sem.target,
        "markov_blanket": mb,
        "markov_blanket_feature_columns": [synth.feature_column(sem, i) for i in mb],
        "shift_nodes": shift_nodes,
        "shift": args.shift,
        "cut": cut,
        "seed": args.seed,
    }))
    print(f"wrote {out}/source.csv, target.csv, sem_edges.txt, true_mb.json "
          f"(p={sem.p}, target={sem.target}, |MB|={len(mb)})")
    return EXIT_OK


# --------------------------------------------------------------------------
# train / eval / export


def _load_dataset(path, label_column, num_classes=None) -> Dataset:
    if not Path(path).is_file():
        raise UsageError(f"no such dataset: {path}")
    try:
        return load_csv(path, label_column, num_classes)
    except DataError as exc:
        raise UsageError(str(exc)) from None


def _load_model(path) -> TrainedModel:
    if not Path(path).is_file():
        raise UsageError(f"no such model file: {path}")
    try:
        return TrainedModel.load(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from None


def _train_config(args) -> TrainConfig:
    values = dict(PRESETS[args.preset]) if args.preset else {}
    for name in ("lambda1", "lambda2", "lambda3"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    dag_cfg = DagFitConfig(max_outer=args.dag_max_outer, inner_iter=args.dag_inner_iter, h_tol=args.dag_h_tol)
    try:
        return TrainConfig(
            l=args.l, k=args.k, sigma=args.sigma, max_outer=args.max_outer, conv_tol=args.conv_tol,
            inner_epochs=args.inner_epochs, step_size=args.step_size, seed=args.seed,
            ablate_lc=args.ablate_lc, ablate_ly=args.ablate_ly, standardize=not args.no_standardize,
            classifier_dims=args.classifier_dims, dag_cfg=dag_cfg, **values,
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid training config: {exc}") from None


def cmd_train(args) -> int:
    cfg = _train_config(args)
    ds = _load_dataset(args.data, args.label_column)
    if cfg.k >= ds.d:
        raise UsageError(f"--k {cfg.k} must be smaller than the feature count {ds.d}")
    model = train(ds, cfg)
    out = Path(args.out)
    try:
        model.save(out)
    except OSError as exc:
        raise UsageError(f"cannot write model {out}: {exc}") from None
    history_path = Path(args.history) if args.history else out.with_suffix(".history.csv")
    _write(history_path, history_csv(model))
    last = model.history[-1]
    report = {
        "model": str(out),
        "iterations": len(model.history),
        "final": {key: last[key] for key in ("L", "L_D", "L_C", "L_Y", "L_R")},
        "mb_dims": list(model.mb_dims),
        "feature_dims": list(model.feature_dims),
        "fallback": model.fallback,
        "train_accuracy": last["train_accuracy"],
        "config": model.config.to_dict(),
    }
    if args.report:
        _write(Path(args.report), _dump_json(report))
    print(f"L={last['L']:.6g} L_D={last['L_D']:.6g} L_C={last['L_C']:.6g} "
          f"L_Y={last['L_Y']:.6g} L_R={last['L_R']:.6g} |MB|={len(model.mb_dims)} "
          f"iterations={len(model.history)} train_accuracy={last['train_accuracy']:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    ds = _load_dataset(args.data, args.label_column, model.label_encoding.num_classes)
    if ds.d != model.d:
        log.error("dimension mismatch: model expects %d features, dataset has %d", model.d, ds.d)
        return EXIT_RUNTIME
    metrics = evaluate(model, ds)
    text = _dump_json(metrics)
    if args.out:
        _write(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_export_dag(args) -> int:
    model = _load_model(args.model)
    k = model.k
    _write(Path(args.edges), edge_list_text(model.dag.A_hat))
    report = mb_report(model.dag, k)
    report["label_name"] = "Y"
    report["fallback"] = model.fallback
    report["status"] = "empty (fallback active)" if report["empty"] else "ok"
    _write(Path(args.mb), _dump_json(report))
    if args.graph:
        _write(Path(args.graph), graph_text(model.dag, k))
    print(f"edges={np.count_nonzero(model.dag.A_hat)} label=Y (node {k}) MB={report['all'] or 'empty (fallback active)'}")
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.results:
        try:
            rt = stats_mod.read_results_csv(args.results)
        except (OSError, ValueError) as exc:
            raise UsageError(f"malformed results CSV: {exc}") from None
        try:
            report = stats_mod.stats_report(rt, args.q)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif args.m is not None and args.tasks is not None:
        try:
            report = {"q_alpha": args.q, "m": args.m, "num_tasks": args.tasks,
                      "cd": stats_mod.nemenyi_cd(args.q, args.m, args.tasks)}
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("give --results CSV, or both --m and --tasks")
    text = _dump_json(report)
    if args.out:
        _write(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cae", description="Causal autoencoder pipeline")
    p.add_argument("--config", help="INI file with one section per command")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic source/target pair from a linear SEM")
    s.add_argument("--nodes", type=int, default=12)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--edge-prob", type=float, default=0.3)
    s.add_argument("--weight-low", type=float, default=0.5)
    s.add_argument("--weight-high", type=float, default=2.0)
    s.add_argument("--quantile", type=float, default=0.5)
    s.add_argument("--shift", type=float, default=3.0)
    s.add_argument("--shift-count", type=int, default=3)
    s.add_argument("--fixture", choices=("random", "blanket"), default="random")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default="synth_out")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model on a labelled CSV")
    t.add_argument("data")
    t.add_argument("--label-column", default="label")
    t.add_argument("--preset", choices=sorted(PRESETS))
    t.add_argument("--k", type=int, default=50)
    t.add_argument("--l", type=int, default=2)
    t.add_argument("--sigma", type=float, default=0.3)
    t.add_argument("--lambda1", type=float)
    t.add_argument("--lambda2", type=float)
    t.add_argument("--lambda3", type=float)
    t.add_argument("--max-outer", type=int, default=10)
    t.add_argument("--conv-tol", type=float, default=1e-8)
    t.add_argument("--inner-epochs", type=int, default=200)
    t.add_argument("--step-size", type=float, default=1e-3)
    t.add_argument("--classifier-dims", choices=("mb", "all"), default="mb")
    t.add_argument("--ablate-lc", action="store_true")
    t.add_argument("--ablate-ly", action="store_true")
    t.add_argument("--no-standardize", action="store_true")
    t.add_argument("--dag-max-outer", type=int, default=100)
    t.add_argument("--dag-inner-iter", type=int, default=500)
    t.add_argument("--dag-h-tol", type=float, default=1e-8)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="model.json")
    t.add_argument("--history")
    t.add_argument("--report")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a trained model on a labelled CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--label-column", default="label")
    e.add_argument("--out")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("export-dag", help="write the learned graph and Markov-blanket report")
    x.add_argument("--model", required=True)
    x.add_argument("--edges", default="dag_edges.txt")
    x.add_argument("--mb", default="mb_report.json")
    x.add_argument("--graph")
    x.add_argument("--seed", type=int, default=0)
    x.set_defaults(func=cmd_export_dag)

    st = sub.add_parser("stats", help="average ranks and Nemenyi critical difference")
    st.add_argument("--results", help="CSV with columns method,task,accuracy")
    st.add_argument("--q", type=float, default=stats_mod.Q_ALPHA_005_M12)
    st.add_argument("--m", type=int)
    st.add_argument("--tasks", type=int)
    st.add_argument("--out")
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(func=cmd_stats)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Load ``--config`` values as subcommand defaults; unknown keys are errors."""
    pre, _ = parser.parse_known_args(argv)
    if not pre.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(pre.config, encoding="utf-8"):
        raise UsageError(f"cannot read config file {pre.config}")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for section in cp.sections():
        if section not in subparsers.choices:
            raise UsageError(f"config section [{section}] is not a command")
        if section != pre.command:
            continue
        sp = subparsers.choices[section]
        actions = {a.dest: a for a in sp._actions if a.dest != "help"}
        defaults = {}
        for key, raw in cp[section].items():
            dest = key.replace("-", "_")
            if dest not in actions:
                raise UsageError(f"unknown key {key!r} in config section [{section}]")
            action = actions[dest]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    value = cp[section].getboolean(key)
                elif action.type is not None:
                    value = action.type(raw)
                else:
                    value = raw
            except ValueError:
                raise UsageError(f"bad value {raw!r} for {key!r} in [{section}]") from None
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"{key!r} must be one of {sorted(action.choices)}")
            defaults[dest] = value
            action.required = False
        sp.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CAE_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"cae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, DagFitError, FloatingPointError) as exc:
        print(f"cae: training failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"cae: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
