"""Command-line entry point: inspect, run, replay and eval subcommands."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import __version__
from .dataset import DatasetError, IngestOptions, ingest_csv
from .evaluator import ModelSpec
from .label_stats import cooccurrence
from .llm_client import BackendConfig, LlmError
from .metadata import profile, profile_to_dict, render_report
from .models import ForestConfig, MlknnConfig
from .pipeline import FeatureManifest, RunConfig, SchemaMismatch, final_holdout_metrics, replay, run


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_dataset_args(p):
    p.add_argument("--dataset", required=True, help="path to the CSV file")
    p.add_argument("--labels", required=True,
                   help="comma-separated label column names")
    p.add_argument("--delimiter", default=",", help="field delimiter (default ,)")
    p.add_argument("--na-token", default="", help="missing-value token (default empty)")


def _add_model_args(p):
    p.add_argument("--eval-model", choices=["forest", "mlknn"], default="forest")
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--knn-k", type=int, default=10)


def _add_backend_args(p):
    p.add_argument("--backend", choices=["mock", "http"], default="mock")
    p.add_argument("--base-url", default="")
    p.add_argument("--model", default="")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--max-tokens", type=int, default=2048)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=2)


def build_parser():
    parser = _Parser(prog="featloop",
                     description="LLM-guided feature engineering for "
                                 "multi-label tabular classification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="profile a dataset and its label structure")
    _add_dataset_args(p)
    p.add_argument("--task", default="", help="task description for the profile")
    p.add_argument("--json", action="store_true", help="emit machine-readable JSON")

    p = sub.add_parser("run", help="run the full generation loop")
    _add_dataset_args(p)
    _add_model_args(p)
    _add_backend_args(p)
    p.add_argument("--task", default="", help="task description fed to the prompt")
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--candidates", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--cv-folds", type=int, default=3)
    p.add_argument("--rho-threshold", type=float, default=0.95)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("replay", help="apply a manifest and emit an augmented CSV")
    _add_dataset_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="path of the augmented CSV")

    p = sub.add_parser("eval", help="score a model with and without a manifest")
    _add_dataset_args(p)
    _add_model_args(p)
    p.add_argument("--manifest", default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="holdout split seed (default: the manifest's master seed)")
    p.add_argument("--holdout", type=float, default=0.2)
    return parser


def _load_dataset(args):
    labels = [s.strip() for s in args.labels.split(",") if s.strip()]
    if len(labels) < 2:
        raise UsageError("--labels needs at least two label column names")
    opts = IngestOptions(delimiter=args.delimiter, na_token=args.na_token)
    return ingest_csv(args.dataset, labels, opts)


def _model_spec(args) -> ModelSpec:
    return ModelSpec(args.eval_model,
                     ForestConfig(trees=args.trees, max_depth=args.max_depth),
                     MlknnConfig(k=args.knn_k))


def _cmd_inspect(args):
    ds = _load_dataset(args)
    prof = profile(ds, task_description=args.task)
    stats = cooccurrence(ds.labels)
    if args.json:
        doc = profile_to_dict(prof)
        doc["cooccurrence"] = [[float(v) for v in row] for row in stats.c]
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(render_report(prof, stats))
    return 0


def _cmd_run(args):
    ds = _load_dataset(args)
    backend = BackendConfig(kind=args.backend, base_url=args.base_url,
                            model_name=args.model, temperature=args.temperature,
                            max_tokens=args.max_tokens, timeout=args.timeout,
                            max_retries=args.retries, seed=args.seed)
    cfg = RunConfig(iterations=args.iterations,
                    candidates_per_iteration=args.candidates,
                    backend=backend, model=_model_spec(args),
                    rho_threshold=args.rho_threshold, folds=args.cv_folds,
                    master_seed=args.seed, holdout_fraction=args.holdout,
                    task_description=args.task, output_dir=args.output)
    manifest, summary = run(ds, cfg)
    print(f"accepted {len(manifest.entries)} feature(s); "
          f"outputs written to {args.output}")
    print(summary.render(), end="")
    return 0


def _cmd_replay(args):
    ds = _load_dataset(args)
    manifest = FeatureManifest.load(args.manifest)
    matrix = replay(manifest, ds)
    names = list(ds.feature_names) + [e.name for e in manifest.entries]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + list(ds.labels.label_names))
        for i in range(ds.n):
            writer.writerow([repr(float(v)) for v in matrix[i]] +
                            [str(int(v)) for v in ds.labels.y[i]])
    print(f"wrote {matrix.shape[0]} rows x {matrix.shape[1]} feature columns to {args.out}")
    return 0


def _cmd_eval(args):
    ds = _load_dataset(args)
    entries = []
    seed = args.seed
    if args.manifest:
        manifest = FeatureManifest.load(args.manifest)
        entries = manifest.entries
        if seed is None:
            seed = manifest.master_seed
    if seed is None:
        raise UsageError("--seed is required when no manifest is given")
    base, enhanced = final_holdout_metrics(ds, entries, _model_spec(args),
                                           seed, args.holdout)
    print(f"base:     accuracy={base.accuracy:.6f} "
          f"hamming_loss={base.hamming_loss:.6f} micro_f1={base.micro_f1:.6f}")
    print(f"enhanced: accuracy={enhanced.accuracy:.6f} "
          f"hamming_loss={enhanced.hamming_loss:.6f} micro_f1={enhanced.micro_f1:.6f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    try:
        if args.command == "inspect":
            return _cmd_inspect(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_eval(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (DatasetError, LlmError, SchemaMismatch, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
