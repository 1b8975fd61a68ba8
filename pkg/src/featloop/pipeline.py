"""End-to-end loop: profile -> stats -> prompt -> generate -> parse ->
evaluate -> feedback, with manifest persistence and replay."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import dsl
from .dataset import Dataset, encode_matrix, make_folds_n
from .evaluator import (BaselineCache, Decision, ModelSpec, build_baseline,
                        evaluate_candidate, _fit_predict)
from .label_stats import cooccurrence
from .llm_client import BackendConfig, generate
from .metadata import profile as profile_dataset
from .models import MetricTriple, metrics
from .prompting import FeedbackState, build_prompt, parse_response
from .seeds import derive_seed

MANIFEST_VERSION = 1


class SchemaMismatch(Exception):
    def __init__(self, entry_name: str, cause: dsl.DslError):
        super().__init__(f"manifest entry {entry_name!r}: {cause}")
        self.entry_name = entry_name
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 4
    candidates_per_iteration: int = 5
    backend: BackendConfig = BackendConfig()
    model: ModelSpec = ModelSpec()
    rho_threshold: float = 0.95
    folds: int = 3
    master_seed: int = 1
    holdout_fraction: float = 0.2
    task_description: str = ""
    output_dir: str | None = None
    stop_on_empty_iteration: bool = False

    def fingerprint(self) -> str:
        # output_dir is excluded: where results land does not change what ran
        payload = {
            "iterations": self.iterations,
            "candidates_per_iteration": self.candidates_per_iteration,
            "backend": {
                "kind": self.backend.kind, "base_url": self.backend.base_url,
                "model_name": self.backend.model_name,
                "temperature": self.backend.temperature,
                "max_tokens": self.backend.max_tokens, "seed": self.backend.seed,
            },
            "model": {
                "kind": self.model.kind,
                "forest": [self.model.forest.trees, self.model.forest.max_depth,
                           self.model.forest.min_leaf],
                "mlknn": [self.model.mlknn.k, self.model.mlknn.smoothing],
            },
            "rho_threshold": self.rho_threshold,
            "folds": self.folds,
            "master_seed": self.master_seed,
            "holdout_fraction": self.holdout_fraction,
            "task_description": self.task_description,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    description: str
    usefulness: str
    dsl_source: str
    iteration_accepted: int
    delta_acc: float
    delta_hl: float
    max_abs_rho: float


@dataclass
class FeatureManifest:
    dataset_name: str
    master_seed: int
    config_fingerprint: str
    entries: list = field(default_factory=list)
    version: int = MANIFEST_VERSION
    complete: bool = True

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "dataset_name": self.dataset_name,
            "master_seed": self.master_seed,
            "config_fingerprint": self.config_fingerprint,
            "complete": self.complete,
            "entries": [{
                "name": e.name, "description": e.description,
                "usefulness": e.usefulness, "dsl_source": e.dsl_source,
                "iteration_accepted": e.iteration_accepted,
                "delta_acc": e.delta_acc, "delta_hl": e.delta_hl,
                "max_abs_rho": e.max_abs_rho,
            } for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureManifest":
        if d.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {d.get('version')!r}")
        m = cls(d["dataset_name"], d["master_seed"], d["config_fingerprint"],
                version=d["version"], complete=d.get("complete", True))
        for e in d["entries"]:
            m.entries.append(ManifestEntry(
                e["name"], e["description"], e["usefulness"], e["dsl_source"],
                e["iteration_accepted"], e["delta_acc"], e["delta_hl"],
                e["max_abs_rho"]))
        return m

    @classmethod
    def load(cls, path) -> "FeatureManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class IterationSummary:
    iteration: int
    candidates: int
    accepted: int
    rejected_by_reason: dict


@dataclass
class RunSummary:
    per_iteration: list
    base_holdout: MetricTriple
    enhanced_holdout: MetricTriple

    def render(self) -> str:
        lines = []
        for it in self.per_iteration:
            rej = ", ".join(f"{k}={v}" for k, v in sorted(it.rejected_by_reason.items()))
            lines.append(f"iteration {it.iteration}: candidates={it.candidates} "
                         f"accepted={it.accepted} rejected[{rej}]")
        b, e = self.base_holdout, self.enhanced_holdout
        lines.append(f"holdout base:     accuracy={b.accuracy:.6f} "
                     f"hamming_loss={b.hamming_loss:.6f} micro_f1={b.micro_f1:.6f}")
        lines.append(f"holdout enhanced: accuracy={e.accuracy:.6f} "
                     f"hamming_loss={e.hamming_loss:.6f} micro_f1={e.micro_f1:.6f}")
        return "\n".join(lines) + "\n"


def holdout_split(n: int, fraction: float, master_seed: int):
    """Seeded disjoint (train, holdout) index arrays, both sorted."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(derive_seed(master_seed, "holdout"))))
    n_hold = int(n * fraction)
    perm = rng.permutation(n)
    holdout = np.sort(perm[:n_hold])
    train = np.sort(perm[n_hold:])
    return train, holdout


def _entry_vectors(entries, ds: Dataset):
    """Evaluate manifest programs against ds; raises SchemaMismatch."""
    vectors = []
    for e in entries:
        try:
            program = dsl.parse(e.dsl_source)
            dsl.validate(program, ds)
        except dsl.DslError as err:
            raise SchemaMismatch(e.name, err)
        vec, _ = dsl.evaluate(program, ds)
        vectors.append(vec)
    return vectors


def final_holdout_metrics(ds: Dataset, entries, model: ModelSpec,
                          master_seed: int, holdout_fraction: float):
    """Train on the training split with and without the manifest features and
    score on the holdout; shared by run() and the eval subcommand so both
    produce identical numbers."""
    train_idx, holdout_idx = holdout_split(ds.n, holdout_fraction, master_seed)
    # encode once over the whole dataset so categorical codes are consistent
    # between the two splits, then slice rows
    x_all = encode_matrix(ds)
    y = np.asarray(ds.labels.y)
    seed = derive_seed(master_seed, "final")
    base_pred = _fit_predict(model, x_all[train_idx], y[train_idx],
                             x_all[holdout_idx], seed)
    base = metrics(y[holdout_idx], base_pred)
    if entries:
        x_enh = encode_matrix(ds, _entry_vectors(entries, ds))
        enh_pred = _fit_predict(model, x_enh[train_idx], y[train_idx],
                                x_enh[holdout_idx], seed)
        enhanced = metrics(y[holdout_idx], enh_pred)
    else:
        enhanced = base
    return base, enhanced


def run(ds: Dataset, cfg: RunConfig):
    """Full generation loop; returns (FeatureManifest, RunSummary).

    All randomness derives from cfg.master_seed, so identical inputs yield
    byte-identical manifests and logs.  Backend failures abort the run but
    flush a partial manifest marked incomplete.
    """
    manifest = FeatureManifest(ds.name, cfg.master_seed, cfg.fingerprint())
    train_idx, _ = holdout_split(ds.n, cfg.holdout_fraction, cfg.master_seed)
    train_ds = ds.subset(train_idx)
    fold_plan = make_folds_n(train_ds.n, cfg.folds, derive_seed(cfg.master_seed, "folds"))

    # prompts describe the whole file, including its sample rows; the holdout
    # protects only the model-based selection
    prof = profile_dataset(ds, task_description=cfg.task_description)
    stats = cooccurrence(ds.labels)

    feedback = FeedbackState()
    accepted = []         # (name, vector on train_ds)
    log_records = []
    per_iteration = []

    try:
        for iteration in range(cfg.iterations):
            bundle = build_prompt(prof, stats, feedback,
                                  cfg.candidates_per_iteration,
                                  dsl.GRAMMAR_DOC, iteration)
            result = generate(cfg.backend, bundle)
            parsed = parse_response(result.text)
            baseline = build_baseline(train_ds, accepted, fold_plan, cfg.model,
                                      derive_seed(cfg.master_seed, "iter", iteration))
            n_accepted = 0
            rejected = {}
            seen_names = {e.name for e in manifest.entries}
            for raw in parsed.malformed:
                rejected["InvalidProgram"] = rejected.get("InvalidProgram", 0) + 1
                log_records.append({"iteration": iteration, "candidate": None,
                                    "decision": "RejectedInvalid",
                                    "invalid_stage": "ParseStage",
                                    "raw": raw[:500]})
            for cand in parsed.candidates:
                if cand.name in seen_names:
                    rejected["DuplicateName"] = rejected.get("DuplicateName", 0) + 1
                    feedback.record_reject(cand.name, "InvalidProgram (duplicate name)")
                    log_records.append({"iteration": iteration, "candidate": cand.name,
                                        "decision": "RejectedInvalid",
                                        "invalid_stage": "DuplicateName"})
                    continue
                seen_names.add(cand.name)
                report = evaluate_candidate(train_ds, cand, baseline, cfg.rho_threshold)
                log_records.append({"iteration": iteration, **report.to_dict()})
                if report.decision is Decision.ACCEPTED:
                    n_accepted += 1
                    feedback.record_accept(cand.name, report.delta_acc, report.delta_hl)
                    program = dsl.parse(cand.program)
                    vec, _ = dsl.evaluate(program, train_ds)
                    accepted.append((cand.name, vec))
                    manifest.entries.append(ManifestEntry(
                        cand.name, cand.description, cand.usefulness,
                        cand.program, iteration, report.delta_acc,
                        report.delta_hl, report.max_abs_rho))
                else:
                    key = report.decision.value
                    rejected[key] = rejected.get(key, 0) + 1
                    feedback.record_reject(cand.name, report.reason())
            per_iteration.append(IterationSummary(
                iteration, len(parsed.candidates) + len(parsed.malformed),
                n_accepted, rejected))
            if cfg.stop_on_empty_iteration and n_accepted == 0:
                break
    except Exception:
        manifest.complete = False
        if cfg.output_dir:
            _write_outputs(cfg.output_dir, manifest, log_records, None)
        raise

    base, enhanced = final_holdout_metrics(ds, manifest.entries, cfg.model,
                                           cfg.master_seed, cfg.holdout_fraction)
    summary = RunSummary(per_iteration, base, enhanced)
    if cfg.output_dir:
        _write_outputs(cfg.output_dir, manifest, log_records, summary)
    return manifest, summary


def _write_outputs(output_dir, manifest, log_records, summary):
    os.makedirs(output_dir, exist_ok=True)
    with open(os.path.join(output_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    with open(os.path.join(output_dir, "run_log.jsonl"), "w", encoding="utf-8") as fh:
        for rec in log_records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if summary is not None:
        with open(os.path.join(output_dir, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write(summary.render())


def replay(manifest: FeatureManifest, ds: Dataset) -> np.ndarray:
    """Augmented model matrix for ds: base encoding plus manifest features."""
    return encode_matrix(ds, _entry_vectors(manifest.entries, ds))
