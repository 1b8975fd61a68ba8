"""The acceptance gate: Pearson redundancy screen plus paired
cross-validated metric deltas over each candidate feature."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import dsl
from .dataset import Dataset, FoldPlan, LengthMismatch, encode_matrix
from .models import (ForestConfig, MetricTriple, MlknnConfig, metrics,
                     predict_forest, predict_mlknn, train_forest, train_mlknn)
from .prompting import CandidateFeature
from .seeds import derive_seed

# incremented on every model training; lets tests observe that redundant
# candidates are rejected before any training happens
TRAINING_INVOCATIONS = 0


class Decision(Enum):
    ACCEPTED = "Accepted"
    REJECTED_NO_IMPROVEMENT = "RejectedNoImprovement"
    REJECTED_REDUNDANT = "RejectedRedundant"
    REJECTED_INVALID = "RejectedInvalid"


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "forest"  # "forest" | "mlknn"
    forest: ForestConfig = ForestConfig()
    mlknn: MlknnConfig = MlknnConfig()

    def __post_init__(self):
        if self.kind not in ("forest", "mlknn"):
            raise ValueError(f"unknown eval model {self.kind!r}")


@dataclass(frozen=True)
class EvaluationReport:
    candidate_name: str
    decision: Decision
    delta_acc: float = 0.0
    delta_hl: float = 0.0
    max_abs_rho: float = 0.0
    rho_partner: str | None = None
    invalid_stage: str | None = None
    invalid_detail: str | None = None
    totalization_count: int = 0
    fold_base: tuple = ()   # MetricTriple per fold
    fold_aug: tuple = ()

    def reason(self) -> str:
        if self.decision is Decision.REJECTED_REDUNDANT:
            return f"Redundant (|rho|={self.max_abs_rho:.4f} with {self.rho_partner})"
        if self.decision is Decision.REJECTED_NO_IMPROVEMENT:
            return (f"NoImprovement (delta accuracy {self.delta_acc:+.4f}, "
                    f"delta hamming loss {self.delta_hl:+.4f})")
        if self.decision is Decision.REJECTED_INVALID:
            return f"InvalidProgram ({self.invalid_stage}: {self.invalid_detail})"
        return "Accepted"

    def to_dict(self) -> dict:
        return {
            "candidate": self.candidate_name,
            "decision": self.decision.value,
            "delta_acc": self.delta_acc,
            "delta_hl": self.delta_hl,
            "max_abs_rho": self.max_abs_rho,
            "rho_partner": self.rho_partner,
            "invalid_stage": self.invalid_stage,
            "invalid_detail": self.invalid_detail,
            "totalization_count": self.totalization_count,
            "fold_base": [m.as_tuple() for m in self.fold_base],
            "fold_aug": [m.as_tuple() for m in self.fold_aug],
        }


@dataclass
class BaselineCache:
    fold_plan: FoldPlan
    x_base: np.ndarray            # encoded base matrix incl. accepted features
    column_names: tuple           # one name per base matrix column
    y: np.ndarray
    fold_metrics: tuple           # MetricTriple per fold on the base matrix
    mean_acc: float
    mean_hl: float
    model: ModelSpec
    seed: int


def pearson(f, x):
    """Population Pearson correlation; None when either side is constant."""
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    if f.shape != x.shape or f.ndim != 1 or len(f) < 2:
        raise LengthMismatch(f"{f.shape} vs {x.shape}")
    fc = f - f.mean()
    xc = x - x.mean()
    sf = np.sqrt(np.mean(fc * fc))
    sx = np.sqrt(np.mean(xc * xc))
    if sf == 0.0 or sx == 0.0:
        return None
    return float(np.mean(fc * xc) / (sf * sx))


def redundancy_screen(f, against, rho_threshold: float = 0.95):
    """Max |rho| of f against named vectors; fails iff strictly above threshold.

    `against` is a sequence of (name, vector).  Constant pairs are skipped
    (undefined correlation is treated as zero).  Returns (max_abs_rho, partner).
    """
    max_rho = 0.0
    partner = None
    for name, vec in against:
        rho = pearson(f, vec)
        if rho is None:
            continue
        if abs(rho) > max_rho:
            max_rho = abs(rho)
            partner = name
    return max_rho, partner


def _fit_predict(spec: ModelSpec, x_train, y_train, x_test, seed: int):
    global TRAINING_INVOCATIONS
    TRAINING_INVOCATIONS += 1
    if spec.kind == "forest":
        cfg = ForestConfig(spec.forest.trees, spec.forest.max_depth,
                           spec.forest.min_leaf, seed)
        model = train_forest(x_train, y_train, cfg)
        return predict_forest(model, x_test)
    model = train_mlknn(x_train, y_train, spec.mlknn)
    return predict_mlknn(model, x_test)


def _cv_metrics(x, y, fold_plan: FoldPlan, spec: ModelSpec, seed: int):
    per_fold = []
    assignments = np.asarray(fold_plan.assignments)
    for fold in range(fold_plan.k):
        test = assignments == fold
        yhat = _fit_predict(spec, x[~test], y[~test], x[test],
                            derive_seed(seed, "fold", fold))
        per_fold.append(metrics(y[test], yhat))
    return tuple(per_fold)


def build_baseline(ds: Dataset, accepted, fold_plan: FoldPlan,
                   spec: ModelSpec, seed: int) -> BaselineCache:
    """Base matrix = encoded dataset plus all features accepted so far."""
    names = list(ds.feature_names) + [name for name, _ in accepted]
    x = encode_matrix(ds, [vec for _, vec in accepted])
    y = np.asarray(ds.labels.y)
    fold_metrics = _cv_metrics(x, y, fold_plan, spec, seed)
    mean_acc = float(np.mean([m.accuracy for m in fold_metrics]))
    mean_hl = float(np.mean([m.hamming_loss for m in fold_metrics]))
    return BaselineCache(fold_plan, x, tuple(names), y, fold_metrics,
                         mean_acc, mean_hl, spec, seed)


def evaluate_candidate(ds: Dataset, cand: CandidateFeature, cache: BaselineCache,
                       rho_threshold: float = 0.95) -> EvaluationReport:
    """Validate, screen for redundancy, then run the paired fold comparison.

    Redundant candidates never reach model training; the augmented runs reuse
    the baseline's fold plan and seeds so the metric deltas are paired.
    """
    try:
        program = dsl.parse(cand.program)
        dsl.validate(program, ds)
    except dsl.DslError as err:
        return EvaluationReport(cand.name, Decision.REJECTED_INVALID,
                                invalid_stage=err.kind.value, invalid_detail=err.detail)

    f, totalization = dsl.evaluate(program, ds)
    against = list(zip(cache.column_names, cache.x_base.T))
    max_rho, partner = redundancy_screen(f, against, rho_threshold)
    if max_rho > rho_threshold:
        return EvaluationReport(cand.name, Decision.REJECTED_REDUNDANT,
                                max_abs_rho=max_rho, rho_partner=partner,
                                totalization_count=totalization)

    x_aug = np.column_stack([cache.x_base, f])
    fold_aug = _cv_metrics(x_aug, cache.y, cache.fold_plan, cache.model, cache.seed)
    mean_acc = float(np.mean([m.accuracy for m in fold_aug]))
    mean_hl = float(np.mean([m.hamming_loss for m in fold_aug]))
    delta_acc = mean_acc - cache.mean_acc
    delta_hl = mean_hl - cache.mean_hl
    decision = (Decision.ACCEPTED if (delta_acc > 0.0 or delta_hl < 0.0)
                else Decision.REJECTED_NO_IMPROVEMENT)
    return EvaluationReport(cand.name, decision, delta_acc, delta_hl,
                            max_rho, partner, totalization_count=totalization,
                            fold_base=cache.fold_metrics, fold_aug=fold_aug)
