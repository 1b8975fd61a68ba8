import numpy as np
import pytest

import featloop.evaluator as evaluator
from featloop.dataset import LengthMismatch, make_folds
from featloop.evaluator import (BaselineCache, Decision, ModelSpec, build_baseline,
                                evaluate_candidate, pearson, redundancy_screen)
from featloop.models import ForestConfig, MlknnConfig
from featloop.prompting import CandidateFeature
from featloop.synthetic import make_ratio_dataset

from conftest import build_dataset


def _cand(name, program):
    return CandidateFeature(name, "d", "u", ("1", "2", "3"), program)


def pearson_oracle(f, x):
    # straight from the definition, population form
    f = np.asarray(f, float)
    x = np.asarray(x, float)
    num = np.mean((f - f.mean()) * (x - x.mean()))
    den = np.std(f) * np.std(x)
    return None if den == 0 else num / den


# ------------------------------------------------------------------ pearson


def test_pearson_identity_and_sign():
    x = np.array([1.0, 2.0, 3.0, 4.0, 7.0])
    assert pearson(x, x) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_affine_invariance():
    rng = np.random.Generator(np.random.PCG64(11))
    for _ in range(50):
        x = rng.normal(0, 3, 20)
        a, b = rng.uniform(0.5, 4), rng.uniform(-5, 5)
        assert pearson(x, a * x + b) == pytest.approx(1.0, abs=1e-12)
        assert pearson(x, -a * x + b) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_worked_example():
    # hand computation: centered dot 44, variances 5 and 26, 44/sqrt(20*104)
    got = pearson([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 5.0, 9.0])
    assert got == pytest.approx(44.0 / np.sqrt(2080.0), abs=1e-12)
    assert got == pytest.approx(0.96476, abs=1e-3)


def test_pearson_constant_is_undefined():
    assert pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
    assert pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None


def test_pearson_matches_oracle_and_is_symmetric():
    rng = np.random.Generator(np.random.PCG64(23))
    for _ in range(200):
        n = int(rng.integers(2, 30))
        f = rng.normal(0, 2, n)
        x = rng.normal(1, 5, n)
        got = pearson(f, x)
        assert got == pytest.approx(pearson_oracle(f, x), abs=1e-12)
        assert got == pytest.approx(pearson(x, f), abs=1e-12)
        assert -1.0 - 1e-12 <= got <= 1.0 + 1e-12


def test_pearson_shape_errors():
    with pytest.raises(LengthMismatch):
        pearson([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(LengthMismatch):
        pearson([1.0], [2.0])


# ------------------------------------------------------------- redundancy


def test_redundancy_screen_flags_duplicate_column():
    rng = np.random.Generator(np.random.PCG64(3))
    a = rng.normal(0, 1, 40)
    b = rng.normal(0, 1, 40)
    max_rho, partner = redundancy_screen(a, [("a", a), ("b", b)])
    assert max_rho == pytest.approx(1.0, abs=1e-12)
    assert partner == "a"


def test_redundancy_screen_threshold_is_strict():
    rng = np.random.Generator(np.random.PCG64(5))
    a = rng.normal(0, 1, 60)
    f = a + rng.normal(0, 0.4, 60)
    max_rho, _ = redundancy_screen(f, [("a", a)])
    # at a threshold exactly equal to the measured value the screen passes;
    # any threshold strictly below it fails
    assert not max_rho > max_rho
    assert max_rho > max_rho - 1e-9


def test_redundancy_screen_skips_constant_columns():
    f = np.array([1.0, 2.0, 3.0, 4.0])
    max_rho, partner = redundancy_screen(f, [("const", np.ones(4))])
    assert max_rho == 0.0 and partner is None


# ------------------------------------------------------------- gate


def _ds_and_cache(spec=None, seed=11):
    ds = make_ratio_dataset(n=150, seed=4)
    plan = make_folds(ds, 3, seed)
    spec = spec or ModelSpec("forest", forest=ForestConfig(trees=10, max_depth=5))
    cache = build_baseline(ds, [], plan, spec, seed)
    return ds, cache


def test_duplicate_candidate_rejected_without_training():
    ds, cache = _ds_and_cache()
    before = evaluator.TRAINING_INVOCATIONS
    report = evaluate_candidate(ds, _cand("copy_x1", "x1 * 1.0"), cache)
    assert report.decision is Decision.REJECTED_REDUNDANT
    assert report.max_abs_rho == pytest.approx(1.0, abs=1e-12)
    assert report.rho_partner == "x1"
    assert evaluator.TRAINING_INVOCATIONS == before
    assert "x1" in report.reason()


def test_label_reference_rejected_without_training():
    ds, cache = _ds_and_cache()
    before = evaluator.TRAINING_INVOCATIONS
    report = evaluate_candidate(ds, _cand("leak", "y1 + x2"), cache)
    assert report.decision is Decision.REJECTED_INVALID
    assert report.invalid_stage == "LabelLeakage"
    assert evaluator.TRAINING_INVOCATIONS == before


def test_syntax_error_rejected_as_invalid():
    ds, cache = _ds_and_cache()
    report = evaluate_candidate(ds, _cand("broken", "x1 +* x2"), cache)
    assert report.decision is Decision.REJECTED_INVALID
    assert report.invalid_stage == "SyntaxError"


def test_informative_ratio_is_accepted():
    ds, cache = _ds_and_cache()
    report = evaluate_candidate(ds, _cand("ratio_x1_x2", "x1 / (x2 + 1.0)"), cache)
    assert report.decision is Decision.ACCEPTED
    assert report.delta_acc > 0.0 or report.delta_hl < 0.0
    assert len(report.fold_base) == len(report.fold_aug) == 3
    assert report.max_abs_rho <= 0.95


def test_gate_is_paired_and_deterministic():
    ds, cache = _ds_and_cache()
    r1 = evaluate_candidate(ds, _cand("f", "x1 - x2"), cache)
    r2 = evaluate_candidate(ds, _cand("f", "x1 - x2"), cache)
    assert r1.fold_base == cache.fold_metrics
    assert r1.fold_aug == r2.fold_aug
    assert (r1.delta_acc, r1.delta_hl) == (r2.delta_acc, r2.delta_hl)


def test_gate_with_mlknn_model():
    spec = ModelSpec("mlknn", mlknn=MlknnConfig(k=3))
    ds, cache = _ds_and_cache(spec=spec)
    report = evaluate_candidate(ds, _cand("ratio_x1_x2", "x1 / (x2 + 1.0)"), cache)
    assert report.decision in (Decision.ACCEPTED, Decision.REJECTED_NO_IMPROVEMENT)
    assert len(report.fold_aug) == 3


def test_baseline_includes_accepted_features():
    ds = make_ratio_dataset(n=120, seed=6)
    plan = make_folds(ds, 3, 7)
    spec = ModelSpec("forest", forest=ForestConfig(trees=5, max_depth=4))
    ratio = np.asarray(ds.columns[0].values) / (np.asarray(ds.columns[1].values) + 1.0)
    cache = build_baseline(ds, [("ratio_x1_x2", ratio)], plan, spec, 7)
    assert cache.column_names[-1] == "ratio_x1_x2"
    assert cache.x_base.shape[1] == len(ds.feature_names) + 1
    # re-proposing the accepted feature is now redundant against the baseline
    report = evaluate_candidate(ds, _cand("again", "x1 / (x2 + 1.0)"), cache)
    assert report.decision is Decision.REJECTED_REDUNDANT
    assert report.rho_partner == "ratio_x1_x2"


def test_no_improvement_on_pure_noise_labels():
    rng = np.random.Generator(np.random.PCG64(9))
    ds = build_dataset(
        numeric={"a": rng.normal(0, 1, 60).tolist(),
                 "b": rng.normal(0, 1, 60).tolist()},
        categorical={},
        labels={"names": ["u", "v"],
                "y": np.column_stack([rng.integers(0, 2, 60),
                                      rng.integers(0, 2, 60)])},
    )
    plan = make_folds(ds, 3, 2)
    spec = ModelSpec("forest", forest=ForestConfig(trees=5, max_depth=3))
    cache = build_baseline(ds, [], plan, spec, 2)
    report = evaluate_candidate(ds, _cand("g", "a * b"), cache)
    assert report.decision in (Decision.ACCEPTED, Decision.REJECTED_NO_IMPROVEMENT)
    if report.decision is Decision.REJECTED_NO_IMPROVEMENT:
        assert report.delta_acc <= 0.0 and report.delta_hl >= 0.0
        assert "NoImprovement" in report.reason()


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("boosted-stumps")
