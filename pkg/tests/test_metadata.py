import numpy as np

from conftest import build_dataset
from featloop.dataset import ColumnKind
from featloop.metadata import profile, profile_to_dict, render_report


def test_famsize_example():
    # 33.5% LE3 / 66.5% GT3 over 200 rows
    tokens = ["LE3"] * 67 + ["GT3"] * 133
    y = np.tile([[1, 0]], (200, 1))
    ds = build_dataset(categorical={"famsize": tokens},
                       labels={"names": ["a", "b"], "y": y})
    prof = profile(ds)
    cats = dict(prof.column_profiles[0].top_categories)
    assert cats == {"LE3": 0.335, "GT3": 0.665}
    # most frequent listed first
    assert prof.column_profiles[0].top_categories[0][0] == "GT3"


def test_all_unique_categories():
    ds = build_dataset(categorical={"f": ["p", "q", "r", "s"]},
                       labels={"names": ["a", "b"], "y": np.zeros((4, 2))})
    prof = profile(ds)
    assert all(frac == 0.25 for _, frac in prof.column_profiles[0].top_categories)


def test_category_cap_at_ten():
    tokens = [f"t{i}" for i in range(14)]
    ds = build_dataset(categorical={"f": tokens},
                       labels={"names": ["a", "b"], "y": np.zeros((14, 2))})
    p = profile(ds).column_profiles[0]
    assert len(p.top_categories) == 10
    assert p.extra_category_count == 4
    assert "and 4 more" in render_report(profile(ds))


def test_prevalence():
    y = np.array([[1, 0], [1, 1], [1, 0], [1, 1]])
    ds = build_dataset(numeric={"x": [1, 2, 3, 4]},
                       labels={"names": ["a", "b"], "y": y})
    prof = profile(ds)
    assert prof.label_prevalence == (1.0, 0.5)


def test_numeric_stats_invariants():
    rng = np.random.Generator(np.random.PCG64(3))
    vals = rng.normal(0, 5, 50)
    ds = build_dataset(numeric={"x": vals, "const": np.full(50, 2.0)},
                       labels={"names": ["a", "b"], "y": rng.integers(0, 2, (50, 2))})
    prof = profile(ds)
    s = prof.column_profiles[0].numeric_stats
    assert s.minimum <= s.mean <= s.maximum
    assert s.std > 0
    assert prof.column_profiles[1].numeric_stats.std == 0.0


def test_missing_rate_uses_raw_counts():
    ds = build_dataset(numeric={"x": [1, 2, 3, 4]},
                       labels={"names": ["a", "b"], "y": np.zeros((4, 2))})
    prof = profile(ds, raw_missing_counts={"x": 1})
    assert prof.column_profiles[0].missing_rate == 0.25


def test_profile_pure():
    ds = build_dataset(numeric={"x": [1, 2, 3]},
                       labels={"names": ["a", "b"], "y": np.zeros((3, 2))})
    assert profile(ds, task_description="t") == profile(ds, task_description="t")
    assert profile_to_dict(profile(ds)) == profile_to_dict(profile(ds))
