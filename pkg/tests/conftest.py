import numpy as np
import pytest

from featloop.dataset import Column, ColumnKind, Dataset, LabelMatrix


def build_dataset(numeric=None, categorical=None, labels=None, name="test"):
    """Assemble an in-memory Dataset from plain dicts/arrays."""
    numeric = numeric or {}
    categorical = categorical or {}
    cols = []
    for cname, vals in numeric.items():
        cols.append(Column(cname, ColumnKind.NUMERIC, tuple(float(v) for v in vals)))
    for cname, vals in categorical.items():
        cols.append(Column(cname, ColumnKind.CATEGORICAL, tuple(vals)))
    y = np.asarray(labels["y"], dtype=np.int8)
    lm = LabelMatrix(tuple(labels["names"]), y)
    return Dataset(name, tuple(cols), lm)


@pytest.fixture
def small_ds():
    """4 rows, 2 numeric + 1 categorical features, 2 labels."""
    return build_dataset(
        numeric={"age": [25.0, 40.0, 31.0, 58.0],
                 "hours": [40.0, 0.0, 35.0, 20.0]},
        categorical={"famsize": ["LE3", "GT3", "GT3", "LE3"]},
        labels={"names": ["subscribed", "loan"],
                "y": [[1, 1], [1, 0], [0, 0], [1, 1]]},
    )
