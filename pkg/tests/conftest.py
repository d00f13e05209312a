"""Shared synthetic data builders for the test suite."""

import numpy as np
import pytest

from biohash.datasets import DataSet
from biohash.seeds import substream


def make_blobs(n_per_class=130, classes=3, d=12, spread=0.25, seed=0):
    """Labeled gaussian blobs around well-separated unit-norm centers."""
    rng = substream(seed, "blobs")
    centers = rng.normal(size=(classes, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows, labels = [], []
    for cls in range(classes):
        rows.append(centers[cls] + spread * rng.normal(size=(n_per_class, d)))
        labels.append(np.full(n_per_class, cls))
    data = np.concatenate(rows)
    labels = np.concatenate(labels)
    order = rng.permutation(data.shape[0])
    return DataSet(data[order], labels[order], source="blobs")


@pytest.fixture
def blobs():
    """Default labeled blob dataset: 3 classes, 130 rows each, d=12."""
    return make_blobs()


@pytest.fixture
def blob_factory():
    return make_blobs
