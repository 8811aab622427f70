"""Sklearn-facing wrapper around the column sketcher."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from sketchprune.estimator import FilterSketcher
from sketchprune.errors import ValidationError
from sketchprune.rng import standard_normal_matrix
from sketchprune.sketch import fd_sketch


def test_fit_sets_attributes():
    X = standard_normal_matrix(1, 20, 12)
    est = FilterSketcher(rate=0.5).fit(X)
    assert est.sketch_.shape == (20, 6)
    assert est.n_features_in_ == 12
    assert est.shrink_count_ >= 1


def test_explicit_width_overrides_rate():
    X = standard_normal_matrix(2, 16, 10)
    est = FilterSketcher(rate=0.9, n_columns=3).fit(X)
    assert est.sketch_.shape == (16, 3)
    assert np.array_equal(est.sketch_, fd_sketch(X, 3).omega)


def test_normalize_flag():
    X = standard_normal_matrix(3, 16, 10)
    est = FilterSketcher(n_columns=4, normalize=True).fit(X)
    assert np.linalg.norm(est.sketch_) == pytest.approx(1.0, abs=1e-12)


def test_transform_projects_onto_sketch_span():
    X = standard_normal_matrix(4, 12, 9)
    est = FilterSketcher(n_columns=4).fit(X)
    out = est.transform(X)
    assert out.shape == (4, 9)
    # projection energy never exceeds the input energy
    assert np.linalg.norm(out) <= np.linalg.norm(X) + 1e-9


def test_transform_before_fit_raises():
    with pytest.raises(NotFittedError):
        FilterSketcher().transform(np.zeros((3, 3)))


def test_transform_row_mismatch():
    est = FilterSketcher(n_columns=2).fit(standard_normal_matrix(5, 8, 6))
    with pytest.raises(ValidationError):
        est.transform(np.zeros((9, 6)))


def test_clone_and_get_params():
    est = FilterSketcher(rate=0.3, n_columns=None, normalize=True)
    dup = clone(est)
    assert dup.get_params() == est.get_params()


def test_pipeline_compatible():
    X = standard_normal_matrix(6, 10, 8)
    pipe = Pipeline([("sk", FilterSketcher(n_columns=3))])
    out = pipe.fit_transform(X)
    assert out.shape == (3, 8)
