"""Scikit-learn compatible front end for the Frequent Directions sketcher.

Lets the sketch step compose with sklearn pipelines and parameter
search: ``fit`` consumes a (d, c) matrix whose columns are the streamed
vectors, ``transform`` maps any matrix with d rows onto the sketch basis
footprint, and ``get_params``/``set_params`` come from ``BaseEstimator``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ValidationError
from .sketch import fd_sketch, frobenius_normalize, sketch_size


class FilterSketcher(BaseEstimator, TransformerMixin):
    """Column sketcher with a fixed width or a retention rate.

    Parameters
    ----------
    rate : float, default=0.5
        Fraction of columns to retain, in (0, 1]. Ignored when
        ``n_columns`` is given.
    n_columns : int or None, default=None
        Explicit sketch width.
    normalize : bool, default=False
        Scale the fitted sketch to unit Frobenius norm.
    """

    def __init__(self, rate: float = 0.5, n_columns: int | None = None, normalize: bool = False):
        self.rate = rate
        self.n_columns = n_columns
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        d, c = X.shape
        width = self.n_columns if self.n_columns is not None else sketch_size(self.rate, c)
        if width < 1:
            raise ValidationError(f"sketch width must be >= 1, got {width}")
        result = fd_sketch(X, width)
        self.sketch_ = frobenius_normalize(result) if self.normalize else result.omega
        self.shrink_count_ = result.shrink_count
        self.fro_norm_ = result.fro_norm_omega
        self.n_features_in_ = c
        return self

    def transform(self, X):
        """Project each column of X onto the sketch's column span."""
        check_is_fitted(self, "sketch_")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.sketch_.shape[0]:
            raise ValidationError(
                f"X has {X.shape[0]} rows, sketch was fitted with {self.sketch_.shape[0]}"
            )
        q, _ = np.linalg.qr(self.sketch_)
        return q.T @ X
