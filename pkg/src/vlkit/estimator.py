"""scikit-learn compatible wrapper around the token planners."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .tokenization import StrategyConfig, plan_image

FEATURE_NAMES = np.array(
    ["resized_width", "resized_height", "grid_x", "grid_y", "n_crops", "token_count"], dtype=object
)


class TokenPlanner(TransformerMixin, BaseEstimator):
    """Map image sizes ``(width, height)`` to visual-token plan features.

    Stateless apart from the validated configuration, so ``fit`` only checks
    parameters and input shape. ``transform`` returns one row per image with
    the columns in ``FEATURE_NAMES``; ``plan`` returns the full
    ``PatchPlan`` objects.

    Examples
    --------
    >>> TokenPlanner(strategy="dynres", min_patches=256).fit_transform([[1920, 1080]])
    array([[1280,  720,   80,   45,    0, 3600]])
    """

    def __init__(
        self,
        strategy="dynres",
        patch_px=16,
        tile_px=None,
        tokens_per_tile=None,
        max_tokens=None,
        min_patches=1,
        max_patches=None,
        s2_scales=(1, 2),
    ):
        self.strategy = strategy
        self.patch_px = patch_px
        self.tile_px = tile_px
        self.tokens_per_tile = tokens_per_tile
        self.max_tokens = max_tokens
        self.min_patches = min_patches
        self.max_patches = max_patches
        self.s2_scales = s2_scales

    def _validate(self, X, reset):
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (width, height), got {X.shape[1]}")
        if (X < 1).any():
            raise ValueError("image sizes must be positive")
        if reset:
            self.n_features_in_ = 2
        return X

    def fit(self, X, y=None):
        self._validate(X, reset=True)
        self.config_ = StrategyConfig(**self.get_params())
        return self

    def plan(self, X):
        check_is_fitted(self, "config_")
        X = self._validate(X, reset=False)
        return [plan_image(int(w), int(h), self.config_) for w, h in X]

    def transform(self, X):
        rows = [
            (*p.resized_size, *p.grid, len(p.crops), p.token_count) for p in self.plan(X)
        ]
        return np.asarray(rows, dtype=np.int64).reshape(-1, len(FEATURE_NAMES))

    def get_feature_names_out(self, input_features=None):
        return FEATURE_NAMES.copy()
