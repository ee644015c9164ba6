import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from vlkit.errors import ConfigError
from vlkit.estimator import FEATURE_NAMES, TokenPlanner


def test_fit_transform_matches_planner():
    out = TokenPlanner(strategy="dynres", min_patches=256).fit_transform([[1920, 1080], [64, 48]])
    assert out.tolist() == [[1280, 720, 80, 45, 0, 3600], [320, 240, 20, 15, 0, 300]]


def test_get_params_and_clone():
    est = TokenPlanner(strategy="multicrop", max_tokens=3096)
    params = est.get_params()
    assert params["strategy"] == "multicrop" and params["max_tokens"] == 3096
    twin = clone(est).set_params(max_tokens=3600)
    assert twin.fit_transform([[800, 600]])[0, -1] == 3456
    assert est.fit_transform([[800, 600]])[0, -1] == 2304


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TokenPlanner().transform([[10, 10]])


@pytest.mark.parametrize("X", [[[10, 10, 10]], [[0, 5]], [[np.nan, 3]]])
def test_input_validation(X):
    with pytest.raises(ValueError):
        TokenPlanner().fit(X)


def test_bad_params_surface_at_fit():
    with pytest.raises(ConfigError):
        TokenPlanner(strategy="bogus").fit([[10, 10]])


def test_in_pipeline():
    pipe = make_pipeline(FunctionTransformer(lambda X: np.asarray(X) * 2), TokenPlanner(strategy="dyns2"))
    out = pipe.fit_transform([[500, 350]])
    assert out[0, 2:4].tolist() == [2, 1]
    assert list(pipe[-1].get_feature_names_out()) == list(FEATURE_NAMES)
