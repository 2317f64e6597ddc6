import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qbound.estimators import ExtrapolationRegressor, OptimalPrecisionModel, make_solver
from qbound.optimize import OptimizerOptions
from qbound.store import cache_get


def _model_dphi(n, eta, a, b, c):
    return np.sqrt((1 - eta) / (eta * n) * (1 + (a + b / n + c / n**2) / np.sqrt(n)))


def test_regressor_fit_predict():
    n = np.arange(10, 31, dtype=float)
    y = _model_dphi(n, 0.7, 2.0, -3.0, 5.0)
    reg = ExtrapolationRegressor(eta=0.7).fit(n.reshape(-1, 1), y)
    assert (reg.a_, reg.b_, reg.c_) == pytest.approx((2.0, -3.0, 5.0), abs=1e-8)
    np.testing.assert_allclose(reg.predict([[1e4]]), _model_dphi(1e4, 0.7, 2.0, -3.0, 5.0), rtol=1e-12)
    assert reg.score(n.reshape(-1, 1), y) == pytest.approx(1.0)


def test_regressor_params_and_clone():
    reg = ExtrapolationRegressor(eta=0.4)
    assert reg.get_params() == {"eta": 0.4}
    assert clone(reg).eta == 0.4
    with pytest.raises(NotFittedError):
        reg.predict([1.0])


def test_regressor_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        ExtrapolationRegressor(0.7).fit([10, 20, 30], [0.1, 0.2])


def test_model_fit_predict_and_cache(tmp_path):
    path = tmp_path / "cache.jsonl"
    model = OptimalPrecisionModel(eta=0.7, direct_cap=10, restarts=2, cache_path=path).fit()
    assert sorted(model.results_) == list(range(5, 11))
    fp = OptimizerOptions(restarts=2).fingerprint()
    assert cache_get(7, 0.7, fp, path) is not None
    pred = model.predict([1, 10, 1e4])
    assert pred[0] == pytest.approx(1 / np.sqrt(0.7), rel=1e-6)
    paths = [p.path for p in model.predict_with_path([10, 11])]
    assert paths == ["direct", "extrapolated"]
    # second fit is served from the stored fit record
    again = OptimalPrecisionModel(eta=0.7, direct_cap=10, restarts=2, cache_path=path).fit()
    assert again.results_ == {}
    assert again.extrapolation_.a == pytest.approx(model.extrapolation_.a, rel=1e-15)


def test_model_fit_on_explicit_photon_numbers():
    model = OptimalPrecisionModel(eta=0.8, direct_cap=12, restarts=2).fit([6, 8, 10, 12])
    assert sorted(model.results_) == [6, 8, 10, 12]
    with pytest.raises(ValueError, match="integers"):
        OptimalPrecisionModel(eta=0.8, restarts=2).fit([6.5, 8, 10])


def test_model_validates_parameters():
    with pytest.raises(ValueError):
        OptimalPrecisionModel(eta=1.0).fit()
    with pytest.raises(ValueError):
        OptimalPrecisionModel(eta=0.5, direct_cap=2).fit()
    with pytest.raises(NotFittedError):
        OptimalPrecisionModel(eta=0.5).predict([3])


def test_solver_serves_cached_results(tmp_path):
    path = tmp_path / "c.jsonl"
    solve = make_solver(OptimizerOptions(restarts=2), path)
    first = solve(6, 0.5)
    second = solve(6, 0.5)
    assert second.iterations == 0
    assert second.qfi == first.qfi
    np.testing.assert_array_equal(second.coeffs, first.coeffs)
