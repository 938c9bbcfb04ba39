import json
import math

import numpy as np
import pytest

import nnep


def test_activation_moments_match_sampling():
    rng = np.random.default_rng(3)
    h = 0.4 + math.sqrt(0.7) * rng.standard_normal(400_000)
    vals = np.array([nnep.g(x, 4) for x in h[:2000]])
    assert vals.max() <= 0.5 + 1e-12
    from scipy.special import erf

    gh = erf(h / math.sqrt(2)) / 2.0
    se = gh.std() / math.sqrt(h.size)
    assert abs(nnep.mean_g(0.4, 0.7, 4) - gh.mean()) < 4 * se
    assert abs(nnep.var_g(0.4, 0.7, 4) - gh.var()) < 2e-3


def test_synth_shapes():
    X, y = nnep.synth("clusters", 50, 1)
    assert X.shape == (50, 2)
    assert y.shape == (50,)
    X2, y2 = nnep.synth("clusters", 50, 1)
    np.testing.assert_array_equal(X, X2)


def test_fit_predict_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.uniform(-2, 2, size=(40, 1))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(40)
    cfg = json.loads(nnep.preset_config("additive"))
    cfg["hidden_units"] = 3
    cfg["max_outer_iters"] = 20
    model = nnep.fit(X, y, config=json.dumps(cfg))
    rep = model.report
    assert rep["iterations"] >= 1
    assert all(math.isfinite(v) for v in rep["log_z_ep"])
    out = model.predict(X)
    assert out["mean"].shape == (40,)
    assert np.all(out["var"] > 0)
    assert np.sqrt(np.mean((out["mean"] - y) ** 2)) < 0.5

    path = tmp_path / "m.json"
    model.save(str(path))
    again = nnep.Model.load(str(path))
    assert again.to_json() == model.to_json()
    np.testing.assert_array_equal(again.predict(X)["mean"], out["mean"])


def test_errors_map_to_python_exceptions():
    X = np.zeros((5, 1))
    y = np.arange(5.0)
    with pytest.raises(nnep.DataError):
        nnep.fit(X, y)
    with pytest.raises(nnep.ConfigError):
        nnep.fit(np.arange(5.0).reshape(-1, 1), y, config='{"hidden_units": 0}')
    with pytest.raises(nnep.DataError):
        nnep.fit(np.ones((4, 1)), y)
