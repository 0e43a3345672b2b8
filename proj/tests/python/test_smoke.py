import math

import numpy as np
import pytest

import dpgp


def test_c_delta():
    assert dpgp.c_delta(0.01, "rkhs") == pytest.approx(3.1075, abs=1e-4)
    assert dpgp.c_delta(0.01, "cloaking") == pytest.approx(3.2552, abs=1e-4)
    with pytest.raises(ValueError):
        dpgp.c_delta(0.01, "laplace")


def test_gp_fit_and_predict():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, size=(15, 1))
    y = np.sin(6 * X[:, 0])
    spec = dpgp.KernelSpec(1.0, [0.3], 0.01)
    m = dpgp.GPModel.fit(X, y, spec)
    Xs = np.linspace(0, 1, 7)[:, None]
    K = dpgp.gram(spec, X) + 0.01 * np.eye(15)
    expect = dpgp.cross(spec, Xs, X) @ np.linalg.solve(K, y)
    np.testing.assert_allclose(m.predict_mean(Xs), expect, atol=1e-9)
    C = m.cloaking_matrix(Xs)
    np.testing.assert_allclose(C @ y, expect, atol=1e-9)


def test_find_lambdas_matches_convex_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(3)
    C = rng.uniform(-1, 1, size=(3, 5))
    sol = dpgp.find_lambdas(C)
    P = cp.Variable((3, 3), PSD=True)
    cons = [C[:, j] @ P @ C[:, j] <= 1 for j in range(5)]
    prob = cp.Problem(cp.Maximize(cp.log_det(P)), cons)
    prob.solve()
    assert sol["log_det_M"] == pytest.approx(-prob.value, abs=1e-2)
    assert sol["delta_achieved"] <= 1.001


def test_cloaking_release_scalar():
    X = np.zeros((1, 1))
    m = dpgp.GPModel.fit(X, np.zeros(1), dpgp.KernelSpec(1.0, [1.0], 0.0))
    r = dpgp.release_cloaking(m, X, dpgp.DPParams(1.0, 0.01, 1.0), seed=2)
    assert r["noise_std"][0] == pytest.approx(3.2552, rel=1e-3)
    assert r["mechanism"] == "cloaking"


def test_rkhs_release_requires_unit_variance():
    X = np.array([[0.0], [1.0]])
    m = dpgp.GPModel.fit(X, np.zeros(2), dpgp.KernelSpec(2.0, [1.0], 0.1))
    with pytest.raises(ValueError):
        dpgp.release_rkhs(m, X, dpgp.DPParams(1.0, 0.01, 1.0))


def test_exponential_mechanism():
    p = dpgp.exponential_mechanism_probabilities(np.array([0.0, -1.0]), 1.0, 2.0)
    assert p[0] == pytest.approx(math.e / (math.e + 1), abs=1e-12)
    assert dpgp.sse_sensitivity([0.5, 0.3], 1.0) == pytest.approx(9.5)


def test_varah_and_bound_b():
    assert dpgp.varah_bound(2 * np.eye(3)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        dpgp.varah_bound(np.ones((2, 2)))
    Kinv = np.linalg.inv(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert dpgp.bound_b(Kinv) == pytest.approx(4 / 3)


def test_bins_and_integral_kernel():
    X = np.array([[0.1], [0.2], [0.6], [0.9]])
    y = np.array([1.0, 3.0, -2.0, 0.0])
    out = dpgp.dp_bin_means(X, y, [np.linspace(0, 1, 3)], dpgp.DPParams(1e6, 0.01, 1.0))
    np.testing.assert_allclose(out["means"], [2.0, -1.0])
    np.testing.assert_allclose(out["dp_means"], [2.0, -1.0], atol=1e-4)
    spec = dpgp.KernelSpec(1.0, [1.0])
    w = 1e-3
    v = dpgp.integral_kernel(spec, [0.0], [w], [0.0], [w])
    assert v == pytest.approx(w * w, rel=1e-6)


def test_run_experiment_report():
    cfg = {
        "mechanism": "cloaking",
        "data": {"synthetic": {"function": "sine1d", "n": 80, "noise_std": 0.1, "seed": 1}},
        "clip": [-2.0, 2.0],
        "kernel": {"variance": 1.0, "lengthscales": [1.0], "noise_variance": 0.01},
        "dp": {"epsilons": [1.0, "inf"], "delta": 0.01},
        "folds": 4,
        "test_size": 6,
        "seed": 5,
    }
    rep = dpgp.run_experiment(cfg)
    assert rep["mechanism"] == "cloaking"
    assert len(rep["results"]) == 2
    assert rep["results"][1]["epsilon"] == "inf"
    assert rep["results"][0]["mean_rmse"] > rep["results"][1]["mean_rmse"]
    assert rep == dpgp.run_experiment(cfg)


def test_hpselect():
    cfg = {
        "mechanism": "gp",
        "data": {"synthetic": {"function": "sine1d", "n": 60, "noise_std": 0.1, "seed": 2}},
        "clip": [-2.0, 2.0],
        "kernel": {"variance": 1.0, "lengthscales": [1.0], "noise_variance": 0.01},
        "grid": {"lengthscales": [0.3, 1.0, 3.0], "folds": 3, "select_epsilon": 1.0},
    }
    sel = dpgp.hpselect(cfg, seed=4)
    assert len(sel["candidates"]) == 3
    assert sum(c["probability"] for c in sel["candidates"]) == pytest.approx(1.0)
    assert 0 <= sel["drawn_index"] < 3
