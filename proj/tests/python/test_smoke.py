import json
import math
import os
import pathlib

import numpy as np
import pytest

import surrovv


def test_phi_and_bounds():
    assert surrovv.phi(8.0, 0.0) == 8.0
    assert surrovv.phi(1.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-14)
    c = surrovv.BoundConstants(0.2, 0.5, 1.0, -0.1, 8.0)
    delta = 0.05
    eps = surrovv.eps_max(c, delta)
    assert surrovv.theorem_bounds(c, eps)["total"] == pytest.approx(delta, rel=1e-12)


def test_smib_perturbation_run_hits_budget():
    cfg = surrovv.SmibConfig(0.2)
    d = surrovv.Disturbance(epsilon=0.02)
    r = surrovv.perturbation_run(cfg, d)
    assert abs(r["max_e_z"] - 0.02) <= 0.02 * 0.02
    assert r["e_z"].shape == r["t"].shape
    np.testing.assert_allclose(r["e_y"], 0.2 * r["e_z"], atol=1e-12)


def test_sweep_is_monotone():
    rows = surrovv.xline_sweep(surrovv.SmibConfig(0.2), surrovv.Disturbance(), [0.1, 0.3, 0.5])
    vals = [row["max_e_sim"] for row in rows]
    assert vals == sorted(vals)


def test_surrogate_roundtrip(tmp_path):
    net = surrovv.MlpSurrogate(2, 1, [8, 8])
    net.initialize(3)
    net.t_max = 0.2
    x0 = np.array([0.3, 0.0])
    u = np.array([0.7])
    y = surrovv.forward(net, x0, u, 0.1)
    path = tmp_path / "w.json"
    net.save(str(path))
    back = surrovv.MlpSurrogate.load(str(path))
    np.testing.assert_array_equal(surrovv.forward(back, x0, u, 0.1), y)
    traj = surrovv.surrogate_trajectory(net, x0, u, 1.0, 0.01)
    assert traj.shape == (101, 2)


def test_dimension_error_is_catchable():
    net = surrovv.MlpSurrogate(2, 1, [4])
    net.initialize(1)
    with pytest.raises(surrovv.Error):
        surrovv.forward(net, np.zeros(3), np.zeros(1), 0.0)


def test_conformal_quantiles():
    scores = list(range(1, 100))
    assert surrovv.split_quantile(scores, 0.05) == 95.0
    assert surrovv.ucb_quantile(list(range(1, 101)), 0.05, 0.05) == 99.0
    assert math.isinf(surrovv.split_quantile([1.0, 2.0, 3.0, 4.0], 0.05))


def test_run_config_invalid_and_valid(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "smib-demo", "smib": {"X_line": 0.2}, "oops": 1}))
    rc, diag = surrovv.run_config(str(bad), out=str(tmp_path / "bad_out"))
    assert rc == 2
    assert "oops" in diag
    assert not (tmp_path / "bad_out").exists()

    configs = pathlib.Path(os.environ.get("SURROVV_CONFIGS", pathlib.Path(__file__).parents[2] / "configs"))
    rc, diag = surrovv.run_config(str(configs / "smib_demo.json"), seed=2, out=str(tmp_path / "demo"))
    assert rc == 0, diag
    summary = json.loads((tmp_path / "demo" / "summary.json").read_text())
    assert abs(summary["max_e_z"] - 0.02) <= 0.02 * 0.02


def test_contract_violations_map_to_the_base_error():
    net = surrovv.MlpSurrogate(2, 1, [4])
    net.initialize(1)
    net.t_max = 0.01
    with pytest.raises(surrovv.Error):
        surrovv.surrogate_trajectory(net, np.zeros(2), np.zeros(1), 1.0, 0.1)


def test_config_error_subclass():
    assert issubclass(surrovv.ConfigError, surrovv.Error)
    assert issubclass(surrovv.Error, RuntimeError)
