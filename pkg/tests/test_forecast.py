import numpy as np
import pytest

import oracles
from cloudward import gnn, logfeat
from cloudward.forecast import (
    ForecastParams,
    color_forecast,
    embedding_trajectory,
    export_forecast,
    fit_forecaster,
    predict,
)
from cloudward.logsynth import LogCorpus
from cloudward.topology import CloudGraph


def synth_trajectory(coeffs, bias, z0s, steps, rng):
    """Roll a noiseless linear recurrence forward from given lag matrices."""
    hist = list(z0s)
    for _ in range(steps):
        nxt = np.tile(bias, (hist[-1].shape[0], 1))
        for j in range(len(coeffs)):
            nxt = nxt + hist[-1 - j] @ coeffs[j]
        hist.append(nxt)
    return hist


def test_ar1_exact_recovery(rng):
    c = np.array([[0.7, 0.1], [-0.2, 0.5]])
    b = np.array([0.05, -0.1])
    traj = synth_trajectory([c], b, [rng.standard_normal((4, 2))], 12, rng)
    params = fit_forecaster([traj], p=1, ridge=1e-10)
    assert params.order == 1
    assert np.abs(params.coeffs[0] - c).max() < 1e-6
    assert np.abs(params.bias - b).max() < 1e-6
    pred = predict(params, traj[:-1], 1)[0]
    assert np.abs(pred - traj[-1]).max() < 1e-6


def test_ar2_matches_lstsq_oracle(rng):
    c1 = np.array([[0.4, 0.2], [0.0, 0.3]])
    c2 = np.array([[0.1, 0.0], [-0.1, 0.2]])
    b = np.array([0.2, 0.0])
    trajs = [
        synth_trajectory([c1, c2], b,
                         [rng.standard_normal((3, 2)), rng.standard_normal((3, 2))],
                         10, rng)
        for _ in range(3)
    ]
    ridge = 1e-9
    params = fit_forecaster(trajs, p=2, ridge=ridge)
    theta = oracles.lstsq_ar(trajs, 2, ridge)
    coeffs_o = np.stack([theta[2 * j:2 * (j + 1)] for j in range(2)])
    assert np.abs(params.coeffs - coeffs_o).max() < 1e-8
    assert np.abs(params.bias - theta[-1]).max() < 1e-8
    assert np.abs(params.coeffs[0] - c1).max() < 1e-5
    assert np.abs(params.coeffs[1] - c2).max() < 1e-5


def test_iterated_prediction_hand_value():
    # z' = 2z + 1 elementwise: 1 -> 3 -> 7 -> 15
    params = ForecastParams(order=1, coeffs=np.array([[[2.0]]]),
                            bias=np.array([1.0]), ridge=1e-6)
    preds = predict(params, [np.array([[1.0]])], 3)
    got = [float(p[0, 0]) for p in preds]
    assert got == [3.0, 7.0, 15.0]


def test_predict_k_zero_empty(rng):
    params = ForecastParams(order=1, coeffs=np.zeros((1, 2, 2)),
                            bias=np.zeros(2), ridge=1e-6)
    assert predict(params, [rng.standard_normal((3, 2))], 0) == []


def test_predict_validation(rng):
    params = ForecastParams(order=2, coeffs=np.zeros((2, 2, 2)),
                            bias=np.zeros(2), ridge=1e-6)
    with pytest.raises(ValueError, match="k must be >= 0"):
        predict(params, [np.zeros((3, 2))] * 2, -1)
    with pytest.raises(ValueError, match="shorter than order"):
        predict(params, [np.zeros((3, 2))], 1)
    with pytest.raises(ValueError, match="dimension"):
        predict(params, [np.zeros((3, 4))] * 2, 1)


def test_fit_validation(rng):
    traj = [rng.standard_normal((3, 2)) for _ in range(4)]
    with pytest.raises(ValueError, match="order p"):
        fit_forecaster([traj], p=0)
    with pytest.raises(ValueError, match="ridge"):
        fit_forecaster([traj], p=1, ridge=0.0)
    with pytest.raises(ValueError, match="no trajectories"):
        fit_forecaster([], p=1)
    with pytest.raises(ValueError, match="too short"):
        fit_forecaster([traj[:2]], p=2)
    with pytest.raises(ValueError, match="at least 2 steps"):
        fit_forecaster([traj[:1]], p=1)
    bad = [rng.standard_normal((3, 2)), rng.standard_normal((3, 3))]
    with pytest.raises(ValueError, match="share one shape"):
        fit_forecaster([bad], p=1)
    mixed = [traj, [rng.standard_normal((3, 3)) for _ in range(4)]]
    with pytest.raises(ValueError, match="disagree on embedding dimension"):
        fit_forecaster(mixed, p=1)


def test_params_validation():
    with pytest.raises(ValueError, match="order"):
        ForecastParams(order=0, coeffs=np.zeros((0, 2, 2)), bias=np.zeros(2), ridge=1e-6)
    with pytest.raises(ValueError, match="shapes"):
        ForecastParams(order=1, coeffs=np.zeros((2, 2, 2)), bias=np.zeros(2), ridge=1e-6)
    with pytest.raises(ValueError, match="non-finite"):
        ForecastParams(order=1, coeffs=np.full((1, 2, 2), np.nan),
                       bias=np.zeros(2), ridge=1e-6)


def test_color_forecast_clamps_and_checks_dim(rng):
    params = ForecastParams(order=1, coeffs=np.array([[[3.0]]]),
                            bias=np.array([0.0]), ridge=1e-6)
    head = gnn.SupervisedHead(task="score-regression", weights=np.array([1.0]),
                              bias=0.0)
    colors = color_forecast(params, [np.array([[2.0], [-5.0]])], head, 2)
    assert colors.shape == (2, 2)
    assert colors.min() >= 0.0 and colors.max() <= 1.0
    assert colors[0, 0] == 1.0 and colors[0, 1] == 0.0
    bad_head = gnn.SupervisedHead(task="score-regression", weights=np.zeros(4),
                                  bias=0.0)
    with pytest.raises(ValueError, match="dimension"):
        color_forecast(params, [np.zeros((2, 1))], bad_head, 1)


def test_embedding_trajectory_shapes(rng):
    g = CloudGraph(n=2, edges=((0, 1),))
    corpus = LogCorpus(n=2, entries=(
        ((0, ("boot", "ok")), (1, ("scan", "fail")), (2, ("scan", "fail"))),
        ((0, ("boot", "ok")), (2, ("login", "ok"))),
    ))
    cfg = logfeat.SkipGramConfig(dim=3, window=1, negatives=1, epochs=1,
                                 min_count=1, seed=5)
    table = logfeat.train_embeddings([["boot", "ok", "scan", "fail", "login"]], cfg)
    params = gnn.GcnAutoencoderParams(
        w0=rng.standard_normal((3, 4)), w1=rng.standard_normal((4, 2)),
        w2=rng.standard_normal((2, 3)))
    zs = embedding_trajectory(g, corpus, table, params, steps=[1, 2])
    assert len(zs) == 2
    assert zs[0].shape == (2, 2)
    # step 2 sees more vertex-1 tokens than step 1, so embeddings move
    assert not np.allclose(zs[0][1], zs[1][1])
    with pytest.raises(ValueError, match="no log tokens"):
        embedding_trajectory(g, LogCorpus(n=2, entries=(((0, ("a",)),), ())),
                             table, params, steps=[0])


def test_export_forecast_csv(tmp_path):
    colors = np.array([[0.25, 0.5], [0.75, 1.0]])
    path = tmp_path / "forecast.csv"
    export_forecast(colors, t_start=7, path=path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,vertex_id,predicted_score"
    assert lines[1] == "7,0,0.25"
    assert lines[4] == "8,1,1.0"
    assert len(lines) == 5
