import numpy as np
import pytest

import oracles
from cloudward.epidemic import EpidemicParams, initial_state, seed_infection
from cloudward.scoring import (
    ScoreWeights,
    SecurityScores,
    cloud_scores,
    exploitability,
    export_scores,
    hyperedge_score,
    impact,
    risk,
    score_vertices,
)
from cloudward.topology import CloudGraph


RING6 = CloudGraph(n=6, edges=((0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)))


def test_exploitability_endpoints(star10):
    assert exploitability(star10, 0, 1.0) == 1.0
    assert exploitability(star10, 1, 0.0) == pytest.approx(0.5 / 9)


def test_exploitability_rejects_bad_anomaly(star10):
    with pytest.raises(ValueError, match="anomaly_norm"):
        exploitability(star10, 0, 1.5)


def test_impact_no_spread_is_one_over_n(path5):
    params = EpidemicParams(beta=0.0, gamma=0.0, horizon=20)
    assert impact(path5, 2, params, n_rollouts=10, seed=0) == pytest.approx(1 / 5)


def test_impact_full_spread_is_one(path5):
    params = EpidemicParams(beta=1.0, gamma=0.0, delitescence=1, horizon=20)
    assert impact(path5, 0, params, n_rollouts=5, seed=0) == 1.0


def test_impact_matches_exact_enumeration():
    params = EpidemicParams(beta=0.3, gamma=0.4, delitescence=1, horizon=4)
    n_roll = 2000
    for v in (0, 2):
        mean, var = oracles.exact_epidemic_outcome(RING6, v, params)
        mc = impact(RING6, v, params, n_rollouts=n_roll, seed=11)
        assert abs(mc - mean) <= 3 * np.sqrt(var / n_roll)


def test_impact_matches_exact_enumeration_no_delitescence():
    params = EpidemicParams(beta=0.45, gamma=0.25, delitescence=0, horizon=4)
    n_roll = 2000
    mean, var = oracles.exact_epidemic_outcome(RING6, 1, params)
    mc = impact(RING6, 1, params, n_rollouts=n_roll, seed=7)
    assert abs(mc - mean) <= 3 * np.sqrt(var / n_roll)


def test_impact_with_base_state_counts_current_infections(path5):
    params = EpidemicParams(beta=0.0, gamma=0.0, horizon=10)
    base = seed_infection(initial_state(path5), [0])
    # vertex 4 still susceptible: seeded on top of the existing infection
    assert impact(path5, 4, params, n_rollouts=4, seed=0, base_state=base) \
        == pytest.approx(2 / 5)
    # vertex 0 already infected: no reseed, spread measured from the state
    assert impact(path5, 0, params, n_rollouts=4, seed=0, base_state=base) \
        == pytest.approx(1 / 5)


def test_risk_weighted_blend():
    w = ScoreWeights(w_e=0.4, w_i=0.4, w_a=0.2)
    assert risk(0.5, 0.25, 1.0, w) == pytest.approx(0.4 * 0.5 + 0.4 * 0.25 + 0.2)
    assert risk(1.0, 1.0, 1.0, w) == 1.0


def test_weights_validated():
    with pytest.raises(ValueError, match="sum to 1"):
        ScoreWeights(w_e=0.5, w_i=0.5, w_a=0.5)
    with pytest.raises(ValueError, match="nonnegative"):
        ScoreWeights(w_e=-0.2, w_i=1.0, w_a=0.2)


def test_security_scores_range_checked():
    with pytest.raises(ValueError, match="outside"):
        SecurityScores(risk=1.2, exploitability=0.0, impact=0.0)


def test_score_vertices_shapes_and_ranges(path5):
    params = EpidemicParams(beta=0.4, gamma=0.2, delitescence=1, horizon=6)
    anomaly = np.linspace(0, 1, 5)
    scores = score_vertices(path5, anomaly, params, n_rollouts=20, seed=3)
    assert len(scores) == 5
    for s in scores:
        assert 0.0 <= s.risk <= 1.0
        assert 0.0 <= s.exploitability <= 1.0
        assert 0.0 <= s.impact <= 1.0


def test_score_vertices_deterministic(path5):
    params = EpidemicParams(beta=0.4, gamma=0.2, horizon=6)
    anomaly = np.zeros(5)
    a = score_vertices(path5, anomaly, params, n_rollouts=10, seed=3)
    b = score_vertices(path5, anomaly, params, n_rollouts=10, seed=3)
    assert a == b


def test_cloud_scores_componentwise_mean():
    scores = [SecurityScores(0.2, 0.4, 0.0), SecurityScores(0.4, 0.6, 1.0)]
    pooled = cloud_scores(scores)
    assert pooled.risk == pytest.approx(0.3)
    assert pooled.exploitability == pytest.approx(0.5)
    assert pooled.impact == pytest.approx(0.5)
    with pytest.raises(ValueError, match="no vertex scores"):
        cloud_scores([])


def test_hyperedge_pooling():
    g = CloudGraph(n=4, edges=((0, 1), (1, 2), (2, 3)),
                   hyperedges={"subnet_0": (0, 1, 2)})
    vals = [0.1, 0.5, 0.9, 0.0]
    assert hyperedge_score(g, "subnet_0", vals, "mean") == pytest.approx(0.5)
    assert hyperedge_score(g, "subnet_0", vals, "max") == pytest.approx(0.9)
    with pytest.raises(ValueError, match="unknown hyperedge"):
        hyperedge_score(g, "nope", vals)
    with pytest.raises(ValueError, match="pooling mode"):
        hyperedge_score(g, "subnet_0", vals, "median")


def test_export_scores_csv(tmp_path, path5):
    params = EpidemicParams(beta=0.3, gamma=0.2, horizon=5)
    anomaly = np.linspace(0, 1, 5)
    scores = score_vertices(path5, anomaly, params, n_rollouts=5, seed=1)
    path = tmp_path / "scores.csv"
    export_scores(scores, anomaly, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "vertex_id,risk,exploitability,impact,anomaly"
    assert len(lines) == 6
    for v, line in enumerate(lines[1:]):
        cells = line.split(",")
        assert int(cells[0]) == v
        assert float(cells[1]) == scores[v].risk
        assert float(cells[4]) == anomaly[v]
