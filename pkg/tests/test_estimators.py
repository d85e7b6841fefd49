import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from hetnet.estimators import (
    FlightTimeTransformer,
    GLVChannelClassifier,
    LocalMapTransformer,
    ReturnMapTransformer,
    WedgeClassifier,
    equilibrium_from_estimator,
)
from hetnet.glv import GLVSystem
from hetnet.local import InSectionPoint, local_map, time_of_flight
from hetnet.network import load_network
from hetnet.stability import estimate_wedge_complement_ratio


def test_flight_transformer_matches_functional_api():
    X = np.array([[0.1, 0.1], [0.3, -0.02], [-0.05, 0.2]])
    out = FlightTimeTransformer([2.0, 1.0]).fit_transform(X)
    assert out[:, 0] == pytest.approx([time_of_flight(x, [2.0, 1.0]) for x in X], rel=1e-14)
    assert np.linalg.norm(out[:, 1:], axis=1) == pytest.approx(np.ones(3))


def test_params_round_trip_and_clone():
    est = WedgeClassifier(lambdas=(3.0, 1.0), eps=0.3, delta=0.02, n_samples=1000, seed=5)
    params = est.get_params()
    assert params["eps"] == 0.3 and params["seed"] == 5
    twin = clone(est).set_params(eps=0.4)
    assert twin.eps == 0.4 and est.eps == 0.3


def test_rates_are_validated_on_fit():
    with pytest.raises(ValueError):
        FlightTimeTransformer([1.0, 2.0]).fit()
    with pytest.raises(ValueError):
        FlightTimeTransformer([2.0]).fit().transform([[0.1, 0.2]])


def test_local_map_transformer_matches_functional_api():
    est = LocalMapTransformer((2.0, 1.0), (3.0, 4.0)).fit()
    eq = equilibrium_from_estimator(est, "n")
    row = np.array([[0.1, 0.05, 0.6, 0.8]])
    ref = local_map(InSectionPoint("n", row[0, :2], row[0, 2:]), eq)
    assert est.transform(row)[0] == pytest.approx(np.concatenate([ref.phi, ref.y]), rel=1e-14)
    with pytest.raises(ValueError):
        est.transform([[0.1, 0.05, 0.5, 0.5]])


def test_return_map_transformer_closed_form(configs):
    net = load_network(configs / "scalar_two_node.json")
    from hetnet.local import load_transition_maps
    import json

    maps = load_transition_maps(json.loads((configs / "scalar_two_node.json").read_text()), net)
    out = ReturnMapTransformer(net, maps, n_loops=2).fit_transform([[0.1, 1.0]])
    assert out[0, 0] == pytest.approx(0.1**5.0625, rel=1e-12)


def test_wedge_classifier_predict_and_estimate():
    clf = WedgeClassifier((2.0, 1.0), eps=0.4, delta=0.02, n_samples=50_000, seed=1).fit()
    assert clf.predict([[0.1, 0.1], [0.0, 0.1]]).tolist() == [True, False]
    ref = estimate_wedge_complement_ratio([2.0, 1.0], 0.4, 0.02, 50_000, 1)
    assert clf.estimate_.hits == ref.hits


def test_wedge_classifier_in_pipeline():
    pipe = make_pipeline(FunctionTransformer(lambda X: 0.5 * np.asarray(X)), WedgeClassifier((2.0, 1.0), eps=0.4))
    pipe.fit(np.zeros((1, 2)))
    assert pipe.predict([[0.2, 0.2]]).tolist() == [True]


def test_channel_classifier_scores_following_fraction():
    ml = GLVSystem.may_leonard(0.8, 1.6)
    clf = GLVChannelClassifier(ml.growth, ml.interaction, eps=0.2, delta=0.1).fit()
    X = np.array([[0.9, 0.005, 0.1], [0.9, 0.005, 0.1]])
    pred = clf.predict(X)
    assert pred.tolist() == [pred[0]] * 2
    assert clf.score(X) == pytest.approx(pred.mean())
    assert set(clf.outcomes(X)) <= {"following", "left_tube", "wrong_order", "timeout"}
