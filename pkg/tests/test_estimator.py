import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lts_curriculum.estimator import LTSNodeClassifier
from lts_curriculum.exceptions import ConfigurationError


def test_params_round_trip_through_clone():
    est = LTSNodeClassifier(scheduler="root", lambda0=0.4, T=20, random_state=3)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.get_params()["scheduler"] == "root"


def test_fit_predict_score(synthetic_graph):
    est = LTSNodeClassifier(T=20, max_epochs=60, random_state=1).fit(synthetic_graph)
    pred = est.predict(synthetic_graph)
    assert pred.shape == (synthetic_graph.num_target,)
    assert set(np.unique(pred)) <= set(est.classes_)
    proba = est.predict_proba(synthetic_graph, nodes=synthetic_graph.test_idx)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    acc = est.score(synthetic_graph)
    assert acc == pytest.approx(est.report_.test_acc)
    assert 0.0 <= acc <= 1.0 and est.best_epoch_ <= est.n_epochs_


def test_unfitted_predict_raises(small_graph):
    with pytest.raises(NotFittedError):
        LTSNodeClassifier().predict(small_graph)


def test_bad_hyperparameter_reported_at_fit(small_graph):
    with pytest.raises(ConfigurationError, match="lambda0"):
        LTSNodeClassifier(lambda0=1.5).fit(small_graph)
