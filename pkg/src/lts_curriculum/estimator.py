"""scikit-learn style wrapper around the curriculum trainer."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .curriculum import ScheduleConfig
from .gnn_core import forward, log_softmax, predict
from .hetero_graph import HeteroGraph
from .metrics import accuracy
from .trainer import TrainConfig, run_training
from .validation import check_index_array


def _check_graph(X):
    if not isinstance(X, HeteroGraph):
        raise TypeError(f"expected a HeteroGraph, got {type(X).__name__}")
    return X


class LTSNodeClassifier(ClassifierMixin, BaseEstimator):
    """Relational GCN node classifier trained with the loss-aware schedule.

    ``X`` is always a :class:`HeteroGraph`; rows of the output correspond to
    target-type nodes. Pass ``scheduler="none"`` for plain full-set training.

    Example::

        clf = LTSNodeClassifier(scheduler="root", lambda0=0.3, T=50).fit(graph)
        clf.score(graph)            # accuracy on the test split
        clf.predict(graph, nodes)   # class ids for chosen target nodes
    """

    def __init__(self, scheduler="linear", lambda0=0.25, T=100, learning_rate=0.01,
                 optimizer="adam", beta1=0.9, beta2=0.999, epsilon=1e-8, max_epochs=500,
                 patience=30, hidden_dim=32, num_layers=2, random_state=0):
        self.scheduler = scheduler
        self.lambda0 = lambda0
        self.T = T
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.max_epochs = max_epochs
        self.patience = patience
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.random_state = random_state

    def train_config(self) -> TrainConfig:
        schedule = None
        if self.scheduler != "none":
            schedule = ScheduleConfig(self.lambda0, self.T, self.scheduler)
        return TrainConfig(
            schedule=schedule, learning_rate=self.learning_rate, optimizer=self.optimizer,
            beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon,
            max_epochs=self.max_epochs, patience=self.patience, hidden_dim=self.hidden_dim,
            num_layers=self.num_layers, seed=self.random_state,
        )

    def fit(self, X, y=None, noise=None):
        """Train on the graph's train split.

        ``y``, when given, replaces the label vector of all target nodes.
        """
        graph = _check_graph(X)
        if y is not None:
            graph = graph.with_labels(np.asarray(y))
        self.report_ = run_training(graph, self.train_config(), noise=noise)
        self.params_ = self.report_.params
        self.classes_ = np.arange(graph.num_classes)
        self.n_epochs_ = len(self.report_.rows)
        self.best_epoch_ = self.report_.best_epoch
        return self

    def _logits(self, X, nodes):
        check_is_fitted(self, "params_")
        graph = _check_graph(X)
        logits, _ = forward(graph, self.params_)
        if nodes is None:
            return logits
        return logits[check_index_array(nodes, graph.num_target, "nodes")]

    def decision_function(self, X, nodes=None):
        return self._logits(X, nodes)

    def predict_proba(self, X, nodes=None):
        return np.exp(log_softmax(self._logits(X, nodes)))

    def predict(self, X, nodes=None):
        return predict(self._logits(X, nodes))

    def score(self, X, y=None, split="test"):
        """Accuracy on ``split`` (labels from the graph unless ``y`` is given)."""
        graph = _check_graph(X)
        idx = graph.splits[split]
        truth = graph.labels[idx] if y is None else np.asarray(y)
        return accuracy(self.predict(graph, idx), truth)
