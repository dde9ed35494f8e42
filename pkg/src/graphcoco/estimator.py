"""Scikit-learn style wrappers: a fittable graph embedder and a linear probe.

``GraphCoCoEmbedding.fit`` runs the contrastive training loop on a collection
of graphs; ``transform`` maps graphs to frozen pooled embeddings. All
constructor arguments are scalars so ``get_params``/``clone`` work unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .augment import AugmentKind, AugmentSpec
from .evaluation import embed_rows, fit_probe
from .trainer import EraseMode, TrainConfig, train
from .validation import as_dataset


class GraphCoCoEmbedding(BaseEstimator, TransformerMixin):
    """Self-supervised graph embedder with contrastive pretraining.

    ``fit`` ignores ``y``; ``transform`` returns one row per graph.
    """

    def __init__(
        self,
        epochs: int = 20,
        batch_size: int = 32,
        lr: float = 0.01,
        delta: float = 0.7,
        tau: float = 0.2,
        depth: int = 3,
        hidden_dim: int = 32,
        erase_mode: str = "standard",
        seed: int = 0,
        aug1_kind: str = "node_drop",
        aug1_ratio: float = 0.2,
        aug2_kind: str = "subgraph",
        aug2_ratio: float = 0.2,
        embed_mode: str = "anchor",
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.delta = delta
        self.tau = tau
        self.depth = depth
        self.hidden_dim = hidden_dim
        self.erase_mode = erase_mode
        self.seed = seed
        self.aug1_kind = aug1_kind
        self.aug1_ratio = aug1_ratio
        self.aug2_kind = aug2_kind
        self.aug2_ratio = aug2_ratio
        self.embed_mode = embed_mode

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            delta=self.delta,
            tau=self.tau,
            depth=self.depth,
            hidden_dim=self.hidden_dim,
            erase_mode=EraseMode(self.erase_mode),
            seed=self.seed,
            aug1=AugmentSpec(AugmentKind(self.aug1_kind), self.aug1_ratio),
            aug2=AugmentSpec(AugmentKind(self.aug2_kind), self.aug2_ratio),
        )

    def fit(self, X, y=None):
        data = as_dataset(X)
        self.checkpoint_, self.loss_history_ = train(data, self._config())
        self.n_features_out_ = self.depth * self.hidden_dim * (2 if self.embed_mode == "concat" else 1)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "checkpoint_")
        return embed_rows(as_dataset(X), self.checkpoint_, self.embed_mode)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)


class LinearProbe(BaseEstimator, ClassifierMixin):
    """L2-regularized multinomial logistic regression, full-batch gradient descent.

    Standardizes columns with statistics from ``fit``; ties every run to the
    same deterministic trajectory (zero init, spectral step size).
    """

    def __init__(self, reg: float = 1e-3, max_iter: int = 500, tol: float = 1e-6):
        self.reg = reg
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("LinearProbe needs at least two classes")
        self.mu_ = X.mean(axis=0)
        sigma = X.std(axis=0)
        self.sigma_ = np.where(sigma > 0.0, sigma, 1.0)
        xs = (X - self.mu_) / self.sigma_
        self.coef_, self.intercept_ = fit_probe(
            xs, y_idx, self.classes_.size, reg=self.reg, max_iter=self.max_iter, tol=self.tol
        )
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return ((X - self.mu_) / self.sigma_) @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        return self.classes_[self.decision_function(X).argmax(axis=1)]
