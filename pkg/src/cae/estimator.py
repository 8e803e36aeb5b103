"""scikit-learn front end for the causal autoencoder."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .dag import DagFitConfig
from .data import Dataset
from .graph import from_thresholded, markov_blanket
from . import trainer


class CausalAutoEncoder(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Autoencoder whose code is split by a learned DAG into causal and nuisance parts.

    ``fit`` alternates autoencoder/classifier updates with refits of a DAG over
    ``[code, label]``. ``predict`` classifies from the code dimensions in the
    label's Markov blanket; ``transform`` returns those dimensions.

    Parameters mirror :class:`cae.trainer.TrainConfig`; ``dag_cfg`` accepts a
    :class:`cae.dag.DagFitConfig` or a dict of its fields.

    Attributes
    ----------
    model_ : TrainedModel
    classes_ : ndarray of shape (n_classes,)
    mb_dims_ : list of int
        Code dimensions in the Markov blanket of the label.
    feature_dims_ : list of int
        Code dimensions fed to the classifier (``mb_dims_`` unless the
        blanket was empty or ``classifier_dims='all'``).
    adjacency_ : ndarray of shape (k + 1, k + 1)
        Thresholded graph; the last node is the label.
    history_ : list of dict
    """

    def __init__(self, k=50, l=2, sigma=0.3, lambda1=1.0, lambda2=1.0, lambda3=1e-4,
                 max_outer=10, conv_tol=1e-8, inner_epochs=200, step_size=1e-3, seed=0,
                 ablate_lc=False, ablate_ly=False, standardize=True, hidden_dims=None,
                 classifier_dims="mb", dag_standardize=False, head_iter=500, dag_cfg=None):
        self.k = k
        self.l = l
        self.sigma = sigma
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda3 = lambda3
        self.max_outer = max_outer
        self.conv_tol = conv_tol
        self.inner_epochs = inner_epochs
        self.step_size = step_size
        self.seed = seed
        self.ablate_lc = ablate_lc
        self.ablate_ly = ablate_ly
        self.standardize = standardize
        self.hidden_dims = hidden_dims
        self.classifier_dims = classifier_dims
        self.dag_standardize = dag_standardize
        self.head_iter = head_iter
        self.dag_cfg = dag_cfg

    def _train_config(self) -> trainer.TrainConfig:
        params = self.get_params()
        dag_cfg = params.pop("dag_cfg")
        if dag_cfg is None:
            dag_cfg = DagFitConfig()
        elif isinstance(dag_cfg, dict):
            dag_cfg = DagFitConfig(**dag_cfg)
        return trainer.TrainConfig(dag_cfg=dag_cfg, **params)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError(f"need at least two classes to fit a classifier; got {self.classes_.size} class")
        if X.shape[1] <= self.k:
            raise ValueError(f"code dim k={self.k} must be smaller than n_features = {X.shape[1]}")
        ds = Dataset(X, y_idx, int(self.classes_.size))
        model = trainer.train(ds, self._train_config())
        self._set_model(model)
        return self

    def _set_model(self, model: trainer.TrainedModel) -> None:
        self.model_ = model
        self.mb_dims_ = list(model.mb_dims)
        self.feature_dims_ = list(model.feature_dims)
        self.adjacency_ = np.array(model.dag.A_hat)
        self.history_ = [dict(r) for r in model.history]

    @classmethod
    def from_model(cls, model: trainer.TrainedModel, classes=None) -> "CausalAutoEncoder":
        """Wrap an already trained model, e.g. one loaded from disk."""
        est = cls(**{k: v for k, v in model.config.to_dict().items() if k in cls._get_param_names()})
        est.dag_cfg = model.config.dag_cfg
        est.hidden_dims = model.config.hidden_dims
        est.classes_ = np.arange(model.clf.C) if classes is None else np.asarray(classes)
        est.n_features_in_ = model.d
        est._set_model(model)
        return est

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return trainer.predict(self.model_, X)[1]

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return self.classes_[trainer.predict(self.model_, X)[0]]

    def transform(self, X):
        """Causal representation: the code dimensions used by the classifier."""
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return trainer.transform(self.model_, X)[:, self.feature_dims_]

    def encode(self, X):
        """Full ``k``-dimensional code."""
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return trainer.transform(self.model_, X)

    @property
    def markov_blanket_(self):
        check_is_fitted(self, "model_")
        return markov_blanket(from_thresholded(self.model_.dag, self.model_.k))
