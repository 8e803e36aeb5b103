"""Alternating optimisation of the causal autoencoder.

Each outer iteration runs a network phase (autoencoder and classifier
updated by Adam with the thresholded graph held fixed) followed by a graph
phase (refit the adjacency matrix on the current codes, threshold it and
re-derive the Markov-blanket code dimensions).
"""
from __future__ import annotations

import dataclasses
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from . import autoencoder as ae_mod
from . import classifier as clf_mod
from .autoencoder import AutoencoderParams, MinMaxTarget
from .classifier import ClassifierParams
from .dag import DagFitConfig, ThresholdedDag, acyclicity_h, causal_structure_loss, fit_dag, threshold
from .data import Dataset, ScalerParams, fit_scaler
from .graph import split_representations

logger = logging.getLogger(__name__)

MODEL_FORMAT = "cae-model"
MODEL_VERSION = 1

PRESETS = {
    "office": {"lambda1": 0.01, "lambda2": 1.0, "lambda3": 1e-4},
    "amazon": {"lambda1": 10.0, "lambda2": 1.0, "lambda3": 1e-4},
    "reuters": {"lambda1": 1.0, "lambda2": 0.1, "lambda3": 1e-3},
}


class TrainingError(RuntimeError):
    pass


class EmptyMarkovBlanketWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainConfig:
    l: int = 2
    k: int = 50
    sigma: float = 0.3
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1e-4
    max_outer: int = 10
    conv_tol: float = 1e-8
    inner_epochs: int = 200
    step_size: float = 1e-3
    batch: int | None = None
    seed: int = 0
    ablate_lc: bool = False
    ablate_ly: bool = False
    standardize: bool = True
    hidden_dims: tuple | None = None
    classifier_dims: str = "mb"
    dag_standardize: bool = False
    head_iter: int = 500
    dag_cfg: DagFitConfig = field(default_factory=DagFitConfig)

    def __post_init__(self):
        if self.l < 1 or self.k < 1:
            raise ValueError("l and k must be >= 1")
        if self.sigma <= 0 or self.conv_tol <= 0:
            raise ValueError("sigma and conv_tol must be positive")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("lambda coefficients must be >= 0")
        if self.max_outer < 1 or self.inner_epochs < 0 or self.head_iter < 0:
            raise ValueError("max_outer must be >= 1 and epoch budgets >= 0")
        if self.step_size < 0:
            raise ValueError("step_size must be >= 0")
        if self.batch is not None:
            # mini-batch schedules are not supported; full batch only
            raise ValueError("only full-batch training (batch=None) is supported")
        if self.classifier_dims not in ("mb", "all"):
            raise ValueError("classifier_dims must be 'mb' or 'all'")
        if self.hidden_dims is not None:
            object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if isinstance(self.dag_cfg, dict):
            object.__setattr__(self, "dag_cfg", DagFitConfig(**self.dag_cfg))

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "TrainConfig":
        try:
            values = dict(PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        values.update(overrides)
        return cls(**values)

    @property
    def coef_lc(self) -> float:
        return 0.0 if self.ablate_lc else self.lambda1

    @property
    def coef_ly(self) -> float:
        return 0.0 if self.ablate_ly else self.lambda2

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["hidden_dims"] = list(self.hidden_dims) if self.hidden_dims is not None else None
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        obj["dag_cfg"] = DagFitConfig(**obj.get("dag_cfg", {}))
        return cls(**obj)


@dataclass(frozen=True)
class LabelEncoding:
    """Class indices as one centred real column of ``Z``."""

    num_classes: int
    mean: float
    std: float

    @classmethod
    def fit(cls, labels: np.ndarray, num_classes: int) -> "LabelEncoding":
        y = np.asarray(labels, dtype=float)
        std = float(y.std())
        return cls(num_classes, float(y.mean()), std if std > 0 else 1.0)

    def column(self, labels: np.ndarray) -> np.ndarray:
        return ((np.asarray(labels, dtype=float) - self.mean) / self.std)[:, None]


@dataclass
class TrainState:
    ae: AutoencoderParams
    clf: ClassifierParams
    A_hat: np.ndarray
    feature_dims: list
    mb_dims: list
    fallback: bool = False
    z_scale: np.ndarray | None = None


@dataclass(frozen=True)
class PreparedData:
    X: np.ndarray  # encoder input
    target: np.ndarray  # reconstruction target in [0, 1]
    y: np.ndarray
    y_col: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class TrainedModel:
    ae: AutoencoderParams
    dag: ThresholdedDag
    mb_dims: tuple
    feature_dims: tuple
    clf: ClassifierParams
    scaler: ScalerParams
    recon_target: MinMaxTarget
    label_encoding: LabelEncoding
    config: TrainConfig
    history: tuple
    fallback: bool = False

    @property
    def k(self) -> int:
        return self.ae.k

    @property
    def d(self) -> int:
        return self.ae.d

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "autoencoder": self.ae.to_dict(),
            "dag": {"A_hat": self.dag.A_hat.tolist(), "sigma": self.dag.sigma,
                    "effective_sigma": self.dag.effective_sigma},
            "mb_dims": list(self.mb_dims),
            "feature_dims": list(self.feature_dims),
            "fallback": self.fallback,
            "classifier": self.clf.to_dict(),
            "scaler": {"means": self.scaler.means.tolist(), "stds": self.scaler.stds.tolist()},
            "recon_target": self.recon_target.to_dict(),
            "label_encoding": dataclasses.asdict(self.label_encoding),
            "config": self.config.to_dict(),
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainedModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError("not a CAE model file")
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        dag = obj["dag"]
        return cls(
            ae=AutoencoderParams.from_dict(obj["autoencoder"]),
            dag=ThresholdedDag(np.asarray(dag["A_hat"], dtype=float), dag["sigma"], dag["effective_sigma"]),
            mb_dims=tuple(obj["mb_dims"]),
            feature_dims=tuple(obj["feature_dims"]),
            clf=ClassifierParams.from_dict(obj["classifier"]),
            scaler=ScalerParams(obj["scaler"]["means"], obj["scaler"]["stds"]),
            recon_target=MinMaxTarget.from_dict(obj["recon_target"]),
            label_encoding=LabelEncoding(**obj["label_encoding"]),
            config=TrainConfig.from_dict(obj["config"]),
            history=tuple(obj["history"]),
            fallback=bool(obj["fallback"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# objective


def _centre(M: np.ndarray) -> np.ndarray:
    return M - M.mean(axis=0)


def _loss_parts(state: TrainState, data: PreparedData, cfg: TrainConfig, with_grads: bool):
    code, xhat = ae_mod.forward(state.ae, data.X)
    L_D = ae_mod.reconstruction_loss(data.target, xhat)
    Z = _centre(np.hstack([code, data.y_col]))
    if state.z_scale is not None:
        Z = Z / state.z_scale
    L_C, dZ = causal_structure_loss(Z, state.A_hat)
    if state.z_scale is not None:
        dZ = dZ / state.z_scale
    F = code[:, state.feature_dims]
    probs = clf_mod.predict_proba(state.clf, F)
    L_Y = clf_mod.cross_entropy(probs, data.y)
    L_R = ae_mod.regularization_loss(state.ae)
    comps = {"L_D": L_D, "L_C": L_C, "L_Y": L_Y, "L_R": L_R}
    L = L_D + cfg.coef_lc * L_C + cfg.coef_ly * L_Y + cfg.lambda3 * L_R
    if not with_grads:
        return L, comps, None
    k = state.ae.k
    # centring is linear, so its adjoint re-centres the upstream gradient
    g_code = cfg.coef_lc * _centre(dZ)[:, :k]
    gW, gb, gF = clf_mod.classifier_gradients(state.clf, F, data.y)
    if cfg.coef_ly:
        g_code[:, state.feature_dims] += cfg.coef_ly * gF
    g_out = ae_mod.reconstruction_grad(data.target, xhat)
    g_ae = ae_mod.network_gradients(state.ae, data.X, g_out, g_code).to_vector()
    g_ae += cfg.lambda3 * 2.0 * state.ae.to_vector()
    g_clf = cfg.coef_ly * np.concatenate([gW.ravel(), gb])
    return L, comps, (g_ae, g_clf)


def total_loss(state: TrainState, data: PreparedData, cfg: TrainConfig) -> tuple[float, dict]:
    """Weighted objective and its unweighted components.

    Ablated terms are still reported in the components but carry a zero
    coefficient in the total.
    """
    L, comps, _ = _loss_parts(state, data, cfg, with_grads=False)
    if not np.isfinite(L):
        raise TrainingError(f"non-finite objective: {comps}")
    return L, comps


# --------------------------------------------------------------------------
# phases


class _Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return theta - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def update_network(state: TrainState, data: PreparedData, cfg: TrainConfig) -> TrainState:
    """Adam on autoencoder (and classifier) parameters with the graph fixed.

    The iterate with the lowest full-batch objective seen during the phase is
    returned, so a phase never ends above its starting objective.
    """
    n_ae = state.ae.to_vector().size
    train_clf = cfg.coef_ly > 0
    theta = np.concatenate([state.ae.to_vector(), state.clf.to_vector()])
    opt = _Adam(theta.size, cfg.step_size)

    def unpack(v):
        return dataclasses.replace(state, ae=state.ae.from_vector(v[:n_ae]), clf=state.clf.from_vector(v[n_ae:]))

    best_L, best_theta = np.inf, theta
    for epoch in range(cfg.inner_epochs + 1):
        cur = unpack(theta)
        L, comps, grads = _loss_parts(cur, data, cfg, with_grads=epoch < cfg.inner_epochs)
        if not np.isfinite(L):
            raise TrainingError(f"objective diverged at epoch {epoch} ({comps}); reduce step_size")
        if L < best_L:
            best_L, best_theta = L, theta
        if grads is None:
            break
        g_ae, g_clf = grads
        if not train_clf:
            g_clf = np.zeros_like(g_clf)
        theta = opt.step(theta, np.concatenate([g_ae, g_clf]))
    return unpack(best_theta)


def _fit_head(clf: ClassifierParams, F: np.ndarray, y: np.ndarray, maxiter: int) -> ClassifierParams:
    """Refit the softmax head on frozen features (convex; L-BFGS)."""
    if maxiter == 0:
        return clf

    def fun(v):
        cp = clf.from_vector(v)
        gW, gb, _ = clf_mod.classifier_gradients(cp, F, y)
        return clf_mod.cross_entropy_logits(cp, F, y), np.concatenate([gW.ravel(), gb])

    res = optimize.minimize(fun, clf.to_vector(), jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    fitted = clf.from_vector(res.x)
    if clf_mod.cross_entropy_logits(fitted, F, y) <= clf_mod.cross_entropy_logits(clf, F, y):
        return fitted
    return clf


def _remap_classifier(clf: ClassifierParams, old_dims, new_dims) -> ClassifierParams:
    if list(old_dims) == list(new_dims):
        return clf
    W = np.zeros((len(new_dims), clf.C))
    pos = {d: i for i, d in enumerate(old_dims)}
    for r, d in enumerate(new_dims):
        if d in pos:
            W[r] = clf.W[pos[d]]
    return ClassifierParams(W, clf.b.copy())


def build_z(ae: AutoencoderParams, data: PreparedData) -> np.ndarray:
    return np.hstack([ae_mod.encode(ae, data.X), data.y_col])


def update_dag(state: TrainState, data: PreparedData, cfg: TrainConfig) -> tuple[TrainState, ThresholdedDag, float]:
    """Refit the graph on the current codes, threshold it and re-derive the blanket.

    Returns the new state, the thresholded graph and ``h`` of the raw fit.
    """
    k = state.ae.k
    Z = build_z(state.ae, data)
    z_scale = None
    if cfg.dag_standardize:
        z_scale = Z.std(axis=0)
        z_scale = np.where(z_scale > 0, z_scale, 1.0)
        Z = Z / z_scale
    A = fit_dag(Z, cfg.dag_cfg)
    td = threshold(A, cfg.sigma)
    mb_dims, _ = split_representations(td, k)
    fallback = False
    if cfg.classifier_dims == "all":
        feature_dims = list(range(k))
    elif mb_dims:
        feature_dims = list(mb_dims)
    else:
        warnings.warn("Markov blanket of the label is empty; classifier falls back to all code dims",
                      EmptyMarkovBlanketWarning)
        feature_dims, fallback = list(range(k)), True
    clf = _remap_classifier(state.clf, state.feature_dims, feature_dims)
    F = ae_mod.encode(state.ae, data.X)[:, feature_dims]
    clf = _fit_head(clf, F, data.y, cfg.head_iter)
    new_state = TrainState(state.ae, clf, np.array(td.A_hat), feature_dims, list(mb_dims), fallback, z_scale)
    return new_state, td, acyclicity_h(A)


# --------------------------------------------------------------------------
# training / inference


def prepare(ds: Dataset, scaler: ScalerParams, recon: MinMaxTarget, enc: LabelEncoding) -> PreparedData:
    X = scaler.transform(ds.features)
    return PreparedData(X, recon.transform(X), ds.labels, enc.column(ds.labels))


def train(ds: Dataset, cfg: TrainConfig | None = None) -> TrainedModel:
    cfg = cfg or TrainConfig()
    if cfg.k >= ds.d:
        raise ValueError(f"code dim k={cfg.k} must be smaller than the feature count d={ds.d}")
    scaler = fit_scaler(ds.features) if cfg.standardize else ScalerParams.identity(ds.d)
    recon = MinMaxTarget.fit(scaler.transform(ds.features))
    enc = LabelEncoding.fit(ds.labels, ds.num_classes)
    data = prepare(ds, scaler, recon, enc)

    k = cfg.k
    ae = ae_mod.init_params(ds.d, k, cfg.l, cfg.hidden_dims, seed=cfg.seed)
    # the identity graph makes the structure loss vanish in the first phase
    state = TrainState(ae, ClassifierParams.zeros(k, ds.num_classes), np.eye(k + 1), list(range(k)), list(range(k)))
    td = None
    history = []
    L_prev = None
    for t in range(1, cfg.max_outer + 1):
        L_before, _ = total_loss(state, data, cfg)
        state = update_network(state, data, cfg)
        L_after, _ = total_loss(state, data, cfg)
        state, td, h_raw = update_dag(state, data, cfg)
        L, comps = total_loss(state, data, cfg)
        acc = clf_mod.accuracy(_predict_state(state, data.X)[0], data.y)
        rec = {
            "iteration": t,
            "L": L,
            **comps,
            "h": h_raw,
            "h_hat": acyclicity_h(td.A_hat),
            "n_mb": len(state.mb_dims),
            "n_edges": int(np.count_nonzero(td.A_hat)),
            "fallback": state.fallback,
            "phase_L_before": L_before,
            "phase_L_after": L_after,
            "train_accuracy": acc,
        }
        history.append(rec)
        logger.info("outer %d: L=%.6g L_D=%.4g L_C=%.4g L_Y=%.4g |MB|=%d acc=%.3f",
                    t, L, comps["L_D"], comps["L_C"], comps["L_Y"], len(state.mb_dims), acc)
        if L_prev is not None and abs(L - L_prev) < cfg.conv_tol:
            break
        L_prev = L

    return TrainedModel(
        ae=state.ae, dag=td, mb_dims=tuple(state.mb_dims), feature_dims=tuple(state.feature_dims),
        clf=state.clf, scaler=scaler, recon_target=recon, label_encoding=enc, config=cfg,
        history=tuple(history), fallback=state.fallback,
    )


def _predict_state(state: TrainState, X: np.ndarray):
    F = ae_mod.encode(state.ae, X)[:, state.feature_dims]
    probs = clf_mod.predict_proba(state.clf, F)
    return clf_mod.predict_labels(probs), probs


def _check_dim(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(f"model expects {model.d} features, got shape {X.shape}")
    return X


def transform(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Full code ``xi`` (n x k) for raw feature rows."""
    return ae_mod.encode(model.ae, model.scaler.transform(_check_dim(model, X)))


def predict(model: TrainedModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    code = transform(model, X)
    probs = clf_mod.predict_proba(model.clf, code[:, list(model.feature_dims)])
    return clf_mod.predict_labels(probs), probs


def evaluate(model: TrainedModel, ds: Dataset) -> dict:
    pred, _ = predict(model, ds.features)
    C = max(ds.num_classes, model.clf.C)
    per_class = []
    for c in range(C):
        support = int(np.sum(ds.labels == c))
        predicted = int(np.sum(pred == c))
        correct = int(np.sum((pred == c) & (ds.labels == c)))
        per_class.append({
            "class": c,
            "support": support,
            "predicted": predicted,
            "correct": correct,
            "precision": correct / predicted if predicted else None,
            "recall": correct / support if support else None,
        })
    return {
        "n": ds.n,
        "num_classes": C,
        "accuracy": clf_mod.accuracy(pred, ds.labels),
        "per_class": per_class,
    }


def history_csv(model: TrainedModel) -> str:
    if not model.history:
        return ""
    keys = list(model.history[0])
    lines = [",".join(keys)]
    for rec in model.history:
        lines.append(",".join(repr(rec[key]) if isinstance(rec[key], float) else str(rec[key]) for key in keys))
    return "\n".join(lines) + "\n"
