"""Linear softmax classifier with cross-entropy loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassifierParams:
    W: np.ndarray  # m x C
    b: np.ndarray  # C

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if W.ndim != 2 or b.shape != (W.shape[1],):
            raise ValueError(f"classifier shapes W{W.shape}, b{b.shape} do not match")
        if W.shape[0] < 1 or W.shape[1] < 2:
            raise ValueError("classifier needs m >= 1 inputs and C >= 2 classes")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("classifier parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @classmethod
    def zeros(cls, m: int, C: int) -> "ClassifierParams":
        return cls(np.zeros((m, C)), np.zeros(C))

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def C(self) -> int:
        return self.W.shape[1]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    def from_vector(self, v: np.ndarray) -> "ClassifierParams":
        nw = self.W.size
        return ClassifierParams(v[:nw].reshape(self.W.shape).copy(), v[nw:].copy())

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "ClassifierParams":
        b = np.asarray(obj["b"], dtype=float)
        return cls(np.asarray(obj["W"], dtype=float).reshape(-1, b.size), b)


def _check(cp: ClassifierParams, F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] != cp.m:
        raise ValueError(f"classifier expects {cp.m} features, got shape {F.shape}")
    return F


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def predict_proba(cp: ClassifierParams, F: np.ndarray) -> np.ndarray:
    F = _check(cp, F)
    return softmax(F @ cp.W + cp.b)


def predict_labels(probs: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the smaller index
    return np.argmax(probs, axis=1)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ValueError(f"shape mismatch: probs {probs.shape}, labels {labels.shape}")
    picked = probs[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def cross_entropy_logits(cp: ClassifierParams, F: np.ndarray, labels: np.ndarray) -> float:
    """Unclamped mean cross-entropy computed from logits via log-sum-exp."""
    F = _check(cp, F)
    logp = log_softmax(F @ cp.W + cp.b)
    return float(-np.mean(logp[np.arange(F.shape[0]), labels]))


def classifier_gradients(cp: ClassifierParams, F: np.ndarray, labels: np.ndarray):
    """Return ``(grad_W, grad_b, grad_F)`` of the mean cross-entropy."""
    F = _check(cp, F)
    labels = np.asarray(labels)
    if labels.shape != (F.shape[0],):
        raise ValueError(f"labels must have shape ({F.shape[0]},), got {labels.shape}")
    n = F.shape[0]
    G = predict_proba(cp, F)
    G[np.arange(n), labels] -= 1.0
    G /= n
    return F.T @ G, G.sum(axis=0), G @ cp.W.T


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted, labels = np.asarray(predicted), np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {labels.shape}")
    if predicted.size == 0:
        raise ValueError("accuracy of an empty vector is undefined")
    return float(np.mean(predicted == labels))
