"""Linear-Gaussian structural equation models for ground-truth experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .graph import DagGraph, has_cycle, markov_blanket, support_edges


@dataclass(frozen=True)
class GroundTruthSem:
    """``weights[i, j] != 0`` is the edge ``i -> j`` with that coefficient."""

    weights: np.ndarray
    noise_std: np.ndarray
    target: int
    seed: int = 0

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weights must be square")
        p = W.shape[0]
        if np.any(np.diag(W) != 0):
            raise ValueError("weights must have a zero diagonal")
        if has_cycle(support_edges(W), p):
            raise ValueError("weights support is cyclic")
        noise = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (p,)).copy()
        if np.any(noise <= 0):
            raise ValueError("noise_std entries must be > 0")
        if not 0 <= self.target < p:
            raise ValueError(f"target {self.target} out of range [0, {p})")
        W.setflags(write=False)
        noise.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "noise_std", noise)

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    def topological_order(self) -> list[int]:
        W = self.weights != 0
        indeg = W.sum(axis=0).astype(int)
        order, ready = [], sorted(np.flatnonzero(indeg == 0).tolist())
        while ready:
            i = ready.pop(0)
            order.append(i)
            for j in np.flatnonzero(W[i]):
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(int(j))
            ready.sort()
        return order

    def with_target(self, target: int) -> "GroundTruthSem":
        return GroundTruthSem(self.weights, self.noise_std, target, self.seed)


def random_dag(
    p: int,
    edge_prob: float,
    weight_low: float = 0.5,
    weight_high: float = 2.0,
    seed: int = 0,
    noise_std: float = 1.0,
) -> GroundTruthSem:
    if p < 2:
        raise ValueError("p must be >= 2")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge_prob must be in [0, 1], got {edge_prob}")
    if not 0 < weight_low <= weight_high:
        raise ValueError("need 0 < weight_low <= weight_high")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    W = np.zeros((p, p))
    for a in range(p):
        for b in range(a + 1, p):
            if rng.random() < edge_prob:
                mag = rng.uniform(weight_low, weight_high)
                sign = 1.0 if rng.random() < 0.5 else -1.0
                W[order[a], order[b]] = sign * mag
    has_parent = np.flatnonzero((W != 0).any(axis=0))
    candidates = has_parent if has_parent.size else np.arange(p)
    target = int(rng.choice(candidates))
    return GroundTruthSem(W, np.full(p, float(noise_std)), target, seed)


def sample_sem(sem: GroundTruthSem, n: int, seed: int = 0) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, sem.p)) * sem.noise_std
    X = np.zeros((n, sem.p))
    for i in sem.topological_order():
        X[:, i] = X @ sem.weights[:, i] + noise[:, i]
    return X


def true_markov_blanket(sem: GroundTruthSem) -> set[int]:
    g = DagGraph(sem.p, frozenset(support_edges(sem.weights)), sem.target)
    return set(markov_blanket(g).all)


def shift_domain(sem: GroundTruthSem, data: np.ndarray, shift_nodes, shift: float) -> np.ndarray:
    """Add a constant mean shift to the listed columns."""
    nodes = sorted(set(shift_nodes))
    if sem.target in nodes:
        raise ValueError("shift_nodes must not contain the target node")
    out = np.array(data, dtype=float)
    for i in nodes:
        out[:, i] += shift
    return out


def sem_to_dataset(sem: GroundTruthSem, data: np.ndarray, threshold_quantile: float = 0.5, cut: float | None = None) -> Dataset:
    """Binarise the target column at a sample quantile; other columns become features.

    ``cut`` overrides the quantile so that a shifted target domain can reuse
    the source cut point.
    """
    if not 0.0 < threshold_quantile < 1.0:
        raise ValueError("threshold_quantile must be in (0, 1)")
    data = np.asarray(data, dtype=float)
    y_raw = data[:, sem.target]
    if np.ptp(y_raw) == 0:
        raise ValueError("target column is constant; cannot binarise")
    if cut is None:
        cut = float(np.quantile(y_raw, threshold_quantile))
    labels = (y_raw >= cut).astype(int)
    features = np.delete(data, sem.target, axis=1)
    names = [f"x{i}" for i in range(sem.p) if i != sem.target]
    return Dataset(features, labels, 2, names)


def feature_column(sem: GroundTruthSem, node: int) -> int:
    """Column index of SEM node ``node`` once the target column is dropped."""
    if node == sem.target:
        raise ValueError("the target is not a feature column")
    return node if node < sem.target else node - 1


def sem_to_edge_list(sem: GroundTruthSem) -> str:
    rows, cols = np.nonzero(sem.weights)
    return "".join(f"{i} {j} {float(sem.weights[i, j])!r}\n" for i, j in zip(rows, cols))


def sem_from_edge_list(text: str, p: int, target: int, noise_std: float = 1.0) -> GroundTruthSem:
    from .dag import read_edge_list

    return GroundTruthSem(read_edge_list(text, p), np.full(p, float(noise_std)), target)


# Node layout of the fixed-blanket fixture. The label node has two parents,
# two children and one co-parent; the remaining six nodes sit outside its
# Markov blanket.
FIXTURE_NODES = {
    "target": 0, "parents": (1, 2), "children": (3, 4), "spouse": 5,
    "grandparent": 6, "grandchildren": (7, 8), "spouse_child": 9, "isolated": (10, 11),
}
FIXTURE_SHIFT_NODES = (6, 7, 8)


def blanket_fixture(seed: int = 0, weight_low: float = 0.5, weight_high: float = 2.0) -> GroundTruthSem:
    """12-node SEM with a known Markov blanket around node 0 and random edge weights."""
    f = FIXTURE_NODES
    (p1, p2), (c1, c2) = f["parents"], f["children"]
    (g1, g2) = f["grandchildren"]
    edges = [
        (p1, 0), (p2, 0), (0, c1), (0, c2), (f["spouse"], c1),
        (f["grandparent"], p1), (c1, g1), (c2, g2), (f["spouse"], f["spouse_child"]),
    ]
    rng = np.random.default_rng(seed)
    W = np.zeros((12, 12))
    for i, j in edges:
        W[i, j] = rng.choice([-1.0, 1.0]) * rng.uniform(weight_low, weight_high)
    return GroundTruthSem(W, np.ones(12), f["target"], seed)
