"""Directed-graph queries over a thresholded adjacency matrix.

Edges follow the row -> column convention: a nonzero ``A[i, j]`` is the
edge ``i -> j``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


def has_cycle(edges: Iterable[tuple[int, int]], p: int) -> bool:
    """Iterative three-colour depth-first search for a directed cycle."""
    adj: list[list[int]] = [[] for _ in range(p)]
    for i, j in edges:
        adj[i].append(j)
    WHITE, GREY, BLACK = 0, 1, 2
    colour = [WHITE] * p
    for root in range(p):
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(adj[root]))]
        colour[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = BLACK
                stack.pop()
            elif colour[nxt] == GREY:
                return True
            elif colour[nxt] == WHITE:
                colour[nxt] = GREY
                stack.append((nxt, iter(adj[nxt])))
    return False


def support_edges(A: np.ndarray) -> set[tuple[int, int]]:
    rows, cols = np.nonzero(A)
    return {(int(i), int(j)) for i, j in zip(rows, cols)}


def is_dag(A: np.ndarray) -> bool:
    A = np.asarray(A)
    return not has_cycle(support_edges(A), A.shape[0])


@dataclass(frozen=True)
class DagGraph:
    p: int
    edges: frozenset
    label_node: int

    def __post_init__(self):
        if not 0 <= self.label_node < self.p:
            raise ValueError(f"label node {self.label_node} out of range for p={self.p}")
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"edge ({i}, {j}) out of range for p={self.p}")
        if has_cycle(self.edges, self.p):
            raise ValueError("graph contains a directed cycle")

    def parents(self, node: int) -> set[int]:
        return {i for i, j in self.edges if j == node}

    def children(self, node: int) -> set[int]:
        return {j for i, j in self.edges if i == node}


@dataclass(frozen=True)
class MarkovBlanket:
    parents: frozenset = field(default_factory=frozenset)
    children: frozenset = field(default_factory=frozenset)
    spouses: frozenset = field(default_factory=frozenset)

    @property
    def all(self) -> frozenset:
        return self.parents | self.children | self.spouses

    def to_dict(self) -> dict:
        return {
            "parents": sorted(self.parents),
            "children": sorted(self.children),
            "spouses": sorted(self.spouses),
            "all": sorted(self.all),
        }


def from_thresholded(td, label_index: int) -> DagGraph:
    """Build a graph from a ``ThresholdedDag`` (or a bare adjacency matrix)."""
    A = np.asarray(getattr(td, "A_hat", td))
    return DagGraph(p=A.shape[0], edges=frozenset(support_edges(A)), label_node=label_index)


def markov_blanket(g: DagGraph, node: int | None = None) -> MarkovBlanket:
    """Parents, children and co-parents of ``node`` (the label node by default)."""
    t = g.label_node if node is None else node
    parents = g.parents(t)
    children = g.children(t)
    spouses = {i for i, j in g.edges if j in children and i != t}
    return MarkovBlanket(
        parents=frozenset(parents - {t}),
        children=frozenset(children - {t}),
        spouses=frozenset(spouses),
    )


def split_representations(td, k: int) -> tuple[list[int], list[int]]:
    """Partition code dimensions ``0..k-1`` into Markov-blanket and the rest."""
    mb = markov_blanket(from_thresholded(td, k)).all
    mb_dims = sorted(i for i in mb if i < k)
    irrelevant = [i for i in range(k) if i not in mb]
    return mb_dims, irrelevant


def mb_report(td, label_index: int, names: list[str] | None = None) -> dict:
    """JSON-ready Markov-blanket report; ``names`` maps indices to labels."""
    mb = markov_blanket(from_thresholded(td, label_index))
    report = mb.to_dict()
    report["label_node"] = label_index
    report["threshold"] = float(getattr(td, "sigma", float("nan")))
    report["empty"] = not mb.all
    if names is not None:
        report["names"] = {str(i): names[i] for i in report["all"]}
    return report


def mb_report_json(td, label_index: int) -> str:
    return json.dumps(mb_report(td, label_index), indent=2, sort_keys=True) + "\n"
