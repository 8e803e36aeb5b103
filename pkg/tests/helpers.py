"""Oracles shared by the unit and acceptance tests."""
from __future__ import annotations

import itertools

import numpy as np

from cae.synth import FIXTURE_SHIFT_NODES, blanket_fixture, sample_sem, sem_to_dataset, shift_domain


def central_diff(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        fp = f(x)
        x[idx] = old - eps
        fm = f(x)
        x[idx] = old
        g[idx] = (fp - fm) / (2 * eps)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Largest relative error over entries whose analytic magnitude exceeds ``floor``.

    Entries below the floor must agree in absolute terms instead.
    """
    a, b = np.ravel(analytic), np.ravel(numeric)
    big = np.abs(a) > floor
    rel = np.abs(a[big] - b[big]) / np.abs(a[big]) if big.any() else np.zeros(1)
    small = np.abs(a[~big] - b[~big]) if (~big).any() else np.zeros(1)
    return float(max(rel.max(), small.max() / 1e-3))


# --- graph oracles ---------------------------------------------------------


def cyclic_by_powers(B: np.ndarray) -> bool:
    """A binary adjacency has a cycle iff some power up to p has a nonzero trace."""
    B = (np.asarray(B) != 0).astype(np.int64)
    p = B.shape[0]
    M = np.eye(p, dtype=np.int64)
    for _ in range(p):
        M = np.minimum(M @ B, 1)
        if np.trace(M) > 0:
            return True
    return False


def moral_neighbours(edges, p: int) -> list[set[int]]:
    """Adjacency of the moral graph: drop directions and marry co-parents."""
    nb = [set() for _ in range(p)]
    parents = [set() for _ in range(p)]
    for i, j in edges:
        nb[i].add(j)
        nb[j].add(i)
        parents[j].add(i)
    for ps in parents:
        for a, b in itertools.combinations(sorted(ps), 2):
            nb[a].add(b)
            nb[b].add(a)
    return nb


def _ancestors(edges, nodes: set[int]) -> set[int]:
    parents: dict[int, list[int]] = {}
    for i, j in edges:
        parents.setdefault(j, []).append(i)
    out, stack = set(nodes), list(nodes)
    while stack:
        for i in parents.get(stack.pop(), ()):
            if i not in out:
                out.add(i)
                stack.append(i)
    return out


def d_separated(edges, p: int, x: set[int], y: set[int], given: set[int]) -> bool:
    """d-separation via the moralised ancestral graph."""
    keep = _ancestors(edges, x | y | given)
    sub = [(i, j) for i, j in edges if i in keep and j in keep]
    nb = moral_neighbours(sub, p)
    seen, stack = set(x), list(x)
    while stack:
        u = stack.pop()
        for v in nb[u]:
            if v in keep and v not in given and v not in seen:
                if v in y:
                    return False
                seen.add(v)
                stack.append(v)
    return True


def markov_boundary_by_search(edges, p: int, t: int) -> set[int]:
    """Smallest set S with T independent of every other node given S (definition)."""
    others = [v for v in range(p) if v != t]
    for size in range(len(others) + 1):
        for S in itertools.combinations(others, size):
            rest = set(others) - set(S)
            if not rest or d_separated(edges, p, {t}, rest, set(S)):
                return set(S)
    raise AssertionError("unreachable")


def all_dags(p: int):
    """Every labelled DAG on ``p`` nodes, as edge lists."""
    pairs = list(itertools.combinations(range(p), 2))
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), c in zip(pairs, choice):
            if c == 1:
                edges.append((a, b))
            elif c == 2:
                edges.append((b, a))
        B = np.zeros((p, p), dtype=np.int64)
        for i, j in edges:
            B[i, j] = 1
        if not cyclic_by_powers(B):
            yield edges


def random_dag_edges(p: int, prob: float, rng) -> list[tuple[int, int]]:
    order = rng.permutation(p)
    return [(int(order[a]), int(order[b])) for a in range(p) for b in range(a + 1, p) if rng.random() < prob]


# --- robust domain-adaptation fixture ----------------------------------------


def robust_da_fixture(seed: int, n: int = 1000, shift: float = 3.0, shift_nodes=FIXTURE_SHIFT_NODES):
    """Source-train, source-test and shifted-target datasets from the blanket fixture.

    Both test sets come from the same fresh sample; the target copy has a
    constant added to non-blanket feature columns. Labels use the source cut.
    """
    sem = blanket_fixture(seed)
    src = sample_sem(sem, n, seed=1000 + seed)
    tst = sample_sem(sem, n, seed=2000 + seed)
    cut = float(np.quantile(src[:, sem.target], 0.5))
    return (
        sem_to_dataset(sem, src, cut=cut),
        sem_to_dataset(sem, tst, cut=cut),
        sem_to_dataset(sem, shift_domain(sem, tst, shift_nodes, shift), cut=cut),
    )


def blanket_by_pairwise_dsep(edges, p: int, t: int) -> set[int]:
    """X is in the blanket iff T and X stay d-connected given every other node.

    Conditioning on everything makes the ancestral set the whole graph, so
    one moral graph serves every pair.
    """
    nb = moral_neighbours(edges, p)
    out = set()
    for x in range(p):
        if x == t:
            continue
        given = set(range(p)) - {t, x}
        seen, stack = {t}, [t]
        while stack:
            u = stack.pop()
            for v in nb[u]:
                if v == x:
                    out.add(x)
                    stack = []
                    break
                if v not in given and v not in seen:
                    seen.add(v)
                    stack.append(v)
    return out
