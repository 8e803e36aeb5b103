"""Continuous DAG learning with a smooth trace-polynomial acyclicity constraint.

The score is plain least squares ``||Z - Z A||^2`` and acyclicity is
enforced with an augmented Lagrangian on

    h(A) = tr[(I + A*A / p)^p] - p

which vanishes exactly when the support of ``A`` has no directed cycle.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .graph import has_cycle, support_edges

logger = logging.getLogger(__name__)


class DagFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class DagFitConfig:
    rho_init: float = 1.0
    alpha_init: float = 0.0
    rho_max: float = 1e16
    h_tol: float = 1e-8
    max_outer: int = 100
    inner_iter: int = 500
    inner_solver: str = "lbfgs"
    step_init: float = 1.0
    l2_on_A: float = 0.0

    def __post_init__(self):
        if self.rho_init <= 0 or self.rho_max <= 0 or self.h_tol <= 0:
            raise ValueError("rho_init, rho_max and h_tol must be positive")
        if self.max_outer < 1 or self.inner_iter < 1:
            raise ValueError("max_outer and inner_iter must be >= 1")
        if self.inner_solver not in ("lbfgs", "gd"):
            raise ValueError(f"inner_solver must be 'lbfgs' or 'gd', got {self.inner_solver!r}")
        if self.step_init <= 0:
            raise ValueError("step_init must be positive")
        if self.l2_on_A < 0:
            raise ValueError("l2_on_A must be >= 0")


@dataclass(frozen=True)
class ThresholdedDag:
    A_hat: np.ndarray
    sigma: float
    effective_sigma: float | None = None

    def __post_init__(self):
        A = np.array(self.A_hat, dtype=float)
        A.setflags(write=False)
        object.__setattr__(self, "A_hat", A)
        if self.effective_sigma is None:
            object.__setattr__(self, "effective_sigma", float(self.sigma))

    @property
    def p(self) -> int:
        return self.A_hat.shape[0]

    def edges(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.A_hat)
        return [(int(i), int(j), float(self.A_hat[i, j])) for i, j in zip(rows, cols)]


def _check_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency matrix must be square, got shape {A.shape}")
    return A


def _power_base(A: np.ndarray) -> np.ndarray:
    p = A.shape[0]
    return np.eye(p) + (A * A) / p


def acyclicity_h(A: np.ndarray) -> float:
    A = _check_square(A)
    p = A.shape[0]
    M = np.linalg.matrix_power(_power_base(A), p)
    return float(np.trace(M) - p)


def acyclicity_grad(A: np.ndarray) -> np.ndarray:
    A = _check_square(A)
    p = A.shape[0]
    M = np.linalg.matrix_power(_power_base(A), p - 1)
    return M.T * (2.0 * A)


def _h_and_grad(A: np.ndarray) -> tuple[float, np.ndarray]:
    p = A.shape[0]
    base = _power_base(A)
    M = np.linalg.matrix_power(base, p - 1)
    h = float(np.sum(M * base.T) - p)  # tr(M @ base)
    return h, M.T * (2.0 * A)


def ls_loss(Z: np.ndarray, A: np.ndarray) -> float:
    Z = np.asarray(Z, dtype=float)
    A = _check_square(A)
    if Z.shape[1] != A.shape[0]:
        raise ValueError(f"Z has {Z.shape[1]} columns but A is {A.shape[0]}x{A.shape[0]}")
    R = Z - Z @ A
    return float(np.sum(R * R))


def ls_grad(Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    A = _check_square(A)
    return -2.0 * Z.T @ (Z - Z @ A)


def causal_structure_loss(Z: np.ndarray, A_hat) -> tuple[float, np.ndarray]:
    """Return ``||Z - Z A_hat||^2`` and its gradient with respect to ``Z``."""
    Z = np.asarray(Z, dtype=float)
    A = _check_square(getattr(A_hat, "A_hat", A_hat))
    if Z.shape[1] != A.shape[0]:
        raise ValueError(f"Z has {Z.shape[1]} columns but A is {A.shape[0]}x{A.shape[0]}")
    R = Z - Z @ A
    grad = 2.0 * R @ (np.eye(A.shape[0]) - A).T
    return float(np.sum(R * R)), grad


class _AugmentedLagrangian:
    """Objective of one inner subproblem, evaluated through the Gram matrix."""

    def __init__(self, G: np.ndarray, alpha: float, rho: float, l2: float):
        self.G = G
        self.trG = float(np.trace(G))
        self.alpha = alpha
        self.rho = rho
        self.l2 = l2

    def value(self, A: np.ndarray) -> tuple[float, float]:
        GA = self.G @ A
        ls = self.trG - 2.0 * float(np.trace(GA)) + float(np.sum(A * GA))
        h = acyclicity_h(A)
        f = ls + self.alpha * h + 0.5 * self.rho * h * h + self.l2 * float(np.sum(A * A))
        return f, h

    def value_grad(self, A: np.ndarray) -> tuple[float, float, np.ndarray]:
        GA = self.G @ A
        ls = self.trG - 2.0 * float(np.trace(GA)) + float(np.sum(A * GA))
        h, gh = _h_and_grad(A)
        f = ls + self.alpha * h + 0.5 * self.rho * h * h + self.l2 * float(np.sum(A * A))
        g = 2.0 * (GA - self.G) + (self.alpha + self.rho * h) * gh + 2.0 * self.l2 * A
        np.fill_diagonal(g, 0.0)
        return f, h, g


def _inner_solve(obj: _AugmentedLagrangian, A: np.ndarray, cfg: DagFitConfig, step: float):
    """Projected gradient descent with Armijo backtracking; returns (A, step)."""
    f, h, g = obj.value_grad(A)
    for it in range(cfg.inner_iter):
        gnorm2 = float(np.sum(g * g))
        if gnorm2 == 0.0:
            break
        step = min(step * 2.0, 1e12)
        while True:
            A_new = A - step * g
            np.fill_diagonal(A_new, 0.0)
            f_new, _ = obj.value(A_new)
            if np.isfinite(f_new) and f_new <= f - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-300:
                return A, step
        if not np.isfinite(f_new):
            raise DagFitError(f"non-finite objective in inner iteration {it}; try a smaller step_init")
        rel = (f - f_new) / max(abs(f), 1e-300)
        A = A_new
        f, h, g = obj.value_grad(A)
        if rel < 1e-12:
            break
    return A, step


def _inner_solve_lbfgs(obj: _AugmentedLagrangian, A: np.ndarray, cfg: DagFitConfig) -> np.ndarray:
    """Bound-constrained L-BFGS with the diagonal pinned to zero."""
    p = A.shape[0]
    diag = np.eye(p, dtype=bool).ravel()
    bounds = [(0.0, 0.0) if on_diag else (None, None) for on_diag in diag]

    def fun(a):
        f, _, g = obj.value_grad(a.reshape(p, p))
        if not np.isfinite(f):
            raise DagFitError("non-finite objective in inner solve; try a smaller step_init")
        return f, g.ravel()

    res = optimize.minimize(
        fun, A.ravel(), jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": cfg.inner_iter},
    )
    A = res.x.reshape(p, p)
    np.fill_diagonal(A, 0.0)
    return A


def fit_dag(Z: np.ndarray, cfg: DagFitConfig | None = None, A_init: np.ndarray | None = None) -> np.ndarray:
    """Fit a weighted adjacency matrix to the columns of ``Z``.

    Columns are centred internally. The outer loop multiplies the penalty by
    10 whenever ``|h|`` failed to drop below a quarter of its previous value
    and performs a dual ascent step on the multiplier.

    Returns the last outer iterate (unthresholded), with zero diagonal.
    """
    cfg = cfg or DagFitConfig()
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("Z must be a 2-D matrix")
    if not np.all(np.isfinite(Z)):
        raise DagFitError("Z contains non-finite values")
    n, p = Z.shape
    if n < p:
        warnings.warn(f"fit_dag: n={n} samples < p={p} variables; solution is underdetermined")
    Zc = Z - Z.mean(axis=0)
    G = Zc.T @ Zc

    A = np.zeros((p, p)) if A_init is None else np.array(A_init, dtype=float)
    np.fill_diagonal(A, 0.0)
    rho, alpha = cfg.rho_init, cfg.alpha_init
    h_prev = acyclicity_h(A)
    step = cfg.step_init / max(float(np.trace(G)), 1e-12)
    for t in range(cfg.max_outer):
        obj = _AugmentedLagrangian(G, alpha, rho, cfg.l2_on_A)
        if cfg.inner_solver == "lbfgs":
            A = _inner_solve_lbfgs(obj, A, cfg)
        else:
            A, step = _inner_solve(obj, A, cfg, step)
        h_new = acyclicity_h(A)
        if not np.isfinite(h_new):
            raise DagFitError(f"non-finite acyclicity value at outer iteration {t}")
        logger.debug("fit_dag outer %d: rho=%.3g alpha=%.3g h=%.3e", t, rho, alpha, h_new)
        alpha += rho * h_new
        if abs(h_new) >= 0.25 * abs(h_prev):
            rho *= 10.0
        h_prev = h_new
        if h_new <= cfg.h_tol or rho > cfg.rho_max:
            break
    return A


def threshold(A: np.ndarray, sigma: float) -> ThresholdedDag:
    """Zero entries with ``|A[i, j]| < sigma``; break any leftover cycle.

    If the pruned support still has a directed cycle, the weakest remaining
    edge is dropped until it is acyclic and the effective threshold becomes
    the largest magnitude removed.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    A = np.array(_check_square(A))
    np.fill_diagonal(A, 0.0)
    A[np.abs(A) < sigma] = 0.0
    effective = float(sigma)
    p = A.shape[0]
    while has_cycle(support_edges(A), p):
        mag = np.where(A != 0, np.abs(A), np.inf)
        i, j = np.unravel_index(np.argmin(mag), A.shape)
        effective = max(effective, float(np.nextafter(abs(A[i, j]), np.inf)))
        A[i, j] = 0.0
    return ThresholdedDag(A_hat=A, sigma=float(sigma), effective_sigma=effective)


def shd(A_est: np.ndarray, A_true: np.ndarray) -> int:
    """Structural Hamming distance; a reversed edge counts once."""
    est = support_edges(np.asarray(A_est))
    true = support_edges(np.asarray(A_true))
    reversed_ = {(i, j) for i, j in est - true if (j, i) in true}
    extra = est - true - reversed_
    missing = {(i, j) for i, j in true - est if (j, i) not in est}
    return len(extra) + len(missing) + len(reversed_)


def edge_list_text(A: np.ndarray) -> str:
    rows, cols = np.nonzero(np.asarray(A))
    return "".join(f"{i} {j} {float(np.asarray(A)[i, j])!r}\n" for i, j in zip(rows, cols))


def read_edge_list(text: str, p: int) -> np.ndarray:
    A = np.zeros((p, p))
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j weight', got {line!r}")
        A[int(parts[0]), int(parts[1])] = float(parts[2])
    return A


def graph_text(td: ThresholdedDag, label_index: int) -> str:
    """Plain graph description; the label node is written as ``Y``."""

    def name(i: int) -> str:
        return "Y" if i == label_index else f"Z{i}"

    lines = [f"digraph cae {{"]
    lines += [f"  {name(i)};" for i in range(td.p)]
    lines += [f"  {name(i)} -> {name(j)} [weight={w!r}];" for i, j, w in td.edges()]
    lines.append("}")
    return "\n".join(lines) + "\n"
