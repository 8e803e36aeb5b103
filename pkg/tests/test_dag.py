import numpy as np
import pytest

from cae.dag import (
    DagFitConfig, ThresholdedDag, acyclicity_grad, acyclicity_h, causal_structure_loss, edge_list_text,
    fit_dag, graph_text, ls_grad, ls_loss, read_edge_list, shd, threshold,
)
from cae.graph import is_dag
from cae.synth import random_dag, sample_sem

from helpers import central_diff, max_rel_err


def test_h_zero_matrix():
    assert acyclicity_h(np.zeros((3, 3))) == 0.0


def test_h_single_edge():
    A = np.zeros((2, 2))
    A[0, 1] = 1.0
    assert acyclicity_h(A) == pytest.approx(0.0, abs=1e-12)


def test_h_two_cycle():
    # (I + B/2)^2 with B the swap matrix has trace 2.5
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert acyclicity_h(A) == pytest.approx(0.5, abs=1e-12)


def test_grad_two_cycle():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(acyclicity_grad(A), [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


def test_h_is_sign_invariant():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 4))
    assert acyclicity_h(A) == pytest.approx(acyclicity_h(-A))


def test_h_rejects_non_square():
    with pytest.raises(ValueError):
        acyclicity_h(np.zeros((2, 3)))


@pytest.mark.parametrize("seed", range(3))
def test_h_grad_matches_finite_differences(seed):
    A = np.random.default_rng(seed).normal(scale=0.7, size=(5, 5))
    num = central_diff(acyclicity_h, A)
    assert max_rel_err(acyclicity_grad(A), num) < 1e-5


def test_ls_grad_matches_finite_differences():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(20, 4))
    A = rng.normal(size=(4, 4))
    num = central_diff(lambda a: ls_loss(Z, a), A)
    assert max_rel_err(ls_grad(Z, A), num) < 1e-5


def test_causal_structure_loss_grad():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(8, 4))
    A = np.array(threshold(rng.normal(size=(4, 4)), 0.3).A_hat)
    num = central_diff(lambda z: causal_structure_loss(z, A)[0], Z)
    assert max_rel_err(causal_structure_loss(Z, A)[1], num) < 1e-5


def test_causal_structure_loss_identity_is_zero():
    Z = np.random.default_rng(0).normal(size=(5, 3))
    loss, grad = causal_structure_loss(Z, np.eye(3))
    assert loss == 0.0
    assert not grad.any()


def test_threshold_prunes_and_zeroes_diagonal():
    A = np.array([[5.0, 0.2, 0.8], [0.0, 0.0, -0.31], [0.0, 0.0, 0.0]])
    td = threshold(A, 0.3)
    np.testing.assert_array_equal(td.A_hat, [[0, 0, 0.8], [0, 0, -0.31], [0, 0, 0]])
    assert td.effective_sigma == 0.3


def test_threshold_boundary_is_kept():
    A = np.zeros((2, 2))
    A[0, 1] = 0.3
    assert threshold(A, 0.3).A_hat[0, 1] == 0.3


def test_threshold_breaks_surviving_cycle():
    A = np.array([[0.0, 2.0, 0.0], [0.0, 0.0, 1.5], [0.9, 0.0, 0.0]])
    td = threshold(A, 0.3)
    assert is_dag(td.A_hat)
    assert td.A_hat[2, 0] == 0.0
    assert td.effective_sigma > 0.9


def test_threshold_output_is_read_only():
    td = threshold(np.zeros((2, 2)), 0.3)
    with pytest.raises(ValueError):
        td.A_hat[0, 1] = 1.0


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_threshold_rejects_nonpositive_sigma(sigma):
    with pytest.raises(ValueError):
        threshold(np.zeros((2, 2)), sigma)


def test_fit_dag_recovers_chain():
    rng = np.random.default_rng(0)
    n = 2000
    x0 = rng.normal(size=n)
    x1 = 1.5 * x0 + rng.normal(size=n)
    x2 = -1.0 * x1 + rng.normal(size=n)
    A = fit_dag(np.column_stack([x0, x1, x2]))
    assert acyclicity_h(A) <= 1e-8
    td = threshold(A, 0.3)
    assert is_dag(td.A_hat)
    assert np.all(np.diag(A) == 0)


def test_fit_dag_gd_solver_runs():
    sem = random_dag(4, 0.5, seed=2)
    X = sample_sem(sem, 300, seed=0)
    A = fit_dag(X, DagFitConfig(inner_solver="gd", max_outer=8, inner_iter=50))
    assert A.shape == (4, 4)
    assert np.all(np.isfinite(A))


def test_fit_dag_warns_when_underdetermined():
    Z = np.random.default_rng(0).normal(size=(3, 5))
    with pytest.warns(UserWarning, match="underdetermined"):
        fit_dag(Z, DagFitConfig(max_outer=2, inner_iter=5))


def test_fit_dag_rejects_non_finite():
    Z = np.ones((4, 2))
    Z[0, 0] = np.nan
    with pytest.raises(RuntimeError):
        fit_dag(Z)


def test_fit_dag_config_validation():
    with pytest.raises(ValueError):
        DagFitConfig(inner_solver="adam")
    with pytest.raises(ValueError):
        DagFitConfig(rho_init=0)


def test_shd_counts_reversal_once():
    true = np.zeros((3, 3))
    true[0, 1] = true[1, 2] = 1
    est = np.zeros((3, 3))
    est[1, 0] = est[1, 2] = est[0, 2] = 1
    assert shd(est, true) == 2
    assert shd(true, true) == 0


def test_edge_list_round_trip():
    A = np.zeros((3, 3))
    A[0, 2] = 0.123456789012345
    A[2, 1] = -4.0
    np.testing.assert_array_equal(read_edge_list(edge_list_text(A), 3), A)


def test_read_edge_list_rejects_bad_line():
    with pytest.raises(ValueError, match="line 1"):
        read_edge_list("0 1\n", 2)


def test_graph_text_names_label():
    A = np.zeros((3, 3))
    A[0, 2] = 1.0
    text = graph_text(ThresholdedDag(A, 0.3), 2)
    assert "Z0 -> Y" in text
