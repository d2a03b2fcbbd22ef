import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hslra.completion import (
    AdmmOptions,
    CompletionProblem,
    WeightScheme,
    exact_complete,
    forecast_rmse,
    nn_complete_exactfit,
    nn_complete_regularized,
    nn_complete_tolerance,
    weighted_norm,
)
from hslra.errors import ArgumentError, NonContinuableError, RankMismatchError
from hslra.hankel import antidiag_weights, embed
from hslra.linalg import nuclear_norm
from hslra.signals import DampedSinusoidModel, DampedTerm, generate_damped

from helpers import random_finite_rank

cp = pytest.importorskip("cvxpy")


def cvx_regularized(p0, m, window, w, gamma, squared):
    """Independent convex-solver oracle for the regularised completion."""
    n = p0.size
    x = cp.Variable(n + m)
    k = n + m - window + 1
    h = cp.bmat([[x[i + j] for j in range(k)] for i in range(window)])
    r = cp.multiply(np.sqrt(w), x[:n] - p0)
    loss = cp.sum_squares(r) if squared else cp.norm(r, 2)
    cp.Problem(cp.Minimize(loss + gamma * cp.normNuc(h))).solve(solver="SCS", eps=1e-9, max_iters=200_000)
    return x.value


def geometric(lam, n, c=1.0):
    return c * lam ** np.arange(1, n + 1)


def test_weight_schemes():
    np.testing.assert_array_equal(WeightScheme.unit().resolve(5, 3), np.ones(5))
    np.testing.assert_array_equal(WeightScheme.hankel().resolve(5, 3), antidiag_weights(5, 3))
    np.testing.assert_allclose(WeightScheme.exponential(0.5, 0.1).resolve(3, 2),
                               0.5 * np.exp(0.1 * np.arange(1, 4)))
    with pytest.raises(ArgumentError):
        WeightScheme.exponential(-1.0, 0.0)


def test_problem_validation():
    with pytest.raises(ArgumentError):
        CompletionProblem(np.ones(4), 2, 7)
    with pytest.raises(ArgumentError):
        CompletionProblem(np.ones(4), -1, 2)


def test_exact_geometric():
    p = geometric(0.5, 14)
    out = exact_complete(CompletionProblem(p[:10], 4, 5), 1)
    np.testing.assert_allclose(out[10:], 0.5 ** np.arange(11, 15), atol=1e-10)


def test_exact_fibonacci():
    fib = np.array([1, 1, 2, 3, 5, 8, 13, 21], dtype=float)
    out = exact_complete(CompletionProblem(fib, 3, 4), 2)
    np.testing.assert_allclose(out[-3:], [34, 55, 89])


def test_exact_damped_sinusoid():
    s = generate_damped(DampedSinusoidModel([DampedTerm(1.0, 0.05, 0.2, 0.0)]), 20)
    out = exact_complete(CompletionProblem(s[:16], 4, 8), 2)
    np.testing.assert_allclose(out[16:], s[16:], atol=1e-8)


def test_exact_errors():
    noise = np.random.default_rng(0).standard_normal(12)
    with pytest.raises(RankMismatchError):
        exact_complete(CompletionProblem(noise, 2, 5), 2)
    # a trailing spike is a rank-one component with a vanishing leading coefficient
    spike = np.zeros(8)
    spike[-1] = 1.0
    with pytest.raises(NonContinuableError):
        exact_complete(CompletionProblem(spike, 2, 4), 1)
    with pytest.raises(ArgumentError):
        exact_complete(CompletionProblem(np.ones(6), 2, 4), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_exact_completion_recovers_held_out(seed):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, 5))
    m = int(rng.integers(1, 11))
    n = int(rng.integers(2 * r + 2, 24))
    _, p = random_finite_rank(rng, r, n + m, head=int(rng.integers(0, 2)) if r > 1 else 0)
    out = exact_complete(CompletionProblem(p[:n], m, r + 1), r)
    assert np.max(np.abs(out[n:] - p[n:])) <= 1e-8 * np.abs(p).max()


@pytest.mark.parametrize("lam", [0.5, 0.3, 0.7])
def test_exactfit_small_root_matches_recurrence(lam):
    rep = nn_complete_exactfit(CompletionProblem(geometric(lam, 5), 2, 3))
    assert rep.converged
    np.testing.assert_allclose(rep.forecast, [lam ** 6, lam ** 7], atol=1e-4)


def test_exactfit_unit_root_objective():
    # at |lambda| = 1 the minimiser need not be unique; compare objective values
    p = geometric(1.0, 5)
    rep = nn_complete_exactfit(CompletionProblem(p, 2, 3))
    assert nuclear_norm(embed(rep.completed, 3)) == pytest.approx(nuclear_norm(embed(np.ones(7), 3)), abs=1e-4)


def test_exactfit_reflection_for_large_root():
    rep = nn_complete_exactfit(CompletionProblem(geometric(2.0, 3), 2, 3))
    assert rep.converged
    np.testing.assert_allclose(rep.completed, [2, 4, 8, 4, 2], atol=1e-4)


def test_exactfit_against_convex_oracle():
    rng = np.random.default_rng(1)
    p0 = rng.standard_normal(6)
    rep = nn_complete_exactfit(CompletionProblem(p0, 3, 4))
    x = cp.Variable(3)
    full = cp.hstack([p0, x])
    h = cp.bmat([[full[i + j] for j in range(6)] for i in range(4)])
    prob = cp.Problem(cp.Minimize(cp.normNuc(h)))
    prob.solve(solver="SCS", eps=1e-9, max_iters=200_000)
    assert nuclear_norm(embed(rep.completed, 4)) == pytest.approx(prob.value, rel=1e-5)


def test_exactfit_no_horizon():
    p = np.random.default_rng(2).standard_normal(7)
    rep = nn_complete_exactfit(CompletionProblem(p, 0, 3))
    np.testing.assert_array_equal(rep.completed, p)
    assert rep.forecast.size == 0


def test_exactfit_scale_equivariance():
    p = np.random.default_rng(3).standard_normal(6)
    a = nn_complete_exactfit(CompletionProblem(p, 2, 4)).completed
    b = nn_complete_exactfit(CompletionProblem(-3.0 * p, 2, 4)).completed
    np.testing.assert_allclose(b, -3.0 * a, atol=1e-5)


def test_admm_optimality_conditions():
    p0 = np.random.default_rng(4).standard_normal(8)
    rep = nn_complete_regularized(CompletionProblem(p0, 3, 5), 0.5, loss="squared",
                                  options=AdmmOptions(tol=1e-10, max_iters=20_000))
    assert rep.converged
    h = embed(rep.completed, 5)
    assert np.linalg.norm(h - rep.z) <= 1e-6 * np.linalg.norm(rep.z)
    # objective is minimal along random directions (finite differences)
    rng = np.random.default_rng(5)

    def f(x):
        return np.sum((x[:8] - p0) ** 2) + 0.5 * nuclear_norm(embed(x, 5))

    base = f(rep.completed)
    for _ in range(200):
        d = rng.standard_normal(11) * 1e-3
        assert base <= f(rep.completed + d) + 1e-6


@pytest.mark.parametrize("squared", [True, False])
@pytest.mark.parametrize("scheme", [WeightScheme.unit(), WeightScheme.hankel(),
                                    WeightScheme.exponential(0.5, 0.2)])
def test_regularized_against_convex_oracle(squared, scheme):
    rng = np.random.default_rng(6)
    p0 = np.sin(0.7 * np.arange(1, 10)) + 0.1 * rng.standard_normal(9)
    problem = CompletionProblem(p0, 3, 5, scheme)
    w = problem.weight_vector()
    gamma = 0.2
    rep = nn_complete_regularized(problem, gamma, loss="squared" if squared else "unsquared",
                                  options=AdmmOptions(tol=1e-10, max_iters=50_000))
    x = cvx_regularized(p0, 3, 5, w, gamma, squared)

    def objective(v):
        r = weighted_norm(v[:9] - p0, w)
        return (r ** 2 if squared else r) + gamma * nuclear_norm(embed(v, 5))

    assert objective(rep.completed) <= objective(x) + 1e-5
    np.testing.assert_allclose(rep.completed, x, atol=2e-3)


def test_vanishing_regularisation_fits_data():
    p0 = np.random.default_rng(7).standard_normal(10)
    rep = nn_complete_regularized(CompletionProblem(p0, 2, 5), 1e-8, loss="squared")
    np.testing.assert_allclose(rep.completed[:10], p0, atol=1e-4)


def test_regularized_rejects_bad_gamma():
    with pytest.raises(ArgumentError):
        nn_complete_regularized(CompletionProblem(np.ones(5), 1, 3), 0.0)


def test_tolerance_zero_is_exactfit():
    p = np.random.default_rng(8).standard_normal(6)
    a = nn_complete_tolerance(CompletionProblem(p, 2, 3), 0.0)
    b = nn_complete_exactfit(CompletionProblem(p, 2, 3))
    assert a.completed.tobytes() == b.completed.tobytes()


def test_tolerance_large_tau_gives_zero():
    rng = np.random.default_rng(9)
    p = rng.standard_normal(8)
    problem = CompletionProblem(p, 2, 4)
    tau = weighted_norm(p, problem.weight_vector())
    rep = nn_complete_tolerance(problem, tau)
    assert rep.nuclear_norm == 0.0
    # any feasible random candidate has a nuclear norm at least as large
    for _ in range(200):
        cand = p + rng.uniform(-1, 1, 8) * rng.uniform(0, 1) * tau / np.sqrt(8)
        if weighted_norm(cand - p, problem.weight_vector()) <= tau:
            full = np.concatenate([cand, rng.standard_normal(2)])
            assert rep.nuclear_norm <= nuclear_norm(embed(full, 4))


def test_tolerance_constraint_active():
    rng = np.random.default_rng(10)
    k = np.arange(1, 21)
    noise = 0.1 * rng.standard_normal(20)
    p0 = np.cos(0.4 * k) + noise
    tau = float(np.linalg.norm(noise))
    rep = nn_complete_tolerance(CompletionProblem(p0, 3, 8), tau)
    assert rep.converged
    assert 0.99 * tau <= rep.fit_residual <= tau
    assert np.isfinite(rep.gamma) and rep.gamma > 0


def test_forecast_rmse():
    x = np.arange(6.0)
    assert forecast_rmse(x, x, 3) == 0.0
    assert forecast_rmse(x, x + np.r_[0, 0, 0, 2.5, 2.5, 2.5], 3) == pytest.approx(2.5)
    with pytest.raises(ArgumentError):
        forecast_rmse(x, x, 0)
    with pytest.raises(ArgumentError):
        forecast_rmse(x, x[:5], 2)


def test_report_serialises():
    rep = nn_complete_exactfit(CompletionProblem(geometric(0.5, 5), 2, 3))
    d = rep.to_dict()
    assert len(d["completed"]) == 7 and len(d["forecast"]) == 2
    assert d["primal_residual"] >= 0 and d["dual_residual"] >= 0
