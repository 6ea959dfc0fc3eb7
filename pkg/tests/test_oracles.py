"""Deterministic maps, fixed points, drift condition, error bound."""

import math

import numpy as np
import pytest

from targetq import (
    BoundInputs,
    StateActionWeights,
    bellman_opt,
    contraction_modulus_estimate,
    coupled_q_fixed_point,
    finite_sample_bound,
    inner_loop_mse_bound,
    iterate_map,
    negative_drift_check,
    projected_bellman_map,
    modified_bellman_solve,
    truncated_fixed_point,
    truncated_projected_bellman_map,
    two_state,
    two_state_map,
    weights_from,
)
from targetq.envs import baird, default_radius, random_mdp, tabular
from targetq.features import truncate
from targetq.mdp import (
    policy_transition,
    stationary_distribution,
    uniform_policy,
    value_iteration,
)
from targetq.oracles import TruncatedFixedPoint

# hand derivation of the two_state truncation point at radius 40: on the
# branch 10 < theta < 20 the clipped vector is (theta, 2 theta, 2 theta, 40),
# its state values are (2 theta, 40), and matching projection coefficients
# gives 25 theta = 241 + 5.4 theta, so theta = 241 / 19.6
TWO_STATE_TRUNC_THETA = 241.0 / 19.6


def test_two_state_map_closed_form_matches_generic():
    for gamma in (0.5, 0.85, 0.9, 0.99):
        env = two_state(gamma=gamma)
        weights = weights_from(env.mdp, env.behavior)
        for theta in (-7.0, -1.0, 0.0, 0.5, 1.0, 3.0, 12.0):
            generic = projected_bellman_map(np.array([theta]), env.mdp, env.features, weights)
            assert generic[0] == pytest.approx(two_state_map(theta, gamma), abs=1e-10)


def test_two_state_map_negative_branch():
    # slope 3/5 gamma below zero, 6/5 gamma above
    assert two_state_map(-10.0, 0.9) == pytest.approx(1.0 - 5.4)
    assert two_state_map(10.0, 0.9) == pytest.approx(1.0 + 10.8)


def test_iterate_map_converges_when_contractive():
    # theta -> 1 + 0.6 gamma theta at gamma = 0.5 has fixed point 1 / 0.7... no:
    # positive branch slope is 1.2 * 0.5 = 0.6, fixed point 1 / (1 - 0.6) = 2.5
    out = iterate_map(lambda t: two_state_map(t, 0.5), 1.0, 200)
    assert not out.diverged
    assert out.final == pytest.approx(2.5, abs=1e-10)


def test_iterate_map_diverges_past_guard():
    # growth factor 1.08 needs about 206 steps to push 1.0 past 1e8
    out = iterate_map(lambda t: two_state_map(t, 0.9), 1.0, 400, divergence_guard=1e8)
    assert out.diverged
    assert len(out.points) < 401  # halted early
    assert abs(out.points[-1]) > 1e8


def test_iterate_map_geometric_growth_rate():
    out = iterate_map(lambda t: two_state_map(t, 0.9), 1.0, 100, divergence_guard=1e12)
    pts = [p for p in out.points if p > 5]
    ratios = np.diff(np.log(np.array(pts)))
    # asymptotic ratio is the slope 6 gamma / 5 = 1.08
    assert np.all(np.exp(ratios) >= 1.08 - 1e-9)


def test_truncated_map_stays_in_box():
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    rng = np.random.default_rng(23)
    for _ in range(50):
        q = rng.uniform(-40, 40, 4)
        out = truncated_projected_bellman_map(q, env.mdp, env.features, weights, 40.0)
        assert np.all(np.abs(out) <= 40.0 + 1e-12)


def test_truncated_map_equals_bellman_for_complete_basis():
    mdp = random_mdp(3, 2, 0.8, seed=24)
    env = tabular(mdp)
    weights = weights_from(mdp, env.behavior)
    radius = 1000.0  # big enough that the clamp never binds
    q = np.linspace(-2, 2, 6)
    out = truncated_projected_bellman_map(q, mdp, env.features, weights, radius)
    np.testing.assert_allclose(out, bellman_opt(mdp, q), atol=1e-10)


def test_two_state_truncated_fixed_point_frozen():
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    fp = truncated_fixed_point(env.mdp, env.features, weights, radius=40.0)
    assert fp.converged and fp.random_starts_agree
    assert fp.theta[0] == pytest.approx(TWO_STATE_TRUNC_THETA, abs=1e-8)
    expected_q = truncate(env.features.phi[:, 0] * TWO_STATE_TRUNC_THETA, 40.0)
    np.testing.assert_allclose(fp.q, expected_q, atol=1e-8)
    # the fourth component is pinned at the box edge
    assert fp.q[3] == pytest.approx(40.0)


def test_truncated_fixed_point_is_actually_fixed():
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    fp = truncated_fixed_point(env.mdp, env.features, weights, radius=40.0)
    again = truncated_projected_bellman_map(fp.q, env.mdp, env.features, weights, 40.0)
    np.testing.assert_allclose(again, fp.q, atol=1e-8)
    # theta is the coefficient of the span point whose clamp is q
    np.testing.assert_allclose(
        truncate(env.features.phi @ fp.theta, 40.0), fp.q, atol=1e-8
    )


def test_truncated_fixed_point_tabular_recovers_q_star():
    mdp = random_mdp(3, 2, 0.8, seed=25)
    env = tabular(mdp)
    weights = weights_from(mdp, env.behavior)
    radius = float(np.max(np.abs(env.q_star))) * 3
    fp = truncated_fixed_point(mdp, env.features, weights, radius=radius)
    np.testing.assert_allclose(fp.q, env.q_star, atol=1e-8)


def test_bellman_contraction_modulus_all_envs():
    rng = np.random.default_rng(26)
    for env in (two_state(), baird(), tabular(random_mdp(4, 3, 0.7, seed=27))):
        mod = contraction_modulus_estimate(
            lambda q: bellman_opt(env.mdp, q), env.mdp.n_sa, 200, rng
        )
        assert mod <= env.mdp.gamma + 1e-12


def test_two_state_projected_map_is_expansive():
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    rng = np.random.default_rng(28)
    mod = contraction_modulus_estimate(
        lambda t: projected_bellman_map(t, env.mdp, env.features, weights), 1, 200, rng
    )
    # slope of the positive branch is 1.08 at gamma 0.9
    assert mod >= 1.05


def test_negative_drift_violated_on_divergent_envs():
    rng = np.random.default_rng(29)
    for env in (baird(), two_state()):
        mu = stationary_distribution(policy_transition(env.mdp, env.behavior))
        report = negative_drift_check(env.mdp, env.features, env.behavior, mu, 100, rng)
        assert not report.satisfied
        assert report.violations
        for w in report.violations:
            assert w.lhs >= w.rhs


def test_negative_drift_satisfied_at_low_gamma():
    # tabular with uniform 2-action behavior: the condition fails only when
    # 2 gamma^2 >= pi(a | s) = 1/2, i.e. gamma >= 1/2; gamma = 0.4 is safe
    mdp = random_mdp(3, 2, 0.4, seed=30)
    env = tabular(mdp)
    mu = stationary_distribution(policy_transition(mdp, env.behavior))
    report = negative_drift_check(mdp, env.features, env.behavior, mu, 200, np.random.default_rng(31))
    assert report.satisfied
    assert report.checked >= 200


def test_bound_inputs_validation():
    ok = dict(gamma=0.9, lambda_min=1.0, alpha=0.01, t_mix=1, inner_steps=100,
              outer_steps=10, init_gap=1.0)
    BoundInputs(**ok)
    with pytest.raises(ValueError):
        BoundInputs(**{**ok, "gamma": 1.0})
    with pytest.raises(ValueError):
        BoundInputs(**{**ok, "alpha": 1.5})  # alpha * lambda_min >= 1
    with pytest.raises(ValueError):
        BoundInputs(**{**ok, "inner_steps": 1})  # below t_mix + 1
    with pytest.raises(ValueError):
        BoundInputs(**{**ok, "init_gap": -1.0})


def test_finite_sample_bound_open_coded():
    gamma, lam = 0.9, 6.25
    alpha = lam * (1 - gamma) ** 2 / 130  # largest compliant stepsize
    inputs = BoundInputs(
        gamma=gamma, lambda_min=lam, alpha=alpha, t_mix=1,
        inner_steps=10_000, outer_steps=50, init_gap=40.0,
    )
    terms = finite_sample_bound(inputs)
    assert terms.decay == pytest.approx(0.9**50 * 40.0)
    assert terms.decay == pytest.approx(0.2061510083, abs=1e-8)
    expected_tail = 2 * (1 - lam * alpha) ** (9998 / 2) / (math.sqrt(lam) * (1 - gamma) ** 2)
    expected_noise = 24 * math.sqrt(alpha * 2) / (lam * (1 - gamma) ** 2)
    assert terms.tail == pytest.approx(expected_tail, rel=1e-12)
    assert terms.noise == pytest.approx(expected_noise, rel=1e-12)
    assert terms.noise == pytest.approx(11.9071, abs=1e-3)
    assert terms.approx == 0.0
    assert terms.total == pytest.approx(terms.decay + terms.tail + terms.noise)
    assert terms.stepsize_ok


def test_stepsize_flag_boundary():
    gamma, lam = 0.9, 6.25
    limit = lam * (1 - gamma) ** 2 / 130
    base = dict(gamma=gamma, lambda_min=lam, t_mix=1, inner_steps=100,
                outer_steps=5, init_gap=1.0)
    assert finite_sample_bound(BoundInputs(alpha=limit, **base)).stepsize_ok
    # the 5-digit rounding 4.8077e-4 sits just above the exact limit
    assert 4.8077e-4 > limit
    assert not finite_sample_bound(BoundInputs(alpha=4.8077e-4, **base)).stepsize_ok


def test_approx_term_scaling():
    inputs = BoundInputs(gamma=0.8, lambda_min=1.0, alpha=1e-4, t_mix=0,
                         inner_steps=10, outer_steps=0, init_gap=0.0, approx_error=0.5)
    assert finite_sample_bound(inputs).approx == pytest.approx(0.5 / 0.2)


def test_inner_loop_mse_bound_shape():
    kwargs = dict(alpha=1e-3, t_mix=2, lambda_min=0.5, gamma=0.9)
    vals = [inner_loop_mse_bound(k, **kwargs) for k in (3, 10, 100, 100_000)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))  # non-increasing in k
    floor = 520 * 1e-3 * 3 / (0.5**2 * 0.01)
    assert vals[-1] == pytest.approx(floor, rel=1e-6)
    with pytest.raises(ValueError):
        inner_loop_mse_bound(2, **kwargs)  # below t_mix + 1


def test_modified_solve_recovers_q_star_at_zero():
    mdp = random_mdp(3, 2, 0.8, seed=32)
    weights = weights_from(mdp, uniform_policy(mdp))
    q = modified_bellman_solve(mdp, weights, eta=0.0)
    np.testing.assert_allclose(q, value_iteration(mdp), atol=1e-8)


def test_modified_solve_matches_rescaled_mdp():
    # with uniform weights 1/n the damped equation Q = H(Q) / (1 + eta n) is
    # the Bellman equation of the MDP with rewards and discount scaled by c
    mdp = random_mdp(3, 2, 0.8, seed=33)
    weights = StateActionWeights(w=np.full(mdp.n_sa, 1.0 / mdp.n_sa))
    eta = 0.05
    c = 1.0 / (1.0 + eta * mdp.n_sa)
    q = modified_bellman_solve(mdp, weights, eta=eta)
    from targetq.mdp import Mdp

    rescaled = Mdp(
        n_states=mdp.n_states, n_actions=mdp.n_actions, gamma=c * mdp.gamma,
        rewards=c * mdp.rewards, transitions=mdp.transitions,
    )
    np.testing.assert_allclose(q, value_iteration(rescaled), atol=1e-8)
    assert np.max(np.abs(q - value_iteration(mdp))) > 1e-7  # visibly biased
    with pytest.raises(ValueError):
        modified_bellman_solve(mdp, weights, eta=-0.1)


def test_coupled_fixed_point_matches_rescaled_mdp():
    # identity features, uniform weights 1/n: u solves u = (R + gamma P max u) / n,
    # the Bellman equation of the MDP with rewards R/n and discount gamma/n
    mdp = random_mdp(3, 2, 0.8, seed=34)
    env = tabular(mdp)
    weights = StateActionWeights(w=np.full(mdp.n_sa, 1.0 / mdp.n_sa))
    out = coupled_q_fixed_point(mdp, env.features, weights)
    assert out.converged
    from targetq.mdp import Mdp

    n = mdp.n_sa
    rescaled = Mdp(
        n_states=mdp.n_states, n_actions=mdp.n_actions, gamma=mdp.gamma / n,
        rewards=mdp.rewards / n, transitions=mdp.transitions,
    )
    expected_u = value_iteration(rescaled)
    np.testing.assert_allclose(out.u, expected_u, atol=1e-8)
    # v is the Gram inverse applied to u; uniform identity Gram is I/n
    np.testing.assert_allclose(out.v, n * expected_u, atol=1e-7)
    assert np.max(np.abs(out.v - env.q_star)) > 1e-7  # a strongly biased baseline


def test_truncated_fixed_point_type():
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    fp = truncated_fixed_point(env.mdp, env.features, weights, radius=default_radius(env))
    assert isinstance(fp, TruncatedFixedPoint)
    assert fp.max_start_gap <= 1e-7
