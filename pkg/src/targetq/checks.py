"""Self-check battery behind the ``check`` CLI command.

Every check is deterministic (fixed seeds throughout) and cheap; the battery
exists so a broken invariant shows up as a named FAIL line rather than a
mystery further downstream. Output formatting is stable byte for byte.
"""

from __future__ import annotations

import itertools

import numpy as np

from .algorithms import AlgoConfig, projection_variant_run, semi_gradient_run, target_network_run
from .envs import baird, default_radius, random_tabular, tabular, two_state
from .features import (
    gram_and_lambda_min,
    project_span,
    truncate,
    truncation_is_projection_check,
    weighted_lp_norm,
    weights_from,
)
from .mdp import (
    Mdp,
    bellman_opt,
    greedy_policy,
    mixing_time,
    policy_transition,
    stationary_distribution,
    uniform_policy,
    value_iteration,
)
from .oracles import (
    BoundInputs,
    coupled_q_fixed_point,
    finite_sample_bound,
    iterate_map,
    negative_drift_check,
    projected_bellman_map,
    modified_bellman_solve,
    truncated_fixed_point,
    two_state_map,
)


def _brute_force_q(mdp: Mdp) -> np.ndarray:
    """Optimal action values by enumerating every deterministic policy and
    solving its evaluation equations exactly. Exponential, so tiny MDPs only."""
    best_v = np.full(mdp.n_states, -np.inf)
    n, a = mdp.n_states, mdp.n_actions
    r = mdp.rewards.reshape(n, a)
    for assignment in itertools.product(range(a), repeat=n):
        p_pi = np.stack([mdp.transitions[assignment[s], s] for s in range(n)])
        r_pi = np.array([r[s, assignment[s]] for s in range(n)])
        v = np.linalg.solve(np.eye(n) - mdp.gamma * p_pi, r_pi)
        best_v = np.maximum(best_v, v)
    ev = np.einsum("ast,t->sa", mdp.transitions, best_v)
    return mdp.rewards + mdp.gamma * ev.reshape(-1)


def check_bellman_contraction() -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    worst = 0.0
    for env in (two_state(), baird(), random_tabular(4, 3, 0.7, seed=2)):
        for _ in range(50):
            q1 = rng.uniform(-10, 10, env.mdp.n_sa)
            q2 = rng.uniform(-10, 10, env.mdp.n_sa)
            num = np.max(np.abs(bellman_opt(env.mdp, q1) - bellman_opt(env.mdp, q2)))
            den = np.max(np.abs(q1 - q2))
            worst = max(worst, num / den / env.mdp.gamma)
    return worst <= 1.0 + 1e-12, f"worst ratio to gamma {worst:.6f}"


def check_bellman_shift_and_monotone() -> tuple[bool, str]:
    rng = np.random.default_rng(1)
    mdp = random_tabular(4, 3, 0.7, seed=2).mdp
    q = rng.uniform(-5, 5, mdp.n_sa)
    shift = np.max(np.abs(bellman_opt(mdp, q + 3.0) - (bellman_opt(mdp, q) + mdp.gamma * 3.0)))
    mono = np.all(bellman_opt(mdp, q + rng.uniform(0, 2, mdp.n_sa)) >= bellman_opt(mdp, q) - 1e-12)
    return shift <= 1e-10 and bool(mono), f"shift residual {shift:.2e}"


def check_value_iteration_vs_enumeration() -> tuple[bool, str]:
    worst = 0.0
    for seed in (3, 4):
        mdp = random_tabular(4, 2, 0.85, seed=seed).mdp
        worst = max(worst, float(np.max(np.abs(value_iteration(mdp) - _brute_force_q(mdp)))))
    return worst <= 1e-8, f"max gap to policy enumeration {worst:.2e}"


def check_greedy_tie_break() -> tuple[bool, str]:
    mdp = random_tabular(2, 3, 0.5, seed=5).mdp
    q = np.array([1.0, 1.0, 0.0, 2.0, 5.0, 5.0])
    pi = greedy_policy(mdp, q)
    ok = pi[0, 0] == 1.0 and pi[1, 1] == 1.0
    return ok, "ties resolve to the lowest action index"


def check_stationary_distribution() -> tuple[bool, str]:
    worst = 0.0
    for env in (two_state(), baird(), random_tabular(5, 2, 0.9, seed=6)):
        chain = policy_transition(env.mdp, env.behavior)
        mu = stationary_distribution(chain)
        worst = max(worst, float(np.max(np.abs(mu @ chain - mu))))
    expected = np.full(7, 1 / 12.0)
    expected[6] = 0.5
    hub = np.max(np.abs(stationary_distribution(policy_transition(baird().mdp, baird().behavior)) - expected))
    return worst <= 1e-10 and hub <= 1e-12, f"max residual {worst:.2e}"


def check_mixing_time_monotone() -> tuple[bool, str]:
    env = baird()
    chain = policy_transition(env.mdp, env.behavior)
    mu = stationary_distribution(chain)
    ts = [mixing_time(chain, mu, delta) for delta in (0.1, 0.01, 0.001)]
    ok = ts[0] <= ts[1] <= ts[2]
    return ok, f"t_mix at 1e-1/1e-2/1e-3: {ts[0]}/{ts[1]}/{ts[2]}"


def check_projection_properties() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    worst_idem, worst_exp = 0.0, 0.0
    for _ in range(50):
        q = rng.uniform(-20, 20, env.mdp.n_sa)
        p = project_span(q, env.features, weights)
        worst_idem = max(worst_idem, float(np.max(np.abs(project_span(p, env.features, weights) - p))))
        q2 = rng.uniform(-20, 20, env.mdp.n_sa)
        p2 = project_span(q2, env.features, weights)
        num = weighted_lp_norm(p - p2, weights.w, 2)
        den = weighted_lp_norm(q - q2, weights.w, 2)
        if den > 0:
            worst_exp = max(worst_exp, num / den)
    ok = worst_idem <= 1e-10 and worst_exp <= 1.0 + 1e-12
    return ok, f"idempotence {worst_idem:.2e}, expansion {worst_exp:.6f}"


def check_truncation_properties() -> tuple[bool, str]:
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        x = rng.uniform(-30, 30, 6)
        y = rng.uniform(-30, 30, 6)
        r = rng.uniform(0.1, 20)
        lhs = np.max(np.abs(truncate(x, r) - truncate(y, r)))
        worst = max(worst, lhs / max(np.max(np.abs(x - y)), 1e-300))
        inside = rng.uniform(-r, r, 6)
        if not np.array_equal(truncate(inside, r), inside):
            return False, "identity inside the box violated"
        if np.max(np.abs(truncate(x, r))) > r:
            return False, "image escapes the box"
    return worst <= 1.0 + 1e-12, f"Lipschitz ratio {worst:.6f}"


def check_truncation_is_projection() -> tuple[bool, str]:
    rng = np.random.default_rng(9)
    dims = (2, 4, 14)
    ps = (1.0, 2.0, float("inf"))
    for case in range(1000):
        d = dims[case % 3]
        p = ps[(case // 3) % 3]
        w = rng.uniform(0.05, 1.0, d)
        w /= w.sum()
        radius = rng.uniform(0.5, 10.0)
        x = rng.uniform(-3 * radius, 3 * radius, d)
        if not truncation_is_projection_check(x, radius, w, p, n_random=200, rng=rng):
            return False, f"margin violated at case {case} (d={d}, p={p})"
    return True, "1000 randomized cases, clamp never beaten in the box"


def check_gram_definite() -> tuple[bool, str]:
    lams = []
    for env in (two_state(), baird(), random_tabular(4, 3, 0.7, seed=2)):
        weights = weights_from(env.mdp, env.behavior)
        _, lam = gram_and_lambda_min(env.features, weights)
        lams.append(lam)
    ok = all(l > 0 for l in lams)
    return ok, "lambda_min " + ", ".join(f"{l:.4g}" for l in lams)


def check_tabular_projection_identity() -> tuple[bool, str]:
    rng = np.random.default_rng(10)
    env = random_tabular(4, 2, 0.8, seed=11)
    weights = weights_from(env.mdp, env.behavior)
    q = rng.uniform(-9, 9, env.mdp.n_sa)
    gap = np.max(np.abs(project_span(q, env.features, weights) - q))
    return gap <= 1e-10, f"complete basis projects to itself ({gap:.2e})"


def check_two_state_map_closed_form() -> tuple[bool, str]:
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    worst = 0.0
    for theta in (-7.0, -1.0, 0.0, 0.5, 3.0, 22.6, 100.0):
        generic = projected_bellman_map(np.array([theta]), env.mdp, env.features, weights)[0]
        worst = max(worst, abs(generic - two_state_map(theta, env.mdp.gamma)))
    return worst <= 1e-10, f"closed form matches generic map ({worst:.2e})"


def check_iterate_map_divergence() -> tuple[bool, str]:
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)

    def step(th):
        return projected_bellman_map(th, env.mdp, env.features, weights)

    out = iterate_map(step, np.array([1.0]), n_iter=500, divergence_guard=1e3)
    return out.diverged, f"passed the guard after {len(out.points) - 1} iterations"


def check_truncated_fixed_point() -> tuple[bool, str]:
    env = two_state()
    weights = weights_from(env.mdp, env.behavior)
    fp = truncated_fixed_point(env.mdp, env.features, weights, radius=default_radius(env))
    ok = fp.converged and fp.random_starts_agree
    return ok, f"theta* = {fp.theta[0]:.6f}, start spread {fp.max_start_gap:.2e}"


def check_run_determinism() -> tuple[bool, str]:
    env = two_state()
    cfg = AlgoConfig(T=5, K=200, alpha=0.05, seed=3)
    a = target_network_run(env, cfg, truncation=True)
    b = target_network_run(env, cfg, truncation=True)
    same = a.theta_final.tobytes() == b.theta_final.tobytes() and a.to_rows(0) == b.to_rows(0)
    c = target_network_run(env, AlgoConfig(T=5, K=200, alpha=0.05, seed=4), truncation=True)
    differ = c.theta_final.tobytes() != a.theta_final.tobytes()
    return same and differ, "same seed bitwise equal, new seed differs"


def check_projection_variant_equivalence() -> tuple[bool, str]:
    env = two_state()
    cfg = AlgoConfig(T=6, K=300, alpha=0.02, seed=12, r=40.0)
    a = target_network_run(env, cfg, truncation=True)
    b = projection_variant_run(env, cfg)
    ok = a.theta_final.tobytes() == b.theta_final.tobytes()
    return ok, "weight-clamp run equals explicit table-projection run bitwise"


def check_semi_gradient_tabular_convergence() -> tuple[bool, str]:
    env = random_tabular(3, 2, 0.8, seed=13)
    cfg = AlgoConfig(T=1, K=200_000, alpha=0.01, seed=0, log_every=200_000)
    log = semi_gradient_run(env, cfg)
    err = log.records[-1].sup_error
    return err <= 1.0 and not log.diverged, f"terminal sup error {err:.4f}"


def check_negative_drift_witnesses() -> tuple[bool, str]:
    rng = np.random.default_rng(14)
    env = baird()
    weights = weights_from(env.mdp, env.behavior)
    mu = weights.w.reshape(env.mdp.n_states, env.mdp.n_actions).sum(axis=1)
    report = negative_drift_check(env.mdp, env.features, env.behavior, mu, n_random=20, rng=rng)
    detail = f"{len(report.violations)} violating directions of {report.checked} checked"
    return not report.satisfied, detail


def check_bound_sanity() -> tuple[bool, str]:
    base = BoundInputs(
        gamma=0.9, lambda_min=6.25, alpha=1e-4, t_mix=1,
        inner_steps=10_000, outer_steps=20, init_gap=40.0,
    )
    t = finite_sample_bound(base)
    bigger_k = finite_sample_bound(
        BoundInputs(gamma=0.9, lambda_min=6.25, alpha=1e-4, t_mix=1,
                    inner_steps=40_000, outer_steps=20, init_gap=40.0)
    )
    more_t = finite_sample_bound(
        BoundInputs(gamma=0.9, lambda_min=6.25, alpha=1e-4, t_mix=1,
                    inner_steps=10_000, outer_steps=40, init_gap=40.0)
    )
    ok = (
        t.total > 0
        and bigger_k.tail <= t.tail
        and more_t.decay <= t.decay
        and t.stepsize_ok == (1e-4 <= 6.25 * 0.01 / 130)
    )
    return ok, f"total {t.total:.4f}, tail shrinks with K, decay with T"


def check_modified_solver() -> tuple[bool, str]:
    env = random_tabular(3, 2, 0.8, seed=15)
    weights = weights_from(env.mdp, env.behavior)
    q0 = modified_bellman_solve(env.mdp, weights, eta=0.0)
    gap0 = float(np.max(np.abs(q0 - env.q_star)))
    q1 = modified_bellman_solve(env.mdp, weights, eta=0.5)
    gap1 = float(np.max(np.abs(q1 - env.q_star)))
    return gap0 <= 1e-8 and gap1 > 1e-3, f"eta=0 gap {gap0:.2e}, eta=0.5 gap {gap1:.2e}"


def check_coupled_fixed_point() -> tuple[bool, str]:
    env = random_tabular(3, 2, 0.8, seed=16)
    weights = weights_from(env.mdp, env.behavior)
    out = coupled_q_fixed_point(env.mdp, env.features, weights)
    gap = float(np.max(np.abs(env.features.phi @ out.v - env.q_star)))
    return out.converged and gap > 1e-6, f"converged, biased away from Q* by {gap:.4f}"


CHECKS = [
    ("mdp/bellman_contraction", check_bellman_contraction),
    ("mdp/bellman_shift_monotone", check_bellman_shift_and_monotone),
    ("mdp/value_iteration_exact", check_value_iteration_vs_enumeration),
    ("mdp/greedy_tie_break", check_greedy_tie_break),
    ("mdp/stationary_distribution", check_stationary_distribution),
    ("mdp/mixing_time_monotone", check_mixing_time_monotone),
    ("features/projection_properties", check_projection_properties),
    ("features/truncation_properties", check_truncation_properties),
    ("features/truncation_is_projection", check_truncation_is_projection),
    ("features/gram_definite", check_gram_definite),
    ("features/tabular_projection_identity", check_tabular_projection_identity),
    ("oracles/two_state_map_closed_form", check_two_state_map_closed_form),
    ("oracles/iterate_map_divergence", check_iterate_map_divergence),
    ("oracles/truncated_fixed_point", check_truncated_fixed_point),
    ("algorithms/run_determinism", check_run_determinism),
    ("algorithms/projection_variant_equivalence", check_projection_variant_equivalence),
    ("algorithms/semi_gradient_tabular", check_semi_gradient_tabular_convergence),
    ("oracles/negative_drift_witnesses", check_negative_drift_witnesses),
    ("oracles/bound_sanity", check_bound_sanity),
    ("oracles/modified_solver", check_modified_solver),
    ("oracles/coupled_fixed_point", check_coupled_fixed_point),
]


def run_all() -> tuple[str, bool]:
    lines = []
    failures = 0
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure with the reason inline
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        lines.append(f"[{status}] {name}: {detail}")
    lines.append(f"SUMMARY: {len(CHECKS) - failures} passed, {failures} failed")
    return "\n".join(lines) + "\n", failures == 0
