"""Compiled single-trajectory update loops.

The kernels consume pre-drawn uniform variates (one pair per step: action
first, then next state, both by inverse CDF over index order) so results are
bit-for-bit reproducible from the generator seed regardless of compilation.
Dot products accumulate over feature indices in ascending order; keep it that
way, the iterate-equality guarantees in the test suite rely on a fixed
floating-point evaluation order.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def inner_steps(phi, rewards, cum_pi, cum_p, boot, theta, state, alpha, us, vs):
    """Advance the inner loop of a target-network run by len(us) steps.

    boot[s2] holds gamma * max_a value of the frozen target at state s2,
    precomputed outside (the target parameters do not move inside the loop).
    theta is updated in place; returns the state the trajectory ends in.
    """
    n_steps = us.shape[0]
    n_actions = cum_pi.shape[1]
    n_states = cum_p.shape[2]
    d = phi.shape[1]
    s = state
    for k in range(n_steps):
        a = 0
        u = us[k]
        while a < n_actions - 1 and cum_pi[s, a] <= u:
            a += 1
        idx = s * n_actions + a
        s2 = 0
        v = vs[k]
        while s2 < n_states - 1 and cum_p[a, s, s2] <= v:
            s2 += 1
        q_sa = 0.0
        for j in range(d):
            q_sa += phi[idx, j] * theta[j]
        td = rewards[idx] + boot[s2] - q_sa
        for j in range(d):
            theta[j] += alpha * td * phi[idx, j]
        s = s2
    return s


@njit(cache=True, nogil=True)
def semi_gradient_steps(phi, rewards, cum_pi, cum_p, gamma, theta, state, alpha, us, vs):
    """Advance a semi-gradient run by len(us) steps: the bootstrap value is
    re-evaluated from the moving theta at every step."""
    n_steps = us.shape[0]
    n_actions = cum_pi.shape[1]
    n_states = cum_p.shape[2]
    d = phi.shape[1]
    s = state
    for k in range(n_steps):
        a = 0
        u = us[k]
        while a < n_actions - 1 and cum_pi[s, a] <= u:
            a += 1
        idx = s * n_actions + a
        s2 = 0
        v = vs[k]
        while s2 < n_states - 1 and cum_p[a, s, s2] <= v:
            s2 += 1
        best = -1e300
        base = s2 * n_actions
        for a2 in range(n_actions):
            val = 0.0
            for j in range(d):
                val += phi[base + a2, j] * theta[j]
            if val > best:
                best = val
        q_sa = 0.0
        for j in range(d):
            q_sa += phi[idx, j] * theta[j]
        td = rewards[idx] + gamma * best - q_sa
        for j in range(d):
            theta[j] += alpha * td * phi[idx, j]
        s = s2
    return s


@njit(cache=True, nogil=True)
def chain_visits(cum_p_pi, state, us, counts):
    """Walk the state chain for len(us) steps, accumulating visit counts."""
    n_states = cum_p_pi.shape[1]
    s = state
    for k in range(us.shape[0]):
        u = us[k]
        s2 = 0
        while s2 < n_states - 1 and cum_p_pi[s, s2] <= u:
            s2 += 1
        counts[s2] += 1
        s = s2
    return s
