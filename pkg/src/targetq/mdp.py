"""Finite discounted MDPs and exact dynamic-programming utilities.

Conventions used across the package:

* State-action pairs are flattened row-major: ``idx(s, a) = s * n_actions + a``,
  with 0-based state and action indices.
* A Q-vector is a float64 array of length ``n_states * n_actions`` in that order.
* A policy is an ``(n_states, n_actions)`` row-stochastic matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class InsufficientExplorationError(ValueError):
    """The behavior policy does not keep every state-action pair recurrent.

    Raised when a policy has a zero-probability action or when the induced
    state chain is reducible or periodic, so no unique positive stationary
    distribution over state-action pairs exists.
    """


class ConvergenceFailure(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


_PROB_TOL = 1e-12


@dataclass
class Mdp:
    """A finite discounted MDP.

    Attributes:
        n_states: number of states, >= 1.
        n_actions: number of actions, >= 1.
        gamma: discount factor, in (0, 1).
        rewards: float64 array of shape (n_states * n_actions,), indexed by idx(s, a).
        transitions: float64 array of shape (n_actions, n_states, n_states);
            transitions[a, s, s2] is the probability of moving to s2 when
            action a is taken in state s. Every transitions[a] is row stochastic.
    """

    n_states: int
    n_actions: int
    gamma: float
    rewards: np.ndarray
    transitions: np.ndarray

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("n_states and n_actions must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        self.rewards = np.ascontiguousarray(self.rewards, dtype=np.float64)
        self.transitions = np.ascontiguousarray(self.transitions, dtype=np.float64)
        if self.rewards.shape != (self.n_states * self.n_actions,):
            raise ValueError(
                f"rewards must have shape ({self.n_states * self.n_actions},), "
                f"got {self.rewards.shape}"
            )
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("rewards must be finite")
        expected = (self.n_actions, self.n_states, self.n_states)
        if self.transitions.shape != expected:
            raise ValueError(f"transitions must have shape {expected}, got {self.transitions.shape}")
        if np.any(self.transitions < -_PROB_TOL) or np.any(self.transitions > 1 + _PROB_TOL):
            raise ValueError("transition probabilities must lie in [0, 1]")
        row_sums = self.transitions.sum(axis=2)
        if not np.allclose(row_sums, 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("every transition row must sum to 1")

    @property
    def n_sa(self) -> int:
        return self.n_states * self.n_actions

    @property
    def r_max(self) -> float:
        return float(np.max(np.abs(self.rewards)))

    def idx(self, s: int, a: int) -> int:
        return s * self.n_actions + a


def check_q(mdp: Mdp, q: np.ndarray) -> np.ndarray:
    """Validate a Q-vector against the MDP's dimensions; returns it as float64."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (mdp.n_sa,):
        raise ValueError(f"Q-vector must have shape ({mdp.n_sa},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("Q-vector entries must be finite")
    return q


def validate_policy(mdp: Mdp, policy: np.ndarray) -> np.ndarray:
    policy = np.asarray(policy, dtype=np.float64)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"policy must have shape ({mdp.n_states}, {mdp.n_actions}), got {policy.shape}"
        )
    if np.any(policy < -_PROB_TOL) or np.any(policy > 1 + _PROB_TOL):
        raise ValueError("policy probabilities must lie in [0, 1]")
    if not np.allclose(policy.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
        raise ValueError("every policy row must sum to 1")
    return policy


def uniform_policy(mdp: Mdp) -> np.ndarray:
    return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)


def state_values(mdp: Mdp, q: np.ndarray) -> np.ndarray:
    """max_a Q(s, a) for every state."""
    return q.reshape(mdp.n_states, mdp.n_actions).max(axis=1)


def bellman_opt(mdp: Mdp, q: np.ndarray) -> np.ndarray:
    """One application of the Bellman optimality operator.

    (HQ)(s, a) = R(s, a) + gamma * sum_s2 P_a(s, s2) * max_a2 Q(s2, a2).
    A gamma-contraction in the sup norm.
    """
    q = check_q(mdp, q)
    v = state_values(mdp, q)
    # ev[s, a] = E[V(s2) | s, a]; transitions axes are (action, state, target)
    ev = np.einsum("ast,t->sa", mdp.transitions, v)
    return mdp.rewards + mdp.gamma * ev.reshape(mdp.n_sa)


def greedy_policy(mdp: Mdp, q: np.ndarray) -> np.ndarray:
    """Deterministic greedy policy as a one-hot row-stochastic matrix.

    Ties resolve to the lowest action index.
    """
    q = check_q(mdp, q)
    best = np.argmax(q.reshape(mdp.n_states, mdp.n_actions), axis=1)
    policy = np.zeros((mdp.n_states, mdp.n_actions))
    policy[np.arange(mdp.n_states), best] = 1.0
    return policy


def value_iteration(mdp: Mdp, tol: float = 1e-10, max_iter: int = 10**6) -> np.ndarray:
    """Iterate the Bellman optimality operator from Q = 0 until the sup-norm
    residual ||HQ - Q||_inf drops to tol.

    Returns the last iterate, which satisfies ||HQ - Q||_inf <= tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = np.zeros(mdp.n_sa)
    for _ in range(max_iter):
        q_next = bellman_opt(mdp, q)
        if float(np.max(np.abs(q_next - q))) <= tol:
            return q_next
        q = q_next
    raise ConvergenceFailure(f"value iteration did not reach tol={tol} in {max_iter} iterations")


def policy_transition(mdp: Mdp, policy: np.ndarray) -> np.ndarray:
    """State transition matrix of the chain induced by a policy:
    P_pi(s, s2) = sum_a policy(s, a) * P_a(s, s2)."""
    policy = validate_policy(mdp, policy)
    return np.einsum("sa,ast->st", policy, mdp.transitions)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen


def _is_irreducible(adj: np.ndarray) -> bool:
    return bool(np.all(_reachable(adj, 0)) and np.all(_reachable(adj.T, 0)))


def _period(adj: np.ndarray) -> int:
    # For a strongly connected graph the period is the gcd of
    # level[u] + 1 - level[v] over all edges (u, v), with BFS levels from any root.
    n = adj.shape[0]
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    g = 0
    for u in range(n):
        for v in np.flatnonzero(adj[u]):
            g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g if g > 0 else 1


def stationary_distribution(transition: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Unique stationary distribution of an irreducible, aperiodic chain.

    Solves mu^T P = mu^T, sum(mu) = 1 by direct linear solve and verifies the
    residual. Raises InsufficientExplorationError when the chain is reducible
    or periodic.
    """
    p = np.asarray(transition, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("transition matrix must be square")
    if not np.allclose(p.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
        raise ValueError("every transition row must sum to 1")
    n = p.shape[0]
    adj = p > 0.0
    if not _is_irreducible(adj):
        raise InsufficientExplorationError(
            "chain is reducible: every state must be reachable from every other"
        )
    if _period(adj) != 1:
        raise InsufficientExplorationError("chain is periodic: no unique limiting distribution")
    a = (p.T - np.eye(n)).copy()
    a[-1, :] = 1.0  # replace one redundant equation with the normalization
    b = np.zeros(n)
    b[-1] = 1.0
    mu = np.linalg.solve(a, b)
    mu = np.where(mu < 0, 0.0, mu)  # clamp solver dust
    mu = mu / mu.sum()
    if float(np.abs(mu @ p - mu).max()) > max(tol, 1e-10):
        raise ConvergenceFailure("stationary distribution residual above tolerance")
    return mu


def mixing_time(transition: np.ndarray, mu: np.ndarray, delta: float, cap: int = 10**6) -> int:
    """Smallest k with max_s TV(P^k(s, .), mu) <= delta, by exact matrix powering.

    TV is half the l1 distance. Raises ConvergenceFailure at the iteration cap,
    which signals a (nearly) periodic chain.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    p = np.asarray(transition, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    power = np.eye(p.shape[0])
    for k in range(cap + 1):
        tv = 0.5 * float(np.abs(power - mu[None, :]).sum(axis=1).max())
        if tv <= delta:
            return k
        power = power @ p
    raise ConvergenceFailure(f"chain did not mix to delta={delta} within {cap} steps")


def check_sufficient_exploration(mdp: Mdp, policy: np.ndarray) -> np.ndarray:
    """Validate that a behavior policy explores: strictly positive action
    probabilities and an irreducible, aperiodic induced chain.

    Returns the stationary distribution of the induced chain.
    """
    policy = validate_policy(mdp, policy)
    if np.any(policy <= 0.0):
        raise InsufficientExplorationError("behavior policy must give every action positive probability")
    return stationary_distribution(policy_transition(mdp, policy))


def sample_step(mdp: Mdp, policy: np.ndarray, state: int, rng: np.random.Generator):
    """Draw one transition (action, reward, next_state) from a state.

    Consumes exactly two uniforms in fixed order: one for the action via
    inverse CDF over action indices, then one for the next state via inverse
    CDF over state indices. This draw order is part of the reproducibility
    contract shared with the compiled trajectory kernels.
    """
    if not 0 <= state < mdp.n_states:
        raise ValueError(f"state {state} out of range")
    cum_a = np.cumsum(policy[state])
    a = int(min(np.searchsorted(cum_a, rng.random(), side="right"), mdp.n_actions - 1))
    cum_s = np.cumsum(mdp.transitions[a, state])
    s2 = int(min(np.searchsorted(cum_s, rng.random(), side="right"), mdp.n_states - 1))
    return a, float(mdp.rewards[mdp.idx(state, a)]), s2


def save_mdp(mdp: Mdp, path: str) -> None:
    """Write an MDP as JSON: rewards row-major by idx(s, a), transitions as a
    list of row-major matrices, one per action."""
    payload = {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "gamma": mdp.gamma,
        "rewards": mdp.rewards.tolist(),
        "transitions": [mdp.transitions[a].reshape(-1).tolist() for a in range(mdp.n_actions)],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_mdp(path: str) -> Mdp:
    with open(path) as fh:
        payload = json.load(fh)
    n_states = int(payload["n_states"])
    n_actions = int(payload["n_actions"])
    transitions = np.array(
        [np.reshape(payload["transitions"][a], (n_states, n_states)) for a in range(n_actions)]
    )
    return Mdp(
        n_states=n_states,
        n_actions=n_actions,
        gamma=float(payload["gamma"]),
        rewards=np.asarray(payload["rewards"], dtype=np.float64),
        transitions=transitions,
    )
