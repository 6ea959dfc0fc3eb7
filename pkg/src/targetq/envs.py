"""Benchmark environments: small MDPs paired with features and a behavior policy.

Two hand-built instances dominate the test surface:

* ``two_state``: a 2-state, 2-action MDP with a single scalar feature whose
  projected Bellman recursion is expansive for gamma > 5/6. The classic
  minimal divergence example for off-policy bootstrapping with function
  approximation.
* ``baird``: Baird's 7-state star counterexample, adapted to Q-learning with
  two actions (solid = 0, dash = 1), zero rewards, and a 14-dimensional
  complete feature basis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMap, normalize_features
from .mdp import Mdp, check_sufficient_exploration, uniform_policy, value_iteration


@dataclass
class Environment:
    """An MDP bundled with features, an exploring behavior policy, and the
    exact optimal Q-vector (solved to 1e-10 at construction)."""

    name: str
    mdp: Mdp
    features: FeatureMap
    behavior: np.ndarray
    q_star: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.features.n_sa != self.mdp.n_sa:
            raise ValueError("feature matrix rows must match n_states * n_actions")
        check_sufficient_exploration(self.mdp, self.behavior)
        self.q_star = value_iteration(self.mdp, tol=1e-10)


def default_radius(env: Environment) -> float:
    """Truncation radius max(1, R_max) / (1 - gamma), a box that always
    contains the optimal Q-vector."""
    return max(1.0, env.mdp.r_max) / (1.0 - env.mdp.gamma)


def two_state(gamma: float = 0.9) -> Environment:
    """Two states, two actions: action 0 moves to state 0, action 1 moves to
    state 1, from anywhere. Rewards (1, 2, 2, 4) by idx, features
    Phi = (1, 2, 2, 4)^T, uniform behavior.

    Under the uniform behavior the projected Bellman coefficient recursion is
    theta -> 1 + (6/5) gamma theta on theta >= 0, so it diverges for
    gamma > 5/6 from any positive start.
    """
    transitions = np.zeros((2, 2, 2))
    transitions[0, :, 0] = 1.0
    transitions[1, :, 1] = 1.0
    mdp = Mdp(
        n_states=2,
        n_actions=2,
        gamma=gamma,
        rewards=np.array([1.0, 2.0, 2.0, 4.0]),
        transitions=transitions,
    )
    fm = FeatureMap(phi=np.array([[1.0], [2.0], [2.0], [4.0]]))
    return Environment(name="two_state", mdp=mdp, features=fm, behavior=uniform_policy(mdp))


def baird_features() -> FeatureMap:
    """Default 14-dimensional complete basis for the 7-state star MDP.

    Solid action: the star pattern Q(s_i, solid) = theta_0 + 2 theta_i for the
    six outer states and Q(s_7, solid) = 2 theta_0 + theta_7 at the hub.
    Dash action: one indicator weight per outer state,
    Q(s_i, dash) = theta_{7+i}, and Q(s_7, dash) = theta_0.
    """
    phi = np.zeros((14, 14))
    for i in range(6):
        phi[2 * i + 0, 0] = 1.0
        phi[2 * i + 0, 1 + i] = 2.0
        phi[2 * i + 1, 8 + i] = 1.0
    phi[12, 0] = 2.0
    phi[12, 7] = 1.0
    phi[13, 0] = 1.0
    return FeatureMap(phi=phi)


def baird(gamma: float = 0.99, features: FeatureMap | None = None) -> Environment:
    """Baird's star MDP with Q-learning actions: solid (index 0) jumps to the
    hub state 7 with probability 1, dash (index 1) lands uniformly on the six
    outer states. All rewards are zero, so Q* = 0. Behavior is uniform, giving
    stationary state weights (1/12, ..., 1/12, 1/2).
    """
    n_states, n_actions = 7, 2
    transitions = np.zeros((n_actions, n_states, n_states))
    transitions[0, :, 6] = 1.0
    transitions[1, :, 0:6] = 1.0 / 6.0
    mdp = Mdp(
        n_states=n_states,
        n_actions=n_actions,
        gamma=gamma,
        rewards=np.zeros(n_states * n_actions),
        transitions=transitions,
    )
    fm = features if features is not None else baird_features()
    return Environment(name="baird", mdp=mdp, features=fm, behavior=uniform_policy(mdp))


def tabular(mdp: Mdp, behavior: np.ndarray | None = None, name: str = "tabular") -> Environment:
    """Wrap an MDP with the identity feature basis (one weight per pair)."""
    fm = FeatureMap(phi=np.eye(mdp.n_sa))
    pi = behavior if behavior is not None else uniform_policy(mdp)
    return Environment(name=name, mdp=mdp, features=fm, behavior=pi)


def random_mdp(n_states: int, n_actions: int, gamma: float, seed: int) -> Mdp:
    """Random MDP with dense Dirichlet(1) transition rows (normalized
    exponentials) and uniform [0, 1] rewards. Draw order is transitions first,
    then rewards, so instances are reproducible from the seed alone.
    """
    rng = np.random.default_rng(seed)
    raw = rng.standard_exponential((n_actions, n_states, n_states))
    transitions = raw / raw.sum(axis=2, keepdims=True)
    rewards = rng.random(n_states * n_actions)
    return Mdp(
        n_states=n_states,
        n_actions=n_actions,
        gamma=gamma,
        rewards=rewards,
        transitions=transitions,
    )


def random_tabular(n_states: int, n_actions: int, gamma: float, seed: int) -> Environment:
    """Random MDP wrapped with identity features and uniform behavior."""
    return tabular(
        random_mdp(n_states, n_actions, gamma, seed), name=f"random-{n_states}x{n_actions}-{seed}"
    )


def with_features(env: Environment, fm: FeatureMap) -> Environment:
    return Environment(name=env.name, mdp=env.mdp, features=fm, behavior=env.behavior)


def with_normalized_features(env: Environment) -> Environment:
    return with_features(env, normalize_features(env.features))


def save_environment(env: Environment, path: str) -> None:
    """Write an environment as one JSON file: MDP, features, behavior policy.

    The file round-trips through load_environment and is the format accepted
    by the CLI wherever an environment name is expected.
    """
    payload = {
        "name": env.name,
        "mdp": {
            "n_states": env.mdp.n_states,
            "n_actions": env.mdp.n_actions,
            "gamma": env.mdp.gamma,
            "rewards": env.mdp.rewards.tolist(),
            "transitions": [m.tolist() for m in env.mdp.transitions],
        },
        "features": {"d": env.features.d, "phi": env.features.phi.tolist()},
        "behavior": env.behavior.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_environment(path: str) -> Environment:
    """Read an environment written by save_environment, revalidating every
    invariant on the way in."""
    with open(path) as fh:
        payload = json.load(fh)
    m = payload["mdp"]
    mdp = Mdp(
        n_states=int(m["n_states"]),
        n_actions=int(m["n_actions"]),
        gamma=float(m["gamma"]),
        rewards=np.asarray(m["rewards"], dtype=np.float64),
        transitions=np.asarray(m["transitions"], dtype=np.float64),
    )
    f = payload["features"]
    phi = np.asarray(f["phi"], dtype=np.float64)
    if phi.shape != (mdp.n_sa, int(f["d"])):
        raise ValueError(f"feature matrix shape {phi.shape} does not match d={f['d']}")
    return Environment(
        name=str(payload.get("name", "imported")),
        mdp=mdp,
        features=FeatureMap(phi=phi),
        behavior=np.asarray(payload["behavior"], dtype=np.float64),
    )
