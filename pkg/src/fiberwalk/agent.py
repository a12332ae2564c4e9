"""Actor-critic learner over lattice-basis coefficient actions.

One feature extractor is shared by both heads: the actor head emits a
mean and log standard deviation per coefficient, defining a diagonal
Gaussian whose samples are rounded, clamped to the coefficient bounds
and optionally masked down to the largest few entries; the critic is
the linear map ``features . omega``.  The actor ascends the
GAE-weighted score direction averaged over a rollout window; the
critic descends the squared n-step bootstrap error.  Both parameter
vectors are projected back onto a large ball after every update,
which keeps the iterates bounded, and the two step-size schedules
decay at different rates so the coupled updates behave as a fast/slow
pair.

Log-probabilities are always evaluated at the pre-rounding continuous
sample: the policy density is a Gaussian, and rounding, clamping and
masking belong to the environment's interpretation of the action.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericError, ValidationError
from .neuralnet import (
    DenseNet,
    deserialize_dense,
    make_dense,
    project_to_ball,
    serialize_dense,
)

SIGMA_MIN = 1e-3
SIGMA_MAX = 1e3
DEFAULT_SIGMA_FLOOR = 1.0

DEFAULT_HIDDEN = (64, 64)
DEFAULT_STEP_SCALE = 0.05
MASK_THRESHOLD = 100  # states wider than this default to mask_k=10
DEFAULT_MASK_K = 10


def default_mask_k(state_dim):
    return None if state_dim <= MASK_THRESHOLD else DEFAULT_MASK_K


def default_sigma_min(state_dim):
    """Stddev floor regime, keyed off the same width threshold as masking.

    Small dense problems keep a unit floor so the sampler stays
    exploratory after convergence; wide sparse problems need the
    policy to concentrate almost all coefficients at zero, which a
    floor would forbid.
    """
    return 1.0 if state_dim <= MASK_THRESHOLD else SIGMA_MIN


@dataclass
class ActorCritic:
    feature_net: DenseNet
    actor_head: DenseNet
    critic_weights: np.ndarray
    coeff_min: int = -2
    coeff_max: int = 2
    mask_k: int = None
    ball_radius: float = 1e3
    input_scale: float = 1.0
    sigma_min: float = DEFAULT_SIGMA_FLOOR

    def __post_init__(self):
        if self.actor_head.input_dim != self.feature_net.output_dim:
            raise ContractViolation("actor head does not chain with the feature net")
        if self.actor_head.output_dim % 2 != 0:
            raise ContractViolation("actor head must emit (mean, log-sigma) pairs")
        if len(self.critic_weights) != self.feature_net.output_dim:
            raise ContractViolation("critic weight length must match feature width")
        if self.mask_k is not None and self.mask_k > self.n_coeffs:
            raise ContractViolation("mask_k cannot exceed the coefficient count")
        if self.coeff_min >= self.coeff_max:
            raise ContractViolation("coeff_min must be below coeff_max")

    @property
    def n_coeffs(self):
        return self.actor_head.output_dim // 2

    @property
    def state_dim(self):
        return self.feature_net.input_dim

    @property
    def feature_dim(self):
        return self.feature_net.output_dim

    def actor_params(self):
        return np.concatenate(
            [self.feature_net.param_vector(), self.actor_head.param_vector()]
        )

    def set_actor_params(self, vec):
        split = self.feature_net.n_params
        self.feature_net.set_param_vector(vec[:split])
        self.actor_head.set_param_vector(vec[split:])

    def clone(self):
        return ActorCritic(
            feature_net=self.feature_net.clone(),
            actor_head=self.actor_head.clone(),
            critic_weights=self.critic_weights.copy(),
            coeff_min=self.coeff_min,
            coeff_max=self.coeff_max,
            mask_k=self.mask_k,
            ball_radius=self.ball_radius,
            input_scale=self.input_scale,
            sigma_min=self.sigma_min,
        )


def make_actor_critic(
    state_dim,
    n_coeffs,
    hidden=DEFAULT_HIDDEN,
    seed=0,
    coeff_min=-2,
    coeff_max=2,
    mask_k="auto",
    ball_radius=1e3,
    input_scale=1.0,
    sigma_min="auto",
):
    """Fresh learner with tanh feature layers and a linear actor head.

    ``input_scale`` divides the raw state before the feature net; set
    it near the largest count of the start point so the tanh layers
    see O(1) inputs instead of saturating on raw counts.

    ``sigma_min`` floors the policy stddev.  The reward alone would
    drive the Gaussian toward a deterministic cycle once feasible
    moves are found; the floor keeps the sampler exploratory, which
    fiber discovery and the Metropolis correction both rely on.  Set
    it to 1e-3 to recover an effectively unconstrained policy.
    """
    rng = np.random.default_rng(seed)
    feature_net = make_dense(
        (state_dim, *hidden), ["tanh"] * len(hidden), rng
    )
    actor_head = make_dense((hidden[-1], 2 * n_coeffs), ["identity"], rng)
    if mask_k == "auto":
        mask_k = default_mask_k(state_dim)
    if sigma_min == "auto":
        sigma_min = default_sigma_min(state_dim)
    return ActorCritic(
        feature_net=feature_net,
        actor_head=actor_head,
        critic_weights=np.zeros(hidden[-1]),
        coeff_min=coeff_min,
        coeff_max=coeff_max,
        mask_k=mask_k,
        ball_radius=ball_radius,
        input_scale=float(input_scale),
        sigma_min=float(sigma_min),
    )


def _net_input(ac, state):
    return np.asarray(state, dtype=float) / ac.input_scale


@dataclass(frozen=True)
class PolicySample:
    coeffs: np.ndarray
    log_prob_grad: np.ndarray
    continuous: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    features: np.ndarray


def mask_coefficients(coeffs, mask_k):
    """Keep the mask_k largest(|.|) entries, ties broken by lowest index."""
    if mask_k is None or mask_k >= len(coeffs):
        return coeffs
    order = np.argsort(-np.abs(coeffs), kind="stable")
    out = np.zeros_like(coeffs)
    keep = order[:mask_k]
    out[keep] = coeffs[keep]
    return out


def _head_distribution(ac, head_out):
    c = ac.n_coeffs
    mu = head_out[:c]
    sigma_raw = np.exp(head_out[c:])
    sigma = np.clip(sigma_raw, ac.sigma_min, SIGMA_MAX)
    return mu, sigma, sigma_raw


def policy_distribution(ac, state):
    """Mean and stddev of the coefficient Gaussian at ``state``."""
    feats = ac.feature_net.forward(_net_input(ac, state))
    mu, sigma, _ = _head_distribution(ac, ac.actor_head.forward(feats))
    return mu, sigma


def policy_sample(ac, state, rng, with_grad=True):
    """Draw a coefficient action and (optionally) its score gradient.

    The gradient is d/d(theta) of ln N(z; mu, sigma) at the continuous
    draw ``z``, flowing through the actor head and the shared feature
    extractor; stddev entries pinned by the clamp contribute zero.
    """
    feats, feat_cache = ac.feature_net.forward_cached(_net_input(ac, state))
    head_out, head_cache = ac.actor_head.forward_cached(feats)
    mu, sigma, sigma_raw = _head_distribution(ac, head_out)
    z = rng.normal(mu, sigma)
    rounded = np.clip(np.rint(z), ac.coeff_min, ac.coeff_max).astype(np.int64)
    coeffs = mask_coefficients(rounded, ac.mask_k)

    grad = None
    if with_grad:
        dmu = (z - mu) / sigma**2
        dsigma = (z - mu) ** 2 / sigma**3 - 1.0 / sigma
        unclamped = (sigma_raw > ac.sigma_min) & (sigma_raw < SIGMA_MAX)
        dlog = dsigma * np.where(unclamped, sigma_raw, 0.0)
        head_grad, dfeats = ac.actor_head.backward(
            head_cache, np.concatenate([dmu, dlog])
        )
        feat_grad, _ = ac.feature_net.backward(feat_cache, dfeats)
        grad = np.concatenate([feat_grad, head_grad])
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite policy gradient")
    return PolicySample(
        coeffs=coeffs,
        log_prob_grad=grad,
        continuous=z,
        mu=mu,
        sigma=sigma,
        features=feats,
    )


def gaussian_log_density(z, mu, sigma):
    z, mu, sigma = (np.asarray(v, dtype=float) for v in (z, mu, sigma))
    return float(
        np.sum(-0.5 * math.log(2 * math.pi) - np.log(sigma) - (z - mu) ** 2 / (2 * sigma**2))
    )


def policy_log_density(ac, state, continuous):
    """ln pi(continuous | state) under the current parameters."""
    mu, sigma = policy_distribution(ac, state)
    return gaussian_log_density(continuous, mu, sigma)


def critic_value(ac, state, features=None):
    """State value: inner product of shared features with the critic weights."""
    if features is None:
        features = ac.feature_net.forward(_net_input(ac, state))
    return float(features @ ac.critic_weights)


def compute_gae(rewards, values, bootstrap, gamma, lam):
    """Truncated generalized advantage estimates for one window.

    delta(t) = r_t + gamma*V(t+1) - V(t) with V at the window end given
    by ``bootstrap``; the estimate at t sums (gamma*lam)^l * delta(t+l)
    over the remainder of the window.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape:
        raise ContractViolation("rewards and values must have equal length")
    next_values = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * next_values - values
    adv = np.empty_like(deltas)
    acc = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


@dataclass(frozen=True)
class Trajectory:
    """One rollout window of length K plus the bootstrap state."""

    states: np.ndarray          # (K+1, d)
    features: np.ndarray        # (K+1, m), evaluated at collection time
    coeff_actions: np.ndarray   # (K, c)
    rewards: np.ndarray         # (K,)
    values: np.ndarray          # (K,)
    bootstrap_value: float
    log_prob_grads: np.ndarray  # (K, n_actor_params)

    def __post_init__(self):
        k = len(self.rewards)
        if not (
            len(self.states) == k + 1
            and len(self.features) == k + 1
            and len(self.coeff_actions) == k
            and len(self.values) == k
            and len(self.log_prob_grads) == k
        ):
            raise ContractViolation("trajectory arrays have inconsistent lengths")
        if np.any(np.asarray(self.rewards) > 0):
            raise ContractViolation("rewards cannot be positive in this MDP")


def _capped_step(step_size, direction, max_step):
    step = step_size * direction
    if max_step is not None:
        norm = float(np.linalg.norm(step))
        if norm > max_step:
            step = step * (max_step / norm)
    return step


def actor_update(ac, traj, step_size, gamma, lam, max_step=None):
    """Ascend the window-averaged score direction weighted by GAE.

    ``max_step`` caps the applied step length (direction unchanged);
    penalties scale with the problem dimension, and an uncapped first
    step on a large-reward fiber can throw the means past any
    feasible region before the critic has centered the advantages.
    """
    adv = compute_gae(traj.rewards, traj.values, traj.bootstrap_value, gamma, lam)
    direction = traj.log_prob_grads.T @ adv / len(adv)
    theta = ac.actor_params() + _capped_step(step_size, direction, max_step)
    if not np.all(np.isfinite(theta)):
        raise NumericError("non-finite actor parameters after update")
    ac.set_actor_params(project_to_ball(theta, ac.ball_radius))
    return ac


def critic_update(ac, traj, step_size, gamma, max_step=None):
    """Descend the n-step bootstrap squared error in the critic weights.

    The raw residual-times-feature direction is the gradient of that
    squared error, so it is applied with a negative sign; ``max_step``
    caps the applied step length as in :func:`actor_update`.
    """
    k = len(traj.rewards)
    feats = traj.features
    omega = ac.critic_weights
    end_value = float(feats[k] @ omega)
    targets = np.empty(k)
    acc = end_value
    for t in range(k - 1, -1, -1):
        acc = traj.rewards[t] + gamma * acc
        targets[t] = acc
    residuals = feats[:k] @ omega - targets
    decay = gamma ** (k - np.arange(k))
    direction = (feats[:k] - np.outer(decay, feats[k])).T @ residuals
    omega = omega - _capped_step(step_size, direction, max_step)
    if not np.all(np.isfinite(omega)):
        raise NumericError("non-finite critic weights after update")
    ac.critic_weights = project_to_ball(omega, ac.ball_radius)
    return ac


def default_schedules(actor_scale=DEFAULT_STEP_SCALE, critic_scale=DEFAULT_STEP_SCALE, swap=False):
    """Robbins-Monro pair: t^(-2/3) for the actor, 1/t for the critic.

    ``swap`` exchanges the two decay laws; both pairings satisfy the
    summability conditions, they differ in which iterate is the fast one.
    """
    def power_two_thirds(t):
        return actor_scale / t ** (2.0 / 3.0)

    def harmonic(t):
        return critic_scale / t

    if swap:
        return harmonic, power_two_thirds
    return power_two_thirds, harmonic


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    lam: float = 0.5
    window: int = 8
    episodes: int = 1000
    seed: int = 0
    actor_schedule: object = None
    critic_schedule: object = None
    actor_step_cap: float = 0.1
    critic_step_cap: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ContractViolation("lambda must lie in [0, 1]")
        if self.window < 1:
            raise ContractViolation("window length must be at least 1")
        if self.episodes < 0:
            raise ContractViolation("episode count cannot be negative")

    def schedules(self):
        actor, critic = default_schedules()
        actor = self.actor_schedule or actor
        critic = self.critic_schedule or critic
        for fn in (actor, critic):
            if not (fn(1) > 0 and fn(2) <= fn(1)):
                raise ContractViolation("schedules must be positive and nonincreasing")
        return actor, critic


@dataclass(frozen=True)
class WindowStats:
    window: int
    mean_reward: float
    feasible_fraction: float
    discovered_count: int
    alpha: float
    beta: float


def train(env, ac, cfg, start=None):
    """Run episodic rollouts, updating after every window.

    Each episode restarts from ``start`` (default: the environment's
    current point) while the discovered set keeps accumulating.  The
    schedule argument is the update counter, i.e. the iterate index of
    the two stochastic approximation sequences.  Reproducible: all
    randomness flows from ``cfg.seed``.
    """
    if env.basis.count == 0:
        raise ValidationError("cannot train with an empty move basis")
    if env.basis.count != ac.n_coeffs:
        raise ContractViolation(
            f"policy emits {ac.n_coeffs} coefficients, basis has {env.basis.count}"
        )
    rng = np.random.default_rng(cfg.seed)
    actor_sched, critic_sched = cfg.schedules()
    if start is None:
        start = env.current
    start = np.asarray(start, dtype=np.int64)

    log = []
    n_updates = 0
    steps_per_episode = env.config.steps_per_episode
    for _ in range(cfg.episodes):
        env.reset(start)
        state = env.current
        done = 0
        while done < steps_per_episode:
            k = min(cfg.window, steps_per_episode - done)
            states = [state]
            feats, coeffs, rewards, values, grads = [], [], [], [], []
            feasible_count = 0
            for _ in range(k):
                sample = policy_sample(ac, state, rng)
                outcome = env.step(sample.coeffs)
                feats.append(sample.features)
                values.append(float(sample.features @ ac.critic_weights))
                coeffs.append(sample.coeffs)
                rewards.append(outcome.reward)
                grads.append(sample.log_prob_grad)
                feasible_count += outcome.feasible
                state = outcome.next
                states.append(state)
            end_feats = ac.feature_net.forward(_net_input(ac, state))
            traj = Trajectory(
                states=np.array(states),
                features=np.array(feats + [end_feats]),
                coeff_actions=np.array(coeffs),
                rewards=np.array(rewards),
                values=np.array(values),
                bootstrap_value=float(end_feats @ ac.critic_weights),
                log_prob_grads=np.array(grads),
            )
            n_updates += 1
            alpha = actor_sched(n_updates)
            beta = critic_sched(n_updates)
            critic_update(ac, traj, beta, cfg.gamma, max_step=cfg.critic_step_cap)
            actor_update(ac, traj, alpha, cfg.gamma, cfg.lam, max_step=cfg.actor_step_cap)
            log.append(
                WindowStats(
                    window=n_updates,
                    mean_reward=float(np.mean(rewards)),
                    feasible_fraction=feasible_count / k,
                    discovered_count=env.discovered.count,
                    alpha=alpha,
                    beta=beta,
                )
            )
            done += k
    return log


def write_train_log(path, log):
    """Training log CSV: one row per update window."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["window", "mean_reward", "feasible_fraction", "discovered_count", "alpha", "beta"]
        )
        for row in log:
            writer.writerow(
                [
                    row.window,
                    repr(row.mean_reward),
                    repr(row.feasible_fraction),
                    row.discovered_count,
                    repr(row.alpha),
                    repr(row.beta),
                ]
            )


# ------------------------------------------------------------------
# Policy file format (version 1)
# ------------------------------------------------------------------

def serialize_policy(ac, basis_sha256=None):
    lines = [
        "fiberwalk-policy v1",
        f"coeff_min={ac.coeff_min}",
        f"coeff_max={ac.coeff_max}",
        f"mask_k={'none' if ac.mask_k is None else ac.mask_k}",
        f"ball_radius={repr(float(ac.ball_radius))}",
        f"input_scale={repr(float(ac.input_scale))}",
        f"sigma_min={repr(float(ac.sigma_min))}",
        f"basis_sha256={basis_sha256 or 'none'}",
    ]
    body = serialize_dense(ac.feature_net) + serialize_dense(ac.actor_head)
    critic = [f"critic={len(ac.critic_weights)}"]
    critic.extend(repr(float(v)) for v in ac.critic_weights)
    return "\n".join(lines) + "\n" + body + "\n".join(critic) + "\n"


def _consume_dense(lines, pos):
    if lines[pos] != "fiberwalk-densenet v1":
        raise ValidationError("expected a dense-network block")
    n_layers = int(lines[pos + 1].split("=")[1])
    n_params = int(lines[pos + 2 + n_layers].split("=")[1])
    end = pos + 3 + n_layers + n_params
    return deserialize_dense("\n".join(lines[pos:end])), end


def deserialize_policy(text):
    """Parse a policy file; returns (ActorCritic, basis_sha256 or None)."""
    lines = text.splitlines()
    if not lines or lines[0] != "fiberwalk-policy v1":
        raise ValidationError("not a v1 policy file")
    header = dict(line.split("=", 1) for line in lines[1:8])
    mask = header["mask_k"]
    sha = header["basis_sha256"]
    feature_net, pos = _consume_dense(lines, 8)
    actor_head, pos = _consume_dense(lines, pos)
    n_critic = int(lines[pos].split("=")[1])
    critic = np.array([float(v) for v in lines[pos + 1:pos + 1 + n_critic]])
    ac = ActorCritic(
        feature_net=feature_net,
        actor_head=actor_head,
        critic_weights=critic,
        coeff_min=int(header["coeff_min"]),
        coeff_max=int(header["coeff_max"]),
        mask_k=None if mask == "none" else int(mask),
        ball_radius=float(header["ball_radius"]),
        input_scale=float(header["input_scale"]),
        sigma_min=float(header["sigma_min"]),
    )
    return ac, (None if sha == "none" else sha)
