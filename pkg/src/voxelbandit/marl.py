# src/voxelbandit/marl.py
"""
Multi-agent learners for the bandit problem.

Every voxel is an agent conditioned on its positional encoding; network
parameters are shared between agents.

- IQL: per-agent critic C(O(i), a_i) regressed onto the joint payoff, eps-greedy.
- BAC: centralized critic C(a) plus a policy trained by straight-through
  gradient ascent on the critic, with agent masking and periodic resets.
  The critic pools per-agent features over a_i alone or over the 3x3
  neighbourhood of a_i.
- BPPO: critic-free PPO whose advantage is the payoff minus the rollout mean,
  scaled to unit std by default.

Policies are either the positional MLP or a flat vector of per-agent logits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import ClassVar, List, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .core import (
    Budget,
    Design,
    ExperienceBuffer,
    GridShape,
    Optimizer,
    PayoffEnvironment,
    SeedStreams,
)
from .errors import ShapeMismatch
from .models import BacConfig, BppoConfig, IqlConfig
from .posenc import PositionalEncoder
from .tinynn import (
    AdamState,
    MlpCache,
    MlpModel,
    StraightThrough,
    adam_step,
    mse_loss,
    reinitialize,
    straight_through,
)

logger = logging.getLogger(__name__)


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(p_n) draws, one per agent."""
    return (rng.random(probs.shape) < probs).astype(np.int8)


@dataclass
class FlatPolicy:
    """
    One learnable logit per agent, pi(a=1) = sigmoid(logit).

    The encoding matrix is only checked for its row count, so this is a
    drop-in replacement for the positional MLP policy.
    """
    logits: np.ndarray

    @classmethod
    def create(cls, n_agents: int) -> "FlatPolicy":
        return cls(np.zeros(int(n_agents)))

    def parameters(self) -> List[np.ndarray]:
        return [self.logits]

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.logits.size:
            raise ShapeMismatch(
                f"Expected {self.logits.size} encoding rows, got shape {x.shape}"
            )
        return x

    def forward_cache(self, x: np.ndarray) -> MlpCache:
        x = self._check_input(x)
        z = self.logits[:, None].copy()
        return MlpCache(inputs=[x], preacts=[z], output=expit(z))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cache(x).output

    def backward(
        self, x: np.ndarray, upstream: np.ndarray, cache: MlpCache | None = None
    ) -> Tuple[List[np.ndarray], np.ndarray]:
        x = self._check_input(x)
        if cache is None:
            cache = self.forward_cache(x)
        g = np.asarray(upstream, dtype=float)
        if g.shape != cache.output.shape:
            raise ShapeMismatch(
                f"Upstream gradient shape {g.shape} does not match output {cache.output.shape}"
            )
        s = cache.output
        return [(g * s * (1.0 - s))[:, 0]], np.zeros_like(x)


Policy = Union[MlpModel, FlatPolicy]


def policy_probs(policy: Policy, encodings: np.ndarray) -> np.ndarray:
    """pi(a=1 | O(n)) for every agent."""
    return policy.forward(encodings)[:, 0]


def make_policy(
    encoder: PositionalEncoder, hidden: Sequence[int], seed, kind: str = "mlp"
) -> Policy:
    if kind == "flat":
        return FlatPolicy.create(encoder.shape.size)
    return MlpModel.create([encoder.dim, *hidden, 1], seed, output_head="sigmoid")


def reinitialize_policy(policy: Policy, seed) -> Policy:
    if isinstance(policy, FlatPolicy):
        return FlatPolicy.create(policy.logits.size)
    return reinitialize(policy, seed)


# ---------------------------------------------------------------------------
# IQL
# ---------------------------------------------------------------------------

def epsilon_schedule(t: float, total: int, cfg: IqlConfig | None = None) -> float:
    """Linear from eps_start at t=0 to eps_end at t=fraction*total, constant after."""
    cfg = cfg or IqlConfig()
    anneal = cfg.eps_anneal_fraction * total
    if t >= anneal:
        return cfg.eps_end
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * (t / anneal)


def iql_inputs(encodings: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """(B, N) actions -> (B*N, dim+1) rows of [O(i), a_i]."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    b, n = actions.shape
    enc = np.broadcast_to(encodings, (b, n, encodings.shape[1]))
    return np.concatenate([enc, actions[..., None]], axis=2).reshape(b * n, -1)


def iql_greedy_actions(critic: MlpModel, encodings: np.ndarray) -> np.ndarray:
    """argmax_a C(O(i), a); a tie picks action 0."""
    n = encodings.shape[0]
    q0 = critic.forward(iql_inputs(encodings, np.zeros((1, n))))[:, 0]
    q1 = critic.forward(iql_inputs(encodings, np.ones((1, n))))[:, 0]
    return (q1 > q0).astype(np.int8)


def iql_update(
    critic: MlpModel,
    adam: AdamState,
    buffer: ExperienceBuffer,
    encodings: np.ndarray,
    cfg: IqlConfig,
    rng: np.random.Generator,
) -> float:
    """One Adam step on mean_i (C(O(i), a_i) - r)^2 over a sampled batch; returns the loss."""
    actions, payoffs = buffer.sample_arrays(cfg.batch, rng)
    x = iql_inputs(encodings, actions)
    cache = critic.forward_cache(x)
    targets = np.repeat(payoffs, encodings.shape[0])
    loss, grad = mse_loss(cache.output[:, 0], targets)
    grads, _ = critic.backward(x, grad[:, None], cache)
    adam_step(critic.parameters(), grads, adam, cfg.lr)
    return loss


class IndependentQLearning(Optimizer):
    name: ClassVar[str] = "iql"

    def __init__(self, cfg: IqlConfig | None = None) -> None:
        self.cfg = cfg or IqlConfig()

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        super().reset(env, budget, streams)
        self.encoder = PositionalEncoder(self.shape, self.cfg.bands)
        self.encodings = self.encoder.matrix()
        self.critic = MlpModel.create(
            [self.encoder.dim + 1, *self.cfg.hidden, 1], streams.critic_init
        )
        self.adam = AdamState.zeros_like(self.critic.parameters(), nesterov=self.cfg.nesterov)
        self.buffer = ExperienceBuffer(self.cfg.buffer)
        self.buffer_rng = streams.buffer

    def propose(self, step: int) -> Design:
        n = self.shape.size
        eps = epsilon_schedule(step - 1, self.budget.total_evaluations, self.cfg)
        greedy = iql_greedy_actions(self.critic, self.encodings)
        explore = self.rng.random(n) < eps
        random_bits = self.rng.integers(0, 2, size=n, dtype=np.int8)
        return Design(bits=np.where(explore, random_bits, greedy), shape=self.shape)

    def observe(self, design: Design, payoff: float) -> None:
        self.buffer.push(design, payoff)
        for _ in range(self.cfg.updates_per_step):
            iql_update(self.critic, self.adam, self.buffer, self.encodings, self.cfg,
                       self.buffer_rng)


# ---------------------------------------------------------------------------
# BAC critics
# ---------------------------------------------------------------------------

class Critic(Protocol):
    def value_and_action_grad(self, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(B, N) actions -> values (B,) and dC/da (B, N)."""
        ...


@dataclass
class PooledCritic:
    """
    C(a) = head(mean_i trunk([O(i), a_i])).

    The trunk is shared by all agents; mean pooling keeps the critic size
    independent of N.
    """
    trunk: MlpModel
    head: MlpModel
    encodings: np.ndarray
    action_width: ClassVar[int] = 1

    @classmethod
    def create(cls, encodings: np.ndarray, hidden: Sequence[int], seed, **extra) -> "PooledCritic":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        width = hidden[-1]
        trunk = MlpModel.create([encodings.shape[1] + cls.action_width, *hidden], rng)
        head = MlpModel.create([width, width, 1], rng)
        return cls(trunk=trunk, head=head, encodings=encodings, **extra)

    def parameters(self) -> List[np.ndarray]:
        return self.trunk.parameters() + self.head.parameters()

    def reinitialize(self, seed) -> "PooledCritic":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return replace(self, trunk=reinitialize(self.trunk, rng), head=reinitialize(self.head, rng))

    def agent_inputs(self, actions: np.ndarray) -> np.ndarray:
        return iql_inputs(self.encodings, actions)

    def action_grad(self, d_x: np.ndarray, b: int, n: int) -> np.ndarray:
        return d_x[:, -1].reshape(b, n)

    def forward_cache(self, actions: np.ndarray) -> Tuple[np.ndarray, Tuple[MlpCache, MlpCache]]:
        actions = np.atleast_2d(actions)
        b, n = actions.shape
        trunk_cache = self.trunk.forward_cache(self.agent_inputs(actions))
        pooled = trunk_cache.output.reshape(b, n, -1).mean(axis=1)
        head_cache = self.head.forward_cache(pooled)
        return head_cache.output[:, 0], (trunk_cache, head_cache)

    def backward(
        self, actions: np.ndarray, upstream: np.ndarray, caches: Tuple[MlpCache, MlpCache]
    ) -> Tuple[List[np.ndarray], np.ndarray]:
        actions = np.atleast_2d(actions)
        b, n = actions.shape
        trunk_cache, head_cache = caches
        head_grads, d_pooled = self.head.backward(
            head_cache.inputs[0], np.asarray(upstream, dtype=float)[:, None], head_cache
        )
        d_feat = np.broadcast_to(d_pooled[:, None, :] / n, (b, n, d_pooled.shape[1]))
        trunk_grads, d_x = self.trunk.backward(
            trunk_cache.inputs[0], d_feat.reshape(b * n, -1), trunk_cache
        )
        return trunk_grads + head_grads, self.action_grad(d_x, b, n)

    def value_and_action_grad(self, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values, caches = self.forward_cache(actions)
        _, d_a = self.backward(actions, np.ones_like(values), caches)
        return values, d_a


NEIGHBOURHOOD = [(dy, dx) for dy in range(3) for dx in range(3)]


def neighbourhood_actions(actions: np.ndarray, shape: GridShape) -> np.ndarray:
    """(B, N) actions -> (B, N, 9) in-plane 3x3 patches, zero outside the grid."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    b = actions.shape[0]
    grid = actions.reshape(b, shape.nz, shape.ny, shape.nx)
    padded = np.pad(grid, ((0, 0), (0, 0), (1, 1), (1, 1)))
    patches = [padded[:, :, dy:dy + shape.ny, dx:dx + shape.nx] for dy, dx in NEIGHBOURHOOD]
    return np.stack(patches, axis=-1).reshape(b, shape.size, len(NEIGHBOURHOOD))


def neighbourhood_grad(d_patches: np.ndarray, shape: GridShape) -> np.ndarray:
    """Adjoint of neighbourhood_actions: (B, N, 9) -> (B, N)."""
    b = d_patches.shape[0]
    d = d_patches.reshape(b, shape.nz, shape.ny, shape.nx, len(NEIGHBOURHOOD))
    padded = np.zeros((b, shape.nz, shape.ny + 2, shape.nx + 2))
    for k, (dy, dx) in enumerate(NEIGHBOURHOOD):
        padded[:, :, dy:dy + shape.ny, dx:dx + shape.nx] += d[..., k]
    return padded[:, :, 1:-1, 1:-1].reshape(b, shape.size)


@dataclass
class LocalCritic(PooledCritic):
    """
    Pooled critic whose per-agent input carries the 3x3 in-plane neighbourhood
    of actions instead of a_i alone: C(a) = head(mean_i trunk([O(i), a_nb(i)])).

    Payoffs that are means of local terms (Game of Life) are representable.
    """
    shape: GridShape | None = None
    action_width: ClassVar[int] = len(NEIGHBOURHOOD)

    def __post_init__(self) -> None:
        if self.shape is None or self.shape.size != self.encodings.shape[0]:
            raise ShapeMismatch("LocalCritic needs the grid shape of its encodings")

    def agent_inputs(self, actions: np.ndarray) -> np.ndarray:
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        b, n = actions.shape
        enc = np.broadcast_to(self.encodings, (b, n, self.encodings.shape[1]))
        patches = neighbourhood_actions(actions, self.shape)
        return np.concatenate([enc, patches], axis=2).reshape(b * n, -1)

    def action_grad(self, d_x: np.ndarray, b: int, n: int) -> np.ndarray:
        width = self.action_width
        return neighbourhood_grad(d_x[:, -width:].reshape(b, n, width), self.shape)


@dataclass
class FlatCritic:
    """C(a) = MLP(a) on the raw joint action, without positional structure."""
    net: MlpModel

    @classmethod
    def create(cls, n_agents: int, hidden: Sequence[int], seed) -> "FlatCritic":
        return cls(MlpModel.create([n_agents, *hidden, 1], seed))

    def parameters(self) -> List[np.ndarray]:
        return self.net.parameters()

    def reinitialize(self, seed) -> "FlatCritic":
        return FlatCritic(reinitialize(self.net, seed))

    def forward_cache(self, actions: np.ndarray) -> Tuple[np.ndarray, MlpCache]:
        cache = self.net.forward_cache(np.atleast_2d(actions))
        return cache.output[:, 0], cache

    def backward(
        self, actions: np.ndarray, upstream: np.ndarray, cache: MlpCache
    ) -> Tuple[List[np.ndarray], np.ndarray]:
        return self.net.backward(np.atleast_2d(actions),
                                 np.asarray(upstream, dtype=float)[:, None], cache)

    def value_and_action_grad(self, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values, cache = self.forward_cache(actions)
        _, d_a = self.backward(actions, np.ones_like(values), cache)
        return values, d_a


def mask_count(n_agents: int, mask_fraction: float) -> int:
    return int(round(mask_fraction * n_agents))


def mask_agent_gradients(grad: np.ndarray, n_masked: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of grad with a fresh uniform subset of n_masked agents set to zero."""
    out = np.array(grad, dtype=float, copy=True)
    if n_masked:
        out[rng.choice(out.size, size=n_masked, replace=False)] = 0.0
    return out


def bac_critic_update(
    critic: PooledCritic | FlatCritic,
    adam: AdamState,
    buffer: ExperienceBuffer,
    cfg: BacConfig,
    rng: np.random.Generator,
    steps: int | None = None,
) -> List[float]:
    """Adam steps on the critic regression error; returns the loss before each step."""
    steps = cfg.critic_steps if steps is None else steps
    losses: List[float] = []
    for _ in range(steps):
        actions, payoffs = buffer.sample_arrays(cfg.batch, rng)
        values, cache = critic.forward_cache(actions)
        loss, grad = mse_loss(values, payoffs)
        grads, _ = critic.backward(actions, grad, cache)
        adam_step(critic.parameters(), grads, adam, cfg.critic_lr)
        losses.append(loss)
    return losses


def bac_policy_improve(
    policy: Policy,
    critic: Critic,
    encodings: np.ndarray,
    cfg: BacConfig,
    rng: np.random.Generator,
    init_seed=None,
    reinit: bool = True,
    adam: AdamState | None = None,
) -> Tuple[Policy, AdamState]:
    """
    Optionally reinitialize the policy, then G straight-through ascent steps on C(a).

    Each step samples a ~ pi, takes dC/da at the sample as dC/dpi, and zeroes
    that gradient for a fresh random subset of round(m*N) agents. Adam state
    starts fresh after a reinitialization or when none is passed in.
    """
    if reinit:
        policy = reinitialize_policy(policy, init_seed if init_seed is not None else rng)
    if reinit or adam is None:
        adam = AdamState.zeros_like(policy.parameters(), nesterov=cfg.nesterov)
    n = encodings.shape[0]
    n_masked = mask_count(n, cfg.mask_fraction)
    for _ in range(cfg.policy_steps):
        cache = policy.forward_cache(encodings)
        probs = cache.output[:, 0]
        actions = straight_through(sample_actions(probs, rng), probs)
        _, d_a = critic.value_and_action_grad(actions[None, :])
        d_p = mask_agent_gradients(StraightThrough.backward(d_a[0]), n_masked, rng)
        grads, _ = policy.backward(encodings, -d_p[:, None], cache)
        adam_step(policy.parameters(), grads, adam, cfg.policy_lr)
    return policy, adam


class BanditActorCritic(Optimizer):
    name: ClassVar[str] = "bac"

    def __init__(self, cfg: BacConfig | None = None) -> None:
        self.cfg = cfg or BacConfig()

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        super().reset(env, budget, streams)
        self.encoder = PositionalEncoder(self.shape, self.cfg.bands)
        self.encodings = self.encoder.matrix()
        self.init_rng = streams.policy_init
        self.critic_init_rng = streams.critic_init
        self.policy = make_policy(self.encoder, self.cfg.policy_hidden, self.init_rng,
                                  self.cfg.policy)
        self.critic = self._new_critic()
        self.critic_adam = AdamState.zeros_like(self.critic.parameters(), nesterov=self.cfg.nesterov)
        self.buffer = ExperienceBuffer(self.cfg.buffer)
        self.buffer_rng = streams.buffer
        self.policy_adam: AdamState | None = None
        self.rounds = 0

    def _new_critic(self) -> PooledCritic | FlatCritic:
        if self.cfg.critic_kind == "flat":
            return FlatCritic.create(self.shape.size, self.cfg.critic_hidden, self.critic_init_rng)
        if self.cfg.critic_kind == "local":
            return LocalCritic.create(self.encodings, self.cfg.critic_hidden,
                                      self.critic_init_rng, shape=self.shape)
        return PooledCritic.create(self.encodings, self.cfg.critic_hidden, self.critic_init_rng)

    def propose(self, step: int) -> Design:
        if len(self.buffer) < self.cfg.warmup:
            return Design.random(self.shape, self.rng)
        probs = policy_probs(self.policy, self.encodings)
        return Design(bits=sample_actions(probs, self.rng), shape=self.shape)

    def observe(self, design: Design, payoff: float) -> None:
        self.buffer.push(design, payoff)
        if len(self.buffer) < self.cfg.warmup:
            return
        self.rounds += 1
        steps = self.cfg.critic_steps
        period = self.cfg.critic_reinit_period
        if period and self.rounds % period == 0:
            self.critic = self.critic.reinitialize(self.critic_init_rng)
            self.critic_adam = AdamState.zeros_like(self.critic.parameters(),
                                                    nesterov=self.cfg.nesterov)
            steps *= self.cfg.reinit_burst_multiplier
            logger.info("bac critic reinitialized at round %d, %d critic steps",
                        self.rounds, steps)
        bac_critic_update(self.critic, self.critic_adam, self.buffer, self.cfg,
                          self.buffer_rng, steps)
        policy_period = self.cfg.policy_reinit_period
        reinit = bool(policy_period) and (self.rounds - 1) % policy_period == 0
        self.policy, self.policy_adam = bac_policy_improve(
            self.policy, self.critic, self.encodings, self.cfg, self.rng,
            init_seed=self.init_rng, reinit=reinit, adam=self.policy_adam,
        )


# ---------------------------------------------------------------------------
# BPPO
# ---------------------------------------------------------------------------

def clipped_objective(ratio: np.ndarray | float, advantage: np.ndarray | float,
                      clip: float) -> np.ndarray:
    ratio = np.asarray(ratio, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantage)


def bernoulli_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), 1e-12, 1.0 - 1e-12)
    return -(p * np.log(p) + (1.0 - p) * np.log(1.0 - p))


def rollout_advantages(payoffs: np.ndarray, normalize: bool = False) -> np.ndarray:
    """r_k minus the rollout-mean baseline, optionally scaled to unit std."""
    payoffs = np.asarray(payoffs, dtype=float)
    advantages = payoffs - payoffs.mean()
    if normalize:
        advantages = advantages / (advantages.std() + 1e-8)
    return advantages


def bppo_objective_grad(
    probs: np.ndarray,
    old_probs: np.ndarray,
    agents: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    cfg: BppoConfig,
) -> Tuple[float, np.ndarray]:
    """
    Mean clipped surrogate plus entropy bonus over (agent, action, advantage)
    samples, and its gradient w.r.t. every agent's pi(a=1).
    """
    p = probs[agents]
    p_old = old_probs[agents]
    is_one = actions == 1
    pi = np.where(is_one, p, 1.0 - p)
    pi_old = np.where(is_one, p_old, 1.0 - p_old)
    ratio = pi / pi_old
    surrogate = clipped_objective(ratio, advantages, cfg.clip)
    entropy = bernoulli_entropy(p)
    objective = float(np.mean(surrogate + cfg.entropy_coef * entropy))

    active = np.where(advantages >= 0, ratio < 1.0 + cfg.clip, ratio > 1.0 - cfg.clip)
    d_pi_d_p = np.where(is_one, 1.0, -1.0)
    d_surr = np.where(active, advantages * d_pi_d_p / pi_old, 0.0)
    pc = np.clip(p, 1e-12, 1.0 - 1e-12)
    d_ent = np.log((1.0 - pc) / pc)
    per_sample = (d_surr + cfg.entropy_coef * d_ent) / agents.size
    grad = np.bincount(agents, weights=per_sample, minlength=probs.size)
    return objective, grad


def bppo_update(
    policy: Policy,
    adam: AdamState,
    encodings: np.ndarray,
    rollout: np.ndarray,
    payoffs: np.ndarray,
    cfg: BppoConfig,
    rng: np.random.Generator,
) -> List[float]:
    """updates_per_rollout ascent steps with pi_old frozen; returns objectives."""
    k, n = rollout.shape
    old_probs = policy_probs(policy, encodings)
    advantages = rollout_advantages(payoffs, cfg.normalize_advantages)
    total = k * n
    size = min(cfg.minibatch, total)
    objectives: List[float] = []
    for _ in range(cfg.updates_per_rollout):
        flat = rng.choice(total, size=size, replace=False) if size < total else np.arange(total)
        rows, agents = np.divmod(flat, n)
        cache = policy.forward_cache(encodings)
        obj, d_p = bppo_objective_grad(
            cache.output[:, 0], old_probs, agents, rollout[rows, agents], advantages[rows], cfg
        )
        grads, _ = policy.backward(encodings, -d_p[:, None], cache)
        adam_step(policy.parameters(), grads, adam, cfg.lr)
        objectives.append(obj)
    return objectives


def sample_rollout(
    policy: Policy, encodings: np.ndarray, size: int, rng: np.random.Generator
) -> np.ndarray:
    """(size, N) joint actions drawn from the current policy."""
    probs = policy_probs(policy, encodings)
    return np.stack([sample_actions(probs, rng) for _ in range(size)])


def bppo_rollout_and_update(
    policy: Policy,
    adam: AdamState,
    encodings: np.ndarray,
    env: PayoffEnvironment,
    cfg: BppoConfig,
    rng: np.random.Generator,
) -> Tuple[Policy, List[Tuple[Design, float]]]:
    """Sample rollout_size designs from pi_old, evaluate them in order, update."""
    rollout = sample_rollout(policy, encodings, cfg.rollout_size, rng)
    records = []
    for bits in rollout:
        design = Design(bits=bits, shape=env.shape)
        records.append((design, env.evaluate(design)))
    payoffs = np.array([r for _, r in records])
    bppo_update(policy, adam, encodings, rollout, payoffs, cfg, rng)
    return policy, records


class BanditPPO(Optimizer):
    """
    Propose/observe wrapper around bppo_rollout_and_update: a rollout is drawn
    at its first propose() and the update runs after its last observe().
    """
    name: ClassVar[str] = "bppo"

    def __init__(self, cfg: BppoConfig | None = None) -> None:
        self.cfg = cfg or BppoConfig()

    def reset(self, env: PayoffEnvironment, budget: Budget, streams: SeedStreams) -> None:
        super().reset(env, budget, streams)
        self.encoder = PositionalEncoder(self.shape, self.cfg.bands)
        self.encodings = self.encoder.matrix()
        self.policy = make_policy(self.encoder, self.cfg.hidden, streams.policy_init,
                                  self.cfg.policy)
        self.adam = AdamState.zeros_like(self.policy.parameters(), nesterov=self.cfg.nesterov)
        self._rollout: np.ndarray | None = None
        self._payoffs: List[float] = []
        self.rollouts_done = 0

    def propose(self, step: int) -> Design:
        if self._rollout is None:
            self._rollout = sample_rollout(self.policy, self.encodings, self.cfg.rollout_size,
                                           self.rng)
            self._payoffs = []
        return Design(bits=self._rollout[len(self._payoffs)].copy(), shape=self.shape)

    def observe(self, design: Design, payoff: float) -> None:
        self._payoffs.append(payoff)
        if self._rollout is not None and len(self._payoffs) == self.cfg.rollout_size:
            payoffs = np.array(self._payoffs)
            bppo_update(self.policy, self.adam, self.encodings, self._rollout, payoffs,
                        self.cfg, self.rng)
            self.rollouts_done += 1
            logger.info("bppo rollout %d mean payoff %.6f", self.rollouts_done,
                        float(payoffs.mean()))
            self._rollout = None
