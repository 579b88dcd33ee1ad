"""Double deep Q-learning agent built on the numpy MLP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..errors import TrainingFailure
from .replay import ReplayBuffer, Transition


@dataclass
class AgentConfig:
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 30_000
    batch_size: int = 64
    buffer_capacity: int = 100_000
    target_sync: int = 500  # optimizer updates between target copies
    lr: float = 1e-3
    hidden: tuple[int, ...] = (64, 64)
    warmup: int = 1000  # transitions stored before learning starts
    updates_per_step: int = 1
    grad_clip: float = 10.0  # global gradient-norm clip, <= 0 disables
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not (0.0 <= self.eps_end <= 1.0 and 0.0 <= self.eps_start <= 1.0):
            raise ValueError("epsilon must lie in [0, 1]")
        self.hidden = tuple(self.hidden)

    def epsilon(self, step: int) -> float:
        if self.eps_decay_steps <= 0:
            return self.eps_end
        if step >= self.eps_decay_steps:
            return self.eps_end
        frac = step / self.eps_decay_steps
        return self.eps_start + frac * (self.eps_end - self.eps_start)


def select_action(net: nn.Mlp, obs: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index.

    One uniform draw is consumed per call so the random stream advances
    identically whatever branch is taken.
    """
    n_actions = net.layer_sizes[-1]
    u = rng.random()
    if u < eps:
        return int(rng.integers(n_actions))
    return int(np.argmax(nn.forward(net, obs)))


def td_targets(online: nn.Mlp, target: nn.Mlp, rewards, next_obs, terminal, gamma: float) -> np.ndarray:
    """Double-Q bootstrap: online net picks the next action, target net scores it."""
    a_star = nn.forward(online, next_obs).argmax(axis=1)
    q_next = nn.forward(target, next_obs)[np.arange(len(a_star)), a_star]
    return rewards + gamma * np.where(terminal, 0.0, q_next)


def _clip(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    if max_norm <= 0:
        return grads
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if norm > max_norm:
        return [g * (max_norm / norm) for g in grads]
    return grads


def td_update(
    online: nn.Mlp,
    target: nn.Mlp,
    batch,
    gamma: float,
    optimizer: nn.AdamState,
    grad_clip: float = 0.0,
) -> float:
    """One squared-error step on the taken actions' Q-values; returns the batch loss."""
    obs, actions, rewards, next_obs, terminal = batch
    if len(actions) == 0:
        raise ValueError("empty batch")
    y = td_targets(online, target, rewards, next_obs, terminal, gamma)
    if not np.all(np.isfinite(y)):
        raise TrainingFailure(f"non-finite TD target after {optimizer.step} updates")
    q_target = np.zeros((len(actions), online.layer_sizes[-1]))
    mask = np.zeros_like(q_target)
    rows = np.arange(len(actions))
    q_target[rows, actions] = y
    mask[rows, actions] = 1.0
    loss, grads = nn.backward(online, obs, q_target, loss="mse", mask=mask)
    if not math.isfinite(loss):
        raise TrainingFailure(f"non-finite TD loss after {optimizer.step} updates (max |y| = {np.abs(y).max():.3g})")
    nn.adam_step(online, _clip(grads, grad_clip), optimizer)
    return loss


@dataclass
class DqnAgent:
    """Online/target networks, optimizer, replay buffer and exploration state for one agent."""

    name: str
    n_obs: int
    n_actions: int
    cfg: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        seed = self.cfg.seed
        self.online = nn.Mlp.create((self.n_obs, *self.cfg.hidden, self.n_actions), seed=seed)
        self.target = self.online.copy()
        self.optimizer = nn.AdamState.for_net(self.online, lr=self.cfg.lr)
        self.buffer = ReplayBuffer(self.cfg.buffer_capacity, self.n_obs, seed=seed + 1)
        self.rng = np.random.default_rng(seed + 2)
        self.steps = 0
        self.updates = 0
        self.losses: list[float] = []

    @property
    def epsilon(self) -> float:
        return self.cfg.epsilon(self.steps)

    def act(self, obs: np.ndarray, greedy: bool = False) -> int:
        eps = 0.0 if greedy else self.epsilon
        return select_action(self.online, obs, eps, self.rng)

    def observe(self, t: Transition) -> float | None:
        """Store a transition and learn if warm; returns the last loss if an update ran."""
        self.buffer.add(t)
        self.steps += 1
        loss = None
        if len(self.buffer) >= max(self.cfg.warmup, 1):
            for _ in range(self.cfg.updates_per_step):
                loss = self.learn()
        return loss

    def learn(self) -> float:
        batch = self.buffer.sample(self.cfg.batch_size)
        loss = td_update(self.online, self.target, batch, self.cfg.gamma, self.optimizer, self.cfg.grad_clip)
        self.updates += 1
        if self.updates % self.cfg.target_sync == 0:
            self.sync_target()
        self.losses.append(loss)
        return loss

    def sync_target(self) -> None:
        self.target.load_from(self.online)

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        return nn.forward(self.online, obs)
