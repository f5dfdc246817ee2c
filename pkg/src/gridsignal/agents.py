"""Control policies: fixed-time baseline, feedback heuristic, TD learner.

The TD learner is a compact replay-based Q-learner over the flattened state
matrix, with the 2 x 32 hidden architecture, a hard-synced target network,
and hand-rolled backprop so gradients can be audited against finite
differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .network import NetworkTopology
from .signals import SPLIT_LOWER, SPLIT_STEP, SPLIT_UPPER

CHECKPOINT_FORMAT_VERSION = 1

_DELTA_SLOT = {-SPLIT_STEP: 0, 0: 1, SPLIT_STEP: 2}


class AgentError(RuntimeError):
    pass


def encode_action(intersection: int, delta: int) -> int:
    return intersection * 3 + _DELTA_SLOT[delta]


class FixedTimeAgent:
    """Never touches the signals: the canonical no-op policy."""

    def act(self, state: np.ndarray) -> int:
        return encode_action(0, 0)

    def observe(self, *transition) -> None:
        pass


class FeedbackAgent:
    """Inflow/outflow feedback rule on the most congested link.

    For an east-west link the remedies are: raise the upstream split (shrinks
    the inflow green) or lower the downstream split (grows the outflow green);
    for a north-south link both deltas invert. The candidate with more
    remaining travel toward its split bound wins, upstream on ties.
    """

    def __init__(self, topology: NetworkTopology, q_lc: int = 10, q_ub: int = 50):
        self.topology = topology
        self.q_lc = q_lc
        self.q_ub = q_ub

    def act(self, state: np.ndarray) -> int:
        best_link = None
        best_q = -1.0
        for link in sorted(self.topology.inter_links, key=lambda l: l.id):
            q = state[link.from_index, link.to_index] * self.q_ub
            if q > best_q:
                best_q = q
                best_link = link
        if best_link is None or best_q < self.q_lc:
            return encode_action(0, 0)

        splits = [
            round(state[i, i] * (SPLIT_UPPER - SPLIT_LOWER) + SPLIT_LOWER)
            for i in range(self.topology.num_intersections)
        ]
        if best_link.orientation in ("eastbound", "westbound"):
            up_delta, down_delta = SPLIT_STEP, -SPLIT_STEP
        else:
            up_delta, down_delta = -SPLIT_STEP, SPLIT_STEP
        candidates = [
            (best_link.from_index, up_delta),
            (best_link.to_index, down_delta),
        ]

        def headroom(inter_idx: int, delta: int) -> int:
            split = splits[inter_idx]
            return SPLIT_UPPER - split if delta > 0 else split - SPLIT_LOWER

        up_room = headroom(*candidates[0])
        down_room = headroom(*candidates[1])
        chosen = candidates[0] if up_room >= down_room else candidates[1]
        if headroom(*chosen) == 0:
            return encode_action(0, 0)
        return encode_action(*chosen)

    def observe(self, *transition) -> None:
        pass


class QNetwork:
    """Fully connected [n_in, 32, 32, n_out] network with rectifier hiddens."""

    HIDDEN = 32

    def __init__(self, n_in: int, n_out: int, seed: int = 0):
        self.n_in = n_in
        self.n_out = n_out
        rng = np.random.default_rng(seed)
        sizes = [n_in, self.HIDDEN, self.HIDDEN, n_out]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.forward(x[None, :])[0]
        if x.shape[1] != self.n_in:
            raise AgentError(f"input length {x.shape[1]} != {self.n_in}")
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def loss(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
        q = self.forward(states)
        picked = q[np.arange(len(actions)), actions]
        return float(np.mean((picked - targets) ** 2))

    def loss_and_grad(
        self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
    ) -> tuple[float, list[np.ndarray]]:
        """Mean squared TD-error loss and its gradient per parameter array."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        n = len(states)
        # forward, keeping pre-activations
        acts = [states]
        h = states
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        out = h @ self.weights[-1] + self.biases[-1]

        picked = out[np.arange(n), actions]
        diff = picked - targets
        loss = float(np.mean(diff**2))

        d_out = np.zeros_like(out)
        d_out[np.arange(n), actions] = 2.0 * diff / n

        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = d_out
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (acts[layer] > 0)
        return loss, grads_w + grads_b

    def copy_from(self, other: "QNetwork") -> None:
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]


class Adam:
    """Adam optimizer over a parameter list (updates in place)."""

    def __init__(self, params: list[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    truncated: bool


class ReplayBuffer:
    """Uniform-sampling ring buffer."""

    def __init__(self, capacity: int = 50_000, seed: int = 0):
        self.capacity = capacity
        self._storage: list[Transition] = []
        self._pos = 0
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self._storage)

    def push(self, transition: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(transition)
        else:
            self._storage[self._pos] = transition
        self._pos = (self._pos + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Transition]:
        if len(self._storage) < batch_size:
            raise AgentError(f"buffer holds {len(self._storage)} < batch {batch_size}")
        idx = self._rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]


@dataclass
class TDHyperparams:
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 50_000
    target_sync_every: int = 500
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 50


class TDAgent:
    """Replay-based temporal-difference learner over the flattened state."""

    def __init__(
        self,
        num_intersections: int,
        hyperparams: Optional[TDHyperparams] = None,
        seed: int = 0,
    ):
        self.m = num_intersections
        self.hp = hyperparams or TDHyperparams()
        ss = np.random.SeedSequence(seed)
        net_seed, buf_seed, act_seed = (int(s) for s in ss.generate_state(3))
        self.q_net = QNetwork(num_intersections**2, 3 * num_intersections, seed=net_seed)
        self.target_net = QNetwork(num_intersections**2, 3 * num_intersections, seed=net_seed)
        self.target_net.copy_from(self.q_net)
        self.buffer = ReplayBuffer(self.hp.buffer_capacity, seed=buf_seed)
        self.optimizer = Adam(self.q_net.parameters(), lr=self.hp.lr)
        self._rng = np.random.default_rng(act_seed)
        self.updates = 0
        self.episodes_seen = 0

    def epsilon(self) -> float:
        hp = self.hp
        frac = min(self.episodes_seen / hp.epsilon_decay_episodes, 1.0)
        return hp.epsilon_end + (1.0 - frac) * (hp.epsilon_start - hp.epsilon_end)

    def act(self, state: np.ndarray, epsilon: Optional[float] = None) -> int:
        eps = self.epsilon() if epsilon is None else epsilon
        n_actions = 3 * self.m
        if self._rng.random() < eps:
            return int(self._rng.integers(0, n_actions))
        q = self.q_net.forward(np.asarray(state).ravel())
        return int(np.argmax(q))

    def observe(self, state, action, reward, next_state, truncated) -> None:
        self.buffer.push(
            Transition(
                state=np.asarray(state).ravel().copy(),
                action=int(action),
                reward=float(reward),
                next_state=np.asarray(next_state).ravel().copy(),
                truncated=bool(truncated),
            )
        )
        if truncated:
            self.episodes_seen += 1

    def train_step(self) -> float:
        batch = self.buffer.sample(self.hp.batch_size)
        states = np.stack([t.state for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        next_states = np.stack([t.next_state for t in batch])
        # Time-limit truncation is not termination: the bootstrap term stays.
        next_q = self.target_net.forward(next_states).max(axis=1)
        targets = rewards + self.hp.gamma * next_q
        loss, grads = self.q_net.loss_and_grad(states, actions, targets)
        self.optimizer.step(grads)
        self.updates += 1
        if self.updates % self.hp.target_sync_every == 0:
            self.target_net.copy_from(self.q_net)
        return loss

    # -- checkpointing -------------------------------------------------------

    def save(self, path: str) -> None:
        meta = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "num_intersections": self.m,
            "hyperparams": vars(self.hp),
            "updates": self.updates,
            "episodes_seen": self.episodes_seen,
        }
        arrays = {f"w{i}": w for i, w in enumerate(self.q_net.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.q_net.biases)})
        arrays.update({f"tw{i}": w for i, w in enumerate(self.target_net.weights)})
        arrays.update({f"tb{i}": b for i, b in enumerate(self.target_net.biases)})
        np.savez(path, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path: str) -> "TDAgent":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["meta"]))
        if meta["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise AgentError(f"unsupported checkpoint version {meta['format_version']}")
        agent = cls(meta["num_intersections"], TDHyperparams(**meta["hyperparams"]))
        agent.q_net.weights = [data[f"w{i}"] for i in range(3)]
        agent.q_net.biases = [data[f"b{i}"] for i in range(3)]
        agent.target_net.weights = [data[f"tw{i}"] for i in range(3)]
        agent.target_net.biases = [data[f"tb{i}"] for i in range(3)]
        agent.optimizer = Adam(agent.q_net.parameters(), lr=agent.hp.lr)
        agent.updates = meta["updates"]
        agent.episodes_seen = meta["episodes_seen"]
        return agent


def finite_difference_grads(
    net: QNetwork, states, actions, targets, h: float = 1e-4
) -> list[np.ndarray]:
    """Central-difference gradient of the TD loss, for auditing backprop."""
    grads = []
    for param in net.parameters():
        grad = np.zeros_like(param)
        flat = param.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = net.loss(states, actions, targets)
            flat[i] = orig - h
            down = net.loss(states, actions, targets)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(grad)
    return grads
