"""Actor-critic policy: a shared tanh MLP (two hidden layers of 64) whose last
layer emits the 7 action means plus the value estimate, with a state-independent
log standard deviation. Forward and backward passes are explicit numpy so the
training gradients can be checked against finite differences.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_STD_INIT = -0.5
OBS_CLIP = 10.0
POLICY_FORMAT = "caresim-policy/1"

LOG_2PI = math.log(2.0 * math.pi)


class PolicyError(ValueError):
    pass


class ObsDimMismatch(PolicyError):
    pass


@dataclass
class PolicyNet:
    """Weights as a list of (W, b) with W shaped (fan_in, fan_out); the output
    layer has action_dim + 1 columns (means, then value)."""

    layer_dims: list[int]
    weights: list[tuple[np.ndarray, np.ndarray]]
    log_std: np.ndarray

    @property
    def obs_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def action_dim(self) -> int:
        return self.layer_dims[-1] - 1

    def parameters(self) -> list[np.ndarray]:
        out = []
        for W, b in self.weights:
            out.extend((W, b))
        out.append(self.log_std)
        return out

    def clamp_log_std(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def copy(self) -> "PolicyNet":
        return PolicyNet(
            list(self.layer_dims),
            [(W.copy(), b.copy()) for W, b in self.weights],
            self.log_std.copy(),
        )


def init_net(rng: np.random.Generator, obs_dim: int, action_dim: int = 7,
             hidden: tuple[int, int] = (64, 64)) -> PolicyNet:
    """Gaussian fan-in init; the output layer is scaled down so the initial
    policy is near-zero-mean and the value head starts flat."""
    dims = [obs_dim, hidden[0], hidden[1], action_dim + 1]
    weights = []
    for i in range(len(dims) - 1):
        scale = 1.0 / math.sqrt(dims[i])
        if i == len(dims) - 2:
            scale *= 0.01
        W = rng.normal(0.0, scale, size=(dims[i], dims[i + 1]))
        b = np.zeros(dims[i + 1])
        weights.append((W, b))
    return PolicyNet(dims, weights, np.full(action_dim, LOG_STD_INIT))


def net_forward(net: PolicyNet, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Batched evaluation. Returns (means (N,act), values (N,), cache)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.obs_dim:
        raise ObsDimMismatch(f"expected obs dim {net.obs_dim}, got {X.shape[1]}")
    (W1, b1), (W2, b2), (W3, b3) = net.weights
    h1 = np.tanh(X @ W1 + b1)
    h2 = np.tanh(h1 @ W2 + b2)
    out = h2 @ W3 + b3
    mu = out[:, :net.action_dim]
    v = out[:, net.action_dim]
    return mu, v, {"X": X, "h1": h1, "h2": h2}


def net_backward(net: PolicyNet, cache: dict, dmu: np.ndarray,
                 dv: np.ndarray) -> list[np.ndarray]:
    """Gradients of a scalar loss with respect to every weight/bias, given the
    loss gradients at the output heads. Order matches net.weights flattened;
    log_std gradient is handled by the caller (it bypasses the trunk)."""
    (W1, b1), (W2, b2), (W3, b3) = net.weights
    X, h1, h2 = cache["X"], cache["h1"], cache["h2"]
    dout = np.concatenate([dmu, dv[:, None]], axis=1)
    dW3 = h2.T @ dout
    db3 = dout.sum(axis=0)
    dh2 = dout @ W3.T
    dz2 = dh2 * (1.0 - h2 * h2)
    dW2 = h1.T @ dz2
    db2 = dz2.sum(axis=0)
    dh1 = dz2 @ W2.T
    dz1 = dh1 * (1.0 - h1 * h1)
    dW1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    return [dW1, db1, dW2, db2, dW3, db3]


def gaussian_log_prob(actions: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    std = np.exp(log_std)
    z = (actions - mu) / std
    return -0.5 * np.sum(z * z, axis=1) - np.sum(log_std) - 0.5 * actions.shape[1] * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std) + 0.5 * len(log_std) * (1.0 + LOG_2PI))


@dataclass
class RunningNorm:
    """Welford running mean/variance over observation batches."""

    mean: np.ndarray
    var: np.ndarray
    count: float

    @staticmethod
    def create(dim: int) -> "RunningNorm":
        return RunningNorm(np.zeros(dim), np.ones(dim), 1e-4)

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        m_a = self.var * self.count
        m_b = b_var * n
        self.var = (m_a + m_b + delta * delta * self.count * n / total) / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var + 1e-8)
        return np.clip(z, -OBS_CLIP, OBS_CLIP)

    def copy(self) -> "RunningNorm":
        return RunningNorm(self.mean.copy(), self.var.copy(), self.count)


@dataclass
class Policy:
    """A deployable policy: network, frozen-able observation normalizer, and
    the provenance needed by the eval harness and live server."""

    net: PolicyNet
    obs_norm: RunningNorm
    task: str
    policy_id: str
    train_config_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def obs_dim(self) -> int:
        return self.net.obs_dim

    @property
    def action_dim(self) -> int:
        return self.net.action_dim

    def copy(self) -> "Policy":
        return Policy(self.net.copy(), self.obs_norm.copy(), self.task,
                      self.policy_id, self.train_config_hash, dict(self.meta))


def policy_forward(policy: Policy, obs: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Normalized single-observation evaluation: (action mean, value, log-std)."""
    obs = np.asarray(obs, dtype=float).reshape(-1)
    if obs.shape[0] != policy.obs_dim:
        raise ObsDimMismatch(f"policy expects obs dim {policy.obs_dim}, got {obs.shape[0]}")
    mu, v, _ = net_forward(policy.net, policy.obs_norm.normalize(obs)[None, :])
    log_std = np.clip(policy.net.log_std, LOG_STD_MIN, LOG_STD_MAX)
    return mu[0], float(v[0]), log_std


def sample_action(policy: Policy, obs: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, float, float]:
    """Draw an action from the Gaussian head: (action, log-prob, value)."""
    mu, v, log_std = policy_forward(policy, obs)
    std = np.exp(log_std)
    action = mu + std * rng.standard_normal(len(mu))
    logp = float(gaussian_log_prob(action[None, :], mu[None, :], log_std)[0])
    return action, logp, v


def save_policy(path, policy: Policy) -> None:
    doc = {
        "format": POLICY_FORMAT,
        "task": policy.task,
        "policy_id": policy.policy_id,
        "obs_dim": policy.obs_dim,
        "action_dim": policy.action_dim,
        "layer_dims": list(policy.net.layer_dims),
        "activation": "tanh",
        "weights": [
            {"W": W.ravel().tolist(), "b": b.tolist()} for W, b in policy.net.weights
        ],
        "log_std": policy.net.log_std.tolist(),
        "obs_norm": {
            "mean": policy.obs_norm.mean.tolist(),
            "var": policy.obs_norm.var.tolist(),
            "count": policy.obs_norm.count,
        },
        "train_config_hash": policy.train_config_hash,
        "meta": policy.meta,
    }
    p = Path(path)
    if p.parent != Path("."):
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_policy(path) -> Policy:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != POLICY_FORMAT:
        raise PolicyError(f"unsupported policy format: {doc.get('format')!r}")
    dims = [int(d) for d in doc["layer_dims"]]
    weights = []
    for i, layer in enumerate(doc["weights"]):
        W = np.asarray(layer["W"], dtype=float).reshape(dims[i], dims[i + 1])
        b = np.asarray(layer["b"], dtype=float)
        weights.append((W, b))
    net = PolicyNet(dims, weights, np.asarray(doc["log_std"], dtype=float))
    if not all(np.all(np.isfinite(W)) and np.all(np.isfinite(b)) for W, b in weights):
        raise PolicyError("policy weights contain non-finite values")
    norm = RunningNorm(
        np.asarray(doc["obs_norm"]["mean"], dtype=float),
        np.asarray(doc["obs_norm"]["var"], dtype=float),
        float(doc["obs_norm"]["count"]),
    )
    return Policy(net, norm, str(doc["task"]), str(doc["policy_id"]),
                  str(doc.get("train_config_hash", "")), dict(doc.get("meta", {})))
