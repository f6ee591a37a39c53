"""Clipped-surrogate PPO over the numpy actor-critic, with generalized
advantage estimation and Adam. Rollout collection uses static sampled humans;
every random stream derives from (seed, worker, iteration) so results are a
function of seed and worker count alone.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .configs import canonical_hash
from .envs import Env, make_env
from .policy import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    Policy,
    PolicyNet,
    RunningNorm,
    gaussian_entropy,
    gaussian_log_prob,
    init_net,
    net_backward,
    net_forward,
    sample_action,
)

# Fixed tags keep the named random streams disjoint.
_TAG_INIT = 101
_TAG_UPDATE = 102
_TAG_WORKER = 103


class NonFiniteLoss(ArithmeticError):
    def __init__(self, stats: dict):
        self.stats = stats
        super().__init__(f"training loss became non-finite: {stats}")


@dataclass(frozen=True)
class TrainConfig:
    task: str = "feeding"
    robot_profile: str = "armA"
    biomech_mode: str = "fixed"
    total_rollouts: int = 500
    rollouts_per_iteration: int = 20
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 512
    learning_rate: float = 3e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    workers: int = 4
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lam must be in (0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be > 0")
        if self.total_rollouts <= 0 or self.rollouts_per_iteration <= 0 or self.workers <= 0:
            raise ValueError("rollout counts and workers must be > 0")

    def hash(self) -> str:
        return canonical_hash(asdict(self))


@dataclass
class RolloutBatch:
    obs: np.ndarray        # (N, obs_dim), already normalized
    actions: np.ndarray    # (N, act)
    log_probs: np.ndarray  # (N,)
    rewards: np.ndarray    # (N,)
    values: np.ndarray     # (N,)
    dones: np.ndarray      # (N,) 1.0 at episode ends
    raw_obs: np.ndarray    # (N, obs_dim), for the running normalizer
    episode_returns: list[float] = field(default_factory=list)
    episode_successes: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)


def gae(rewards, values, dones, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over a flat array of steps; `dones`
    marks episode boundaries so nothing leaks across them."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    n = len(rewards)
    if not (len(values) == len(dones) == n):
        raise ValueError("gae inputs must have equal lengths")
    adv = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        cont = 1.0 - dones[t]
        next_v = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_v * cont - values[t]
        last = delta + gamma * lam * cont * last
        adv[t] = last
    return adv, adv + values


def collect_rollouts(policy: Policy, cfg: TrainConfig, iteration: int,
                     env_cache: dict) -> RolloutBatch:
    """Run one iteration's episodes. Episodes are dealt round-robin to
    `workers` logical workers, each with its own rng stream derived from
    (seed, worker, iteration); execution is sequential but the stream layout
    makes the result independent of real parallelism."""
    n_eps = cfg.rollouts_per_iteration
    per_worker: list[list[int]] = [[] for _ in range(cfg.workers)]
    for j in range(n_eps):
        per_worker[j % cfg.workers].append(j)

    obs_l, act_l, logp_l, rew_l, val_l, done_l, raw_l = [], [], [], [], [], [], []
    ep_returns: list[float] = []
    ep_success: list[bool] = []

    for w, eps in enumerate(per_worker):
        if not eps:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TAG_WORKER, w, iteration]))
        env = env_cache.setdefault(w, make_env(cfg.task, cfg.robot_profile,
                                               biomech_mode=cfg.biomech_mode))
        for _ in eps:
            env_seed = int(rng.integers(0, 2**63 - 1))
            obs = env.reset(env_seed)
            ep_ret = 0.0
            for _ in range(env.cfg.episode_steps):
                raw_l.append(obs.copy())
                action, logp, value = sample_action(policy, obs, rng)
                tr = env.step(action)
                obs_l.append(policy.obs_norm.normalize(obs))
                act_l.append(action)
                logp_l.append(logp)
                rew_l.append(tr.reward)
                val_l.append(value)
                done_l.append(1.0 if tr.done else 0.0)
                ep_ret += tr.reward
                obs = tr.observation
            ep_returns.append(ep_ret)
            ep_success.append(env.success())

    return RolloutBatch(
        obs=np.asarray(obs_l), actions=np.asarray(act_l),
        log_probs=np.asarray(logp_l), rewards=np.asarray(rew_l),
        values=np.asarray(val_l), dones=np.asarray(done_l),
        raw_obs=np.asarray(raw_l),
        episode_returns=ep_returns, episode_successes=ep_success,
    )


def ppo_loss_grads(net: PolicyNet, obs, actions, old_logp, advantages, returns,
                   clip_eps: float, value_coef: float, entropy_coef: float,
                   ) -> tuple[float, list[np.ndarray], dict]:
    """Total loss and its analytic gradients (trunk weights then log_std).

    loss = actor_clip + value_coef * value_mse - entropy_coef * entropy.
    The min() in the clipped surrogate routes gradient only through samples
    where the unclipped branch is active.
    """
    N = len(actions)
    log_std = np.clip(net.log_std, LOG_STD_MIN, LOG_STD_MAX)
    mu, v, cache = net_forward(net, obs)
    std = np.exp(log_std)
    inv_var = 1.0 / (std * std)

    logp = gaussian_log_prob(actions, mu, log_std)
    ratio = np.exp(logp - old_logp)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    actor_loss = -float(np.mean(np.minimum(surr1, surr2)))

    value_err = v - returns
    value_loss = float(np.mean(value_err * value_err))
    entropy = gaussian_entropy(log_std)
    total = actor_loss + value_coef * value_loss - entropy_coef * entropy

    active = (surr1 <= surr2).astype(float)
    dlogp = -(advantages * ratio * active) / N          # dL/dlogp per sample
    diff = actions - mu
    dmu = dlogp[:, None] * (diff * inv_var)             # chain into the mean head
    dv = value_coef * 2.0 * value_err / N
    grads = net_backward(net, cache, dmu, dv)

    dlog_std = np.sum(dlogp[:, None] * (diff * diff * inv_var - 1.0), axis=0)
    dlog_std -= entropy_coef
    grads.append(dlog_std)

    stats = {"actor_loss": actor_loss, "value_loss": value_loss, "entropy": entropy,
             "clip_fraction": float(np.mean(1.0 - active))}
    return total, grads, stats


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def ppo_update(policy: Policy, batch: RolloutBatch, cfg: TrainConfig,
               rng: np.random.Generator, adam: Adam) -> dict:
    """One PPO update: advantage normalization, then `epochs` passes of
    shuffled minibatches. Raises NonFiniteLoss with diagnostics if anything
    blows up."""
    adv, returns = gae(batch.rewards, batch.values, batch.dones, cfg.gamma, cfg.lam)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    n = len(batch)
    params = policy.net.parameters()
    agg: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = perm[start:start + cfg.minibatch]
            loss, grads, stats = ppo_loss_grads(
                policy.net, batch.obs[idx], batch.actions[idx], batch.log_probs[idx],
                adv[idx], returns[idx], cfg.clip_eps, cfg.value_coef, cfg.entropy_coef)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise NonFiniteLoss({"loss": loss, **stats})
            adam.step(params, grads)
            policy.net.clamp_log_std()
            for k, v in stats.items():
                agg[k] = agg.get(k, 0.0) + v
            count += 1
    return {k: v / max(count, 1) for k, v in agg.items()}


@dataclass
class TrainResult:
    policy: Policy
    initial_policy: Policy
    curve: list[dict]


def train(cfg: TrainConfig, checkpoint_dir=None, checkpoint_every: int = 10,
          progress=None) -> TrainResult:
    """Full training run. The untouched initial policy is kept (and
    checkpointed) so learned behavior can be compared against the random
    initialization it started from."""
    probe = make_env(cfg.task, cfg.robot_profile, biomech_mode=cfg.biomech_mode)
    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TAG_INIT]))
    net = init_net(init_rng, probe.obs_dim, probe.action_dim)
    policy = Policy(net, RunningNorm.create(probe.obs_dim), cfg.task,
                    policy_id=f"{cfg.task}-{cfg.biomech_mode}-s{cfg.seed}",
                    train_config_hash=cfg.hash(),
                    meta={"robot_profile": cfg.robot_profile,
                          "biomech_mode": cfg.biomech_mode, "seed": cfg.seed})
    initial = policy.copy()

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        from .policy import save_policy
        save_policy(ckpt_dir / "initial.json", initial)

    update_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TAG_UPDATE]))
    adam = Adam(policy.net.parameters(), cfg.learning_rate)
    iterations = cfg.total_rollouts // cfg.rollouts_per_iteration
    env_cache: dict = {}
    curve: list[dict] = []

    for it in range(iterations):
        batch = collect_rollouts(policy, cfg, it, env_cache)
        stats = ppo_update(policy, batch, cfg, update_rng, adam)
        policy.obs_norm.update(batch.raw_obs)
        entry = {
            "iteration": it,
            "mean_reward": float(np.mean(batch.episode_returns)),
            "success_rate": float(np.mean(batch.episode_successes)),
            **stats,
        }
        curve.append(entry)
        if progress:
            progress(entry)
        if ckpt_dir and checkpoint_every and (it + 1) % checkpoint_every == 0:
            from .policy import save_policy
            save_policy(ckpt_dir / f"iter_{it + 1:04d}.json", policy)

    return TrainResult(policy=policy, initial_policy=initial, curve=curve)
