"""Parallel actor-learner training loop.

Each worker owns a private environment, demand stream, and local copy of
the networks; the only shared state is the global parameter set (guarded
by one lock) and the epoch counter. One epoch is one gradient
application by any worker. Two batching mechanisms exist:

* episode mode (``ep``): every batch of N requests is an episode; the
  return of the i-th sample aggregates the remaining rewards of its own
  episode, so late samples see returns built from very few rewards.
* sliding-window mode (``flx``): training fires once the buffer holds
  2N - 1 samples; each of the first N samples gets a return over exactly
  the N rewards that follow it, the trained samples are dropped, and the
  local networks resync when N - 1 samples remain.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import RmsaEnv
from .features import StateEncoder
from .neuralnet import (Batch, GradientSet, LayerSpec, ParamSet, adam_apply,
                        backward, forward_policy, forward_value, init_params,
                        save_checkpoint)
from .topology import CandidatePath, Topology
from .traffic import TrafficConfig

METRICS_COLUMNS = ("epoch", "worker", "requests_total", "requests_blocked",
                   "cum_reward_1k", "blocking_prob", "policy_loss",
                   "value_loss", "entropy")

TRAINING_MODES = ("ep", "flx")


@dataclass(frozen=True)
class TrainingConfig:
    """Learning-loop knobs with the reference experiment's defaults."""

    epochs: int
    gamma: float = 0.95
    entropy_weight: float = 0.01
    batch_size: int = 50
    learning_rate: float = 1e-5
    worker_count: int = 16
    mode: str = "flx"
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    entropy_sign: float = -1.0
    grad_clip: float = 0.0
    checkpoint_every: int = 0
    metrics_window: int = 1000

    def __post_init__(self) -> None:
        if self.mode not in TRAINING_MODES:
            raise ValueError(f"mode must be one of {TRAINING_MODES}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.batch_size < 1 or self.worker_count < 1:
            raise ValueError("batch_size and worker_count must be positive")


@dataclass(slots=True)
class ExperienceSample:
    """One decision: state, chosen action, value estimate, and reward."""

    state: np.ndarray
    action: int
    value: float
    reward: float


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """Suffix-discounted sums over exactly the given reward window."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty reward sequence")
    out = np.empty_like(r)
    acc = 0.0
    for i in range(r.size - 1, -1, -1):
        acc = r[i] + gamma * acc
        out[i] = acc
    return out


def sliding_window_returns(rewards, gamma: float, window: int) -> np.ndarray:
    """Discounted sum over a length-``window`` slice starting at each index.

    Yields ``len(rewards) - window + 1`` values; every return aggregates
    the same number of rewards.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < window:
        raise ValueError(
            f"need at least {window} rewards, got {r.size}")
    powers = gamma ** np.arange(window, dtype=np.float64)
    view = np.lib.stride_tricks.sliding_window_view(r, window)
    return view @ powers


def advantages(returns, values) -> np.ndarray:
    """Return minus value estimate, per sample."""
    g = np.asarray(returns, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if g.shape != v.shape:
        raise ValueError(f"length mismatch: {g.shape} returns vs {v.shape} values")
    return g - v


def roulette_select(probs, rng: np.random.Generator) -> int:
    """Sample an action index: first index whose cumulative probability
    reaches a uniform draw. Floating-point shortfall at the top end
    falls back to the last action."""
    p = np.asarray(probs)
    total = float(p.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total}, not 1")
    draw = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), draw, side="left"))
    return min(idx, p.size - 1)


class MetricsWriter:
    """Append-only CSV stream, safe to share across worker threads."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(",".join(METRICS_COLUMNS) + "\n")
        self._lock = threading.Lock()

    @staticmethod
    def _fmt(value) -> str:
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        return repr(float(value))

    def write_row(self, *values) -> None:
        if len(values) != len(METRICS_COLUMNS):
            raise ValueError(f"expected {len(METRICS_COLUMNS)} values")
        line = ",".join(self._fmt(v) for v in values) + "\n"
        with self._lock:
            self._fh.write(line)

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()


class ParamStore:
    """The shared parameter set: whole-set reads and writes are serialized,
    everything else runs without coordination."""

    def __init__(self, params: ParamSet, cfg: TrainingConfig,
                 out_dir: Path | None = None):
        self._params = params
        self._cfg = cfg
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self.epoch = 0
        self.failure: tuple[int, BaseException] | None = None
        self._out_dir = out_dir
        if cfg.epochs <= 0:
            self._stop.set()

    def should_stop(self) -> bool:
        return self._stop.is_set()

    def fail(self, worker_id: int, exc: BaseException) -> None:
        if self.failure is None:
            self.failure = (worker_id, exc)
        self._stop.set()

    def sync_into(self, local: ParamSet) -> None:
        with self._lock:
            local.copy_weights_from(self._params)

    def snapshot(self) -> ParamSet:
        with self._lock:
            return self._params.clone()

    def apply(self, grads: GradientSet) -> tuple[int, ParamSet | None]:
        """Adam-update the global set; returns the new epoch number and a
        snapshot when a checkpoint boundary was crossed."""
        cfg = self._cfg
        with self._lock:
            adam_apply(self._params, grads, cfg.learning_rate, cfg.adam_beta1,
                       cfg.adam_beta2, cfg.adam_eps, cfg.grad_clip)
            self.epoch += 1
            epoch = self.epoch
            snapshot = None
            if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
                snapshot = self._params.clone()
            if epoch >= cfg.epochs:
                self._stop.set()
        return epoch, snapshot


@dataclass
class WorkerContext:
    """Everything a worker needs; topology and paths are shared read-only."""

    cfg: TrainingConfig
    topology: Topology
    paths: dict[tuple[int, int], tuple[CandidatePath, ...]]
    encoder: StateEncoder
    traffic: TrafficConfig
    store: ParamStore
    metrics: MetricsWriter | None
    k_paths: int
    j_blocks: int
    slot_capacity_gbps: float
    stats_window: int = 10_000
    out_dir: Path | None = None
    env_registry: list = field(default_factory=list)

    def make_env(self, worker_id: int) -> RmsaEnv:
        env = RmsaEnv(self.topology, self.paths, self.traffic,
                      k_paths=self.k_paths, j_blocks=self.j_blocks,
                      seed=self.cfg.seed + worker_id,
                      slot_capacity_gbps=self.slot_capacity_gbps,
                      stats_window=self.stats_window)
        self.env_registry.append(env)
        return env


def _train_batch(worker_id: int, local: ParamSet, ctx: WorkerContext,
                 env: RmsaEnv, samples: list[ExperienceSample],
                 returns: np.ndarray) -> int:
    cfg = ctx.cfg
    states = np.stack([smp.state for smp in samples])
    actions = np.array([smp.action for smp in samples], dtype=np.intp)
    values = np.array([smp.value for smp in samples])
    batch = Batch(states, actions, advantages(returns, values), returns)
    grads, stats = backward(local, batch, cfg.entropy_weight, cfg.entropy_sign)
    epoch, snapshot = ctx.store.apply(grads)
    if snapshot is not None and ctx.out_dir is not None:
        save_checkpoint(snapshot, ctx.out_dir / f"checkpoint-{epoch}.npz")
    if ctx.metrics is not None:
        window = cfg.metrics_window
        ctx.metrics.write_row(
            epoch, worker_id, env.stats.total, env.stats.blocked,
            env.stats.window_reward(window),
            env.stats.blocking_probability(window),
            stats.policy_loss, stats.value_loss, stats.entropy)
    return epoch


def run_actor_learner_ep(worker_id: int, ctx: WorkerContext) -> None:
    """Episode-based worker: sync at each episode start, act for N
    requests with a position indicator in the state, then train on the
    whole episode and empty the buffer."""
    cfg = ctx.cfg
    store = ctx.store
    env = ctx.make_env(worker_id)
    local = store.snapshot()
    action_rng = np.random.default_rng([cfg.seed, worker_id, 0xA5])
    n = cfg.batch_size
    buffer: list[ExperienceSample] = []
    while not store.should_stop():
        if not buffer:
            store.sync_into(local)
        req = env.arrive()
        state = ctx.encoder.encode(req, env.spectrum, env.candidate_paths(req),
                                   episode_pos=(len(buffer) + 1, n))
        probs = forward_policy(local, state)
        value = forward_value(local, state)
        action = roulette_select(probs, action_rng)
        outcome = env.step(req, action)
        buffer.append(ExperienceSample(state, action, value, outcome.reward))
        if len(buffer) == n:
            rewards = np.array([smp.reward for smp in buffer])
            returns = discounted_returns(rewards, cfg.gamma)
            _train_batch(worker_id, local, ctx, env, buffer, returns)
            buffer.clear()


def run_actor_learner_flx(worker_id: int, ctx: WorkerContext) -> None:
    """Sliding-window worker: train once 2N - 1 samples are buffered,
    giving each of the first N samples a full N-reward return, then drop
    those N samples; resync whenever N - 1 samples remain."""
    cfg = ctx.cfg
    store = ctx.store
    env = ctx.make_env(worker_id)
    local = store.snapshot()
    action_rng = np.random.default_rng([cfg.seed, worker_id, 0xA5])
    n = cfg.batch_size
    sync_len = n - 1
    buffer: list[ExperienceSample] = []
    while not store.should_stop():
        if len(buffer) in (0, sync_len):
            store.sync_into(local)
        req = env.arrive()
        state = ctx.encoder.encode(req, env.spectrum, env.candidate_paths(req))
        probs = forward_policy(local, state)
        value = forward_value(local, state)
        action = roulette_select(probs, action_rng)
        outcome = env.step(req, action)
        buffer.append(ExperienceSample(state, action, value, outcome.reward))
        if len(buffer) == 2 * n - 1:
            rewards = np.array([smp.reward for smp in buffer])
            returns = sliding_window_returns(rewards, cfg.gamma, n)
            _train_batch(worker_id, local, ctx, env, buffer[:n], returns)
            del buffer[:n]


_WORKER_LOOPS = {"ep": run_actor_learner_ep, "flx": run_actor_learner_flx}


@dataclass
class TrainingResult:
    final_epoch: int
    total_requests: int
    total_blocked: int
    blocking_probability: float
    trailing_blocking: float
    params: ParamSet
    metrics_path: Path | None
    checkpoint_path: Path | None
    worker_stats: list = field(default_factory=list)


def pooled_trailing_blocking(stats_list, window: int) -> float:
    """Blocking over the trailing window, split evenly across workers."""
    per_worker = max(1, window // len(stats_list))
    total = 0
    blocked = 0
    for stats in stats_list:
        t, b = stats.window_counts(per_worker)
        total += t
        blocked += b
    return blocked / total if total else float("nan")


def run_training(cfg: TrainingConfig, topology: Topology, paths,
                 traffic: TrafficConfig, *, k_paths: int, j_blocks: int = 1,
                 hidden_layers: int = 5, hidden_width: int = 128,
                 slot_capacity_gbps: float = 12.5, shared_hidden: bool = False,
                 input_gain: float = 2.5, stats_window: int = 10_000,
                 out_dir: str | Path | None = None,
                 progress: bool = False) -> TrainingResult:
    """Run the full parallel training loop and return pooled statistics.

    When ``out_dir`` is given, a metrics CSV and parameter checkpoints
    are written there; the run aborts (with metrics flushed) if any
    worker raises.
    """
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    encoder = StateEncoder(
        topology, k_paths=k_paths, j_blocks=j_blocks, mode=cfg.mode,
        mean_duration=traffic.mean_duration,
        slot_capacity_gbps=slot_capacity_gbps,
        bandwidth_max_gbps=traffic.bandwidth_max)
    layer_spec = LayerSpec(encoder.length, hidden_layers, hidden_width,
                           k_paths * j_blocks)
    global_params = init_params(layer_spec, cfg.seed, shared_hidden,
                                input_gain=input_gain)
    store = ParamStore(global_params, cfg, out_path)
    metrics = MetricsWriter(out_path / "metrics.csv") if out_path else None

    ctx = WorkerContext(cfg=cfg, topology=topology, paths=paths,
                        encoder=encoder, traffic=traffic, store=store,
                        metrics=metrics, k_paths=k_paths, j_blocks=j_blocks,
                        slot_capacity_gbps=slot_capacity_gbps,
                        stats_window=stats_window, out_dir=out_path)

    loop = _WORKER_LOOPS[cfg.mode]

    def worker_main(worker_id: int) -> None:
        try:
            loop(worker_id, ctx)
        except BaseException as exc:  # noqa: BLE001 - must surface any failure
            store.fail(worker_id, exc)

    threads = [threading.Thread(target=worker_main, args=(i,),
                                name=f"actor-{i}", daemon=True)
               for i in range(cfg.worker_count)]
    try:
        for t in threads:
            t.start()
        last_report = 0
        while any(t.is_alive() for t in threads):
            for t in threads:
                t.join(timeout=0.5)
            if progress and cfg.epochs > 0:
                step = max(1, cfg.epochs // 20)
                if store.epoch >= last_report + step:
                    last_report = store.epoch
                    print(f"  epoch {store.epoch}/{cfg.epochs}", flush=True)
    finally:
        if metrics is not None:
            metrics.close()

    if store.failure is not None:
        worker_id, exc = store.failure
        raise RuntimeError(f"worker {worker_id} failed: {exc}") from exc

    final = store.snapshot()
    checkpoint_path = None
    if out_path is not None:
        checkpoint_path = out_path / f"checkpoint-{store.epoch}.npz"
        save_checkpoint(final, checkpoint_path)
        save_checkpoint(final, out_path / "checkpoint-final.npz")

    live_stats = [env.stats for env in ctx.env_registry]
    total = sum(s.total for s in live_stats)
    blocked = sum(s.blocked for s in live_stats)
    return TrainingResult(
        final_epoch=store.epoch,
        total_requests=total,
        total_blocked=blocked,
        blocking_probability=blocked / total if total else float("nan"),
        trailing_blocking=(pooled_trailing_blocking(live_stats, stats_window)
                           if live_stats else float("nan")),
        params=final,
        metrics_path=(out_path / "metrics.csv") if out_path else None,
        checkpoint_path=checkpoint_path,
        worker_stats=live_stats,
    )
