import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmsalab.env import RmsaEnv
from rmsalab.features import StateEncoder
from rmsalab.neuralnet import LayerSpec, forward_policy, init_params, load_checkpoint
from rmsalab.topology import precompute_paths
from rmsalab.traffic import TrafficConfig
from rmsalab.trainer import (MetricsWriter, ParamStore, TrainingConfig,
                             WorkerContext, advantages, discounted_returns,
                             roulette_select, run_actor_learner_ep,
                             run_actor_learner_flx, run_training,
                             sliding_window_returns)


def test_discounted_returns_hand_example():
    got = discounted_returns([1.0, -1.0, 1.0], 0.5)
    assert got.tolist() == [0.75, -0.5, 1.0]


def test_discounted_returns_gamma_zero_is_identity():
    rewards = [1.0, -1.0, -1.0, 1.0]
    assert discounted_returns(rewards, 0.0).tolist() == rewards


def test_discounted_returns_geometric_series():
    got = discounted_returns(np.ones(50), 0.95)
    assert got[0] == pytest.approx((1 - 0.95 ** 50) / 0.05, abs=1e-12)
    assert got[-1] == 1.0


def test_discounted_returns_empty_rejected():
    with pytest.raises(ValueError):
        discounted_returns([], 0.9)


@settings(max_examples=60, deadline=None)
@given(rewards=st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=60),
       gamma=st.floats(0.0, 1.0))
def test_discounted_returns_matches_double_loop_oracle(rewards, gamma):
    got = discounted_returns(rewards, gamma)
    for i in range(len(rewards)):
        expected = sum(gamma ** (j - i) * rewards[j]
                       for j in range(i, len(rewards)))
        assert abs(got[i] - expected) <= 1e-12


def test_sliding_window_returns_per_sample_windows():
    rng = np.random.default_rng(0)
    rewards = rng.choice([-1.0, 1.0], size=99)
    got = sliding_window_returns(rewards, 0.95, 50)
    assert got.shape == (50,)
    for i in range(50):
        expected = discounted_returns(rewards[i:i + 50], 0.95)[0]
        assert got[i] == pytest.approx(expected, abs=1e-12)
    # the last trained sample's window covers rewards[49:99]: all 50 of them
    assert got[49] == pytest.approx(
        float(np.dot(0.95 ** np.arange(50), rewards[49:99])), abs=1e-12)


def test_sliding_window_constant_rewards_all_equal():
    got = sliding_window_returns(np.ones(99), 0.95, 50)
    assert np.allclose(got, (1 - 0.95 ** 50) / 0.05)


def test_sliding_window_needs_enough_rewards():
    with pytest.raises(ValueError):
        sliding_window_returns(np.ones(10), 0.95, 50)


def test_advantages():
    assert advantages([1.0], [0.6])[0] == pytest.approx(0.4)
    assert advantages([2.0, 3.0], [2.0, 3.0]).tolist() == [0.0, 0.0]
    with pytest.raises(ValueError, match="mismatch"):
        advantages([1.0, 2.0], [1.0])


# --- roulette -------------------------------------------------------------


class FixedDraw:
    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


def test_roulette_examples():
    probs = [0.2, 0.3, 0.5]
    assert roulette_select(probs, FixedDraw(0.4)) == 1
    assert roulette_select(probs, FixedDraw(0.15)) == 0
    assert roulette_select(probs, FixedDraw(0.99)) == 2


def test_roulette_top_edge_falls_back_to_last_action():
    probs = [0.5, 0.5 - 1e-9]  # cumulative tops out just below 1
    assert roulette_select(probs, FixedDraw(1.0 - 1e-12)) == 1


def test_roulette_rejects_unnormalized():
    with pytest.raises(ValueError, match="sum"):
        roulette_select([0.5, 0.4], FixedDraw(0.1))


def test_roulette_empirical_distribution():
    probs = np.array([0.2, 0.3, 0.5])
    rng = np.random.default_rng(314)
    # vectorized draws with the same cumulative-sum rule
    draws = rng.random(1_000_000)
    picks = np.searchsorted(np.cumsum(probs), draws, side="left")
    freq = np.bincount(picks, minlength=3) / draws.size
    assert np.abs(freq - probs).max() <= 0.005
    # the scalar implementation agrees with the vectorized rule draw-by-draw
    for value in draws[:5000]:
        assert roulette_select(probs, FixedDraw(value)) == int(
            np.searchsorted(np.cumsum(probs), value, side="left"))


# --- worker loops ----------------------------------------------------------


def small_ctx(nsfnet, nsfnet_paths, tmp_path, mode, epochs, batch_size=5,
              workers=1, seed=0, metrics=True):
    cfg = TrainingConfig(epochs=epochs, batch_size=batch_size,
                         worker_count=workers, mode=mode, seed=seed)
    traffic = TrafficConfig(10.0, 15.0)
    encoder = StateEncoder(nsfnet, k_paths=5, j_blocks=1, mode=mode,
                           mean_duration=15.0)
    params = init_params(LayerSpec(encoder.length, 2, 16, 5), seed)
    store = ParamStore(params, cfg, tmp_path)
    writer = MetricsWriter(tmp_path / "metrics.csv") if metrics else None
    return WorkerContext(cfg=cfg, topology=nsfnet, paths=nsfnet_paths,
                         encoder=encoder, traffic=traffic, store=store,
                         metrics=writer, k_paths=5, j_blocks=1,
                         slot_capacity_gbps=12.5, out_dir=tmp_path)


def read_metrics(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_ep_trains_once_per_batch(nsfnet, nsfnet_paths, tmp_path):
    ctx = small_ctx(nsfnet, nsfnet_paths, tmp_path, "ep", epochs=4)
    run_actor_learner_ep(0, ctx)
    ctx.metrics.close()
    rows = read_metrics(tmp_path / "metrics.csv")
    assert [int(r["epoch"]) for r in rows] == [1, 2, 3, 4]
    # one gradient application per batch_size requests, exactly
    assert [int(r["requests_total"]) for r in rows] == [5, 10, 15, 20]


def test_ep_position_indicator_sequence(nsfnet, nsfnet_paths, tmp_path):
    ctx = small_ctx(nsfnet, nsfnet_paths, tmp_path, "ep", epochs=2,
                    batch_size=3)
    seen = []
    original = ctx.encoder.encode

    def spy(req, spectrum, paths, episode_pos=None):
        seen.append(episode_pos)
        return original(req, spectrum, paths, episode_pos=episode_pos)

    ctx.encoder.encode = spy
    run_actor_learner_ep(0, ctx)
    ctx.metrics.close()
    assert seen == [(1, 3), (2, 3), (3, 3)] * 2
    # position feature values: (N - i + 1) / N
    assert [(n - i + 1) / n for i, n in seen[:3]] == [1.0, 2 / 3, 1 / 3]


def test_flx_training_cadence(nsfnet, nsfnet_paths, tmp_path):
    ctx = small_ctx(nsfnet, nsfnet_paths, tmp_path, "flx", epochs=4)
    run_actor_learner_flx(0, ctx)
    ctx.metrics.close()
    rows = read_metrics(tmp_path / "metrics.csv")
    # first training at 2N-1 = 9 samples, then every N = 5
    assert [int(r["requests_total"]) for r in rows] == [9, 14, 19, 24]


def test_entropy_column_within_bounds(nsfnet, nsfnet_paths, tmp_path):
    ctx = small_ctx(nsfnet, nsfnet_paths, tmp_path, "flx", epochs=6)
    run_actor_learner_flx(0, ctx)
    ctx.metrics.close()
    for row in read_metrics(tmp_path / "metrics.csv"):
        assert 0.0 <= float(row["entropy"]) <= math.log(5) + 1e-9


@pytest.mark.parametrize("mode", ["ep", "flx"])
def test_single_worker_runs_are_reproducible(nsfnet, nsfnet_paths, tmp_path,
                                             mode):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{mode}-{name}"
        cfg = TrainingConfig(epochs=6, batch_size=5, worker_count=1,
                             mode=mode, seed=7)
        run_training(cfg, nsfnet, nsfnet_paths, TrafficConfig(10.0, 15.0),
                     k_paths=5, hidden_layers=2, hidden_width=16,
                     out_dir=out)
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]


def test_run_training_writes_checkpoints(nsfnet, nsfnet_paths, tmp_path):
    cfg = TrainingConfig(epochs=4, batch_size=5, worker_count=2, mode="flx",
                         seed=0, checkpoint_every=2)
    result = run_training(cfg, nsfnet, nsfnet_paths, TrafficConfig(10.0, 15.0),
                          k_paths=5, hidden_layers=2, hidden_width=16,
                          out_dir=tmp_path)
    assert result.final_epoch >= 4
    assert (tmp_path / "checkpoint-2.npz").exists()
    assert (tmp_path / "checkpoint-final.npz").exists()
    final = load_checkpoint(tmp_path / "checkpoint-final.npz")
    assert np.array_equal(final.policy_weights[0],
                          result.params.policy_weights[0])
    assert result.total_requests >= 4 * 5
    assert 0.0 <= result.blocking_probability <= 1.0


def test_zero_epochs_returns_untrained_params(nsfnet, nsfnet_paths, tmp_path):
    cfg = TrainingConfig(epochs=0, batch_size=5, worker_count=2, mode="flx",
                         seed=3)
    result = run_training(cfg, nsfnet, nsfnet_paths, TrafficConfig(10.0, 15.0),
                          k_paths=5, hidden_layers=2, hidden_width=16,
                          out_dir=tmp_path)
    assert result.final_epoch == 0
    assert result.total_requests == 0
    reference = init_params(LayerSpec(54, 2, 16, 5), 3, input_gain=2.5)
    assert np.array_equal(result.params.policy_weights[0],
                          reference.policy_weights[0])
    probs = forward_policy(result.params, np.zeros(54))
    assert probs.max() < 0.25  # near-uniform policy before any training


def test_worker_failure_aborts_run(nsfnet, nsfnet_paths, tmp_path):
    cfg = TrainingConfig(epochs=50, batch_size=5, worker_count=2, mode="flx",
                         seed=0)
    traffic = TrafficConfig(10.0, 15.0)
    encoder = StateEncoder(nsfnet, k_paths=5, j_blocks=1, mode="flx",
                           mean_duration=15.0)
    calls = {"n": 0}
    original = encoder.encode

    def exploding(req, spectrum, paths, episode_pos=None):
        calls["n"] += 1
        if calls["n"] > 12:
            raise RuntimeError("synthetic worker fault")
        return original(req, spectrum, paths, episode_pos=episode_pos)

    encoder.encode = exploding
    import rmsalab.trainer as trainer_mod
    params = init_params(LayerSpec(encoder.length, 2, 16, 5), 0)
    store = ParamStore(params, cfg, tmp_path)
    writer = MetricsWriter(tmp_path / "metrics.csv")
    ctx = WorkerContext(cfg=cfg, topology=nsfnet, paths=nsfnet_paths,
                        encoder=encoder, traffic=traffic, store=store,
                        metrics=writer, k_paths=5, j_blocks=1,
                        slot_capacity_gbps=12.5, out_dir=tmp_path)
    with pytest.raises(RuntimeError, match="synthetic worker fault"):
        run_actor_learner_flx(0, ctx)
    writer.close()


def test_run_training_surfaces_worker_failure(nsfnet, nsfnet_paths, tmp_path,
                                              monkeypatch):
    import rmsalab.trainer as trainer_mod

    def explode(worker_id, ctx):
        raise RuntimeError("boom in worker")

    monkeypatch.setitem(trainer_mod._WORKER_LOOPS, "flx", explode)
    cfg = TrainingConfig(epochs=5, batch_size=5, worker_count=2, mode="flx")
    with pytest.raises(RuntimeError, match="worker [01] failed"):
        run_training(cfg, nsfnet, nsfnet_paths, TrafficConfig(10.0, 15.0),
                     k_paths=5, hidden_layers=2, hidden_width=16,
                     out_dir=tmp_path)
    # metrics flushed and readable even after the abort
    assert (tmp_path / "metrics.csv").read_text().startswith("epoch,")
