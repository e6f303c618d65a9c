import math

import numpy as np
import pytest
from scipy.stats import norm

from hedgelab.env import PositionToZeroEnv
from hedgelab.errors import ConfigError, DataError, TrainingError
from hedgelab.sac import (
    Adam,
    Mlp,
    ReplayBuffer,
    SacAgent,
    SacHyper,
    evaluation_seeds,
    mse_loss_and_gradients,
    polyak_update,
    q_backup,
    q_loss,
    run_episode,
    sample_action,
    train,
)
from hedgelab.sac.gradcheck import check_mlp, check_squashed_policy
from hedgelab.sac.policy import ActionBox, log1m_tanh_sq, squash


def _random_nets(n, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        sizes = [int(s) for s in rng.integers(1, 9, size=int(rng.integers(2, 5)))]
        yield Mlp(sizes, rng), rng


def test_forward_zero_net():
    net = Mlp((3, 4, 2)).zero_()
    assert np.all(net(np.ones((5, 3))) == 0)


def test_forward_hand_value():
    net = Mlp((1, 1))
    net.params[0][...] = 2.0
    net.params[1][...] = 1.0
    assert net(np.array([[3.0]]))[0, 0] == 7.0


def test_relu_blocks_negative_preactivation():
    net = Mlp((1, 1, 1))
    net.params[0][...] = 1.0
    net.params[1][...] = -5.0
    net.params[2][...] = 3.0
    net.params[3][...] = 0.5
    assert net(np.array([[0.0]]))[0, 0] == 0.5


def test_forward_rejects_bad_width():
    with pytest.raises(DataError):
        Mlp((3, 2))(np.ones((1, 4)))


def test_mlp_gradients_match_finite_differences():
    for net, rng in _random_nets(50):
        x = rng.standard_normal((6, net.sizes[0]))
        w = rng.standard_normal((6, net.sizes[-1]))
        assert check_mlp(net, x, w) <= 1e-4


def test_squashed_policy_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(20):
        act_dim = int(rng.integers(1, 4))
        net = Mlp((int(rng.integers(1, 9)), int(rng.integers(1, 9)), 2 * act_dim), rng)
        obs = rng.standard_normal((5, net.sizes[0]))
        xi = rng.standard_normal((5, act_dim))
        err = check_squashed_policy(net, obs, xi, rng.standard_normal((5, act_dim)),
                                    rng.standard_normal(5))
        assert err <= 1e-4


def test_constant_loss_has_zero_gradient():
    net = Mlp((3, 5, 2), np.random.default_rng(0))
    _, cache = net.forward(np.ones((4, 3)))
    grads, dx = net.backward(cache, np.zeros((4, 2)))
    assert all(np.all(g == 0) for g in grads) and np.all(dx == 0)


def test_gradient_is_linear_in_loss_scale():
    net = Mlp((3, 5, 2), np.random.default_rng(0))
    x = np.random.default_rng(1).standard_normal((4, 3))
    w = np.random.default_rng(2).standard_normal((4, 2))
    _, cache = net.forward(x)
    g1, _ = net.backward(cache, w)
    g3, _ = net.backward(cache, 3.0 * w)
    for a, b in zip(g1, g3):
        assert np.allclose(3.0 * a, b, rtol=1e-12, atol=0)


def test_mse_gradient_and_non_finite_guard():
    net = Mlp((2, 4, 1), np.random.default_rng(3))
    x = np.random.default_rng(4).standard_normal((8, 2))
    target = np.random.default_rng(5).standard_normal(8)
    loss, grads = mse_loss_and_gradients(net, x, target)
    assert loss >= 0 and len(grads) == 4
    with pytest.raises(TrainingError):
        mse_loss_and_gradients(net, x, np.full(8, np.nan))


def test_log1m_tanh_sq_stable():
    z = np.array([-30.0, -3.0, 0.0, 0.7, 30.0])
    direct = np.log(1 - np.tanh(z[1:4]) ** 2)
    assert np.allclose(log1m_tanh_sq(z[1:4]), direct, rtol=1e-12)
    assert np.all(np.isfinite(log1m_tanh_sq(z)))
    assert log1m_tanh_sq(np.array([30.0]))[0] == pytest.approx(2 * math.log(2) - 60, rel=1e-12)


def test_deterministic_zero_mean_is_center():
    agent = SacAgent(1, [-10.0, -1.0], [10.0, 1.0], SacHyper(hidden=(8,)))
    agent.policy.zero_()
    assert np.all(agent.act(np.array([0.3]), deterministic=True) == 0.0)
    agent = SacAgent(1, [0.0], [4.0], SacHyper(hidden=(8,)))
    agent.policy.zero_()
    assert agent.act(np.array([0.3]), deterministic=True)[0] == 2.0


def test_sampled_actions_within_bounds():
    agent = SacAgent(2, [-10.0, -1.0], [10.0, 1.0], SacHyper(hidden=(8,)), seed=3)
    # Push the mean far out so tanh saturates.
    agent.policy.params[-1][:2] = [50.0, -50.0]
    agent.policy.params[-1][2:] = 2.0
    obs = np.random.default_rng(0).standard_normal((1_000_000, 2))
    raw = agent.policy(obs)
    unit = squash(raw, np.random.default_rng(1).standard_normal((len(obs), 2))).action
    act = agent.box.to_env(unit)
    assert np.all(act >= [-10.0, -1.0]) and np.all(act <= [10.0, 1.0])


def _log_density(mean, log_std, a):
    z = np.arctanh(a)
    xi = (z - mean) / math.exp(log_std)
    raw = np.column_stack([np.full(len(a), mean), np.full(len(a), log_std)])
    return squash(raw, xi[:, None]).log_prob


def test_log_prob_matches_monte_carlo_density():
    mean, log_std = 0.3, -0.2
    n = 1_000_000
    xi = np.random.default_rng(42).standard_normal((n, 1))
    raw = np.tile([mean, log_std], (n, 1))
    a = squash(raw, xi).action[:, 0]
    edges = np.linspace(-1, 1, 26)
    counts, _ = np.histogram(a, bins=edges)
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        grid = np.linspace(lo, hi, 401)[1:-1] if lo == -1 or hi == 1 else np.linspace(lo, hi, 401)
        prob = np.trapezoid(np.exp(_log_density(mean, log_std, grid)), grid)
        if prob < 0.025:
            continue
        assert abs(c / n - prob) / prob < 0.02


def test_log_prob_box_change_of_variables():
    agent = SacAgent(1, [-10.0], [10.0], SacHyper(hidden=(8,)), seed=0)
    obs = np.zeros((1, 1))
    _, logp = sample_action(agent, obs, deterministic=True)
    sample, _ = agent.policy_sample(obs, deterministic=True)
    assert logp[0] == pytest.approx(sample.log_prob[0] - math.log(10.0))


def test_log_prob_equals_gaussian_with_jacobian():
    mean, log_std = -0.4, 0.1
    xi = np.array([[0.7]])
    s = squash(np.array([[mean, log_std]]), xi)
    z = mean + math.exp(log_std) * 0.7
    expected = norm.logpdf(z, mean, math.exp(log_std)) - math.log(1 - math.tanh(z) ** 2)
    assert s.log_prob[0] == pytest.approx(expected, rel=1e-12)


def test_log_std_clamped():
    s = squash(np.array([[0.0, 10.0], [0.0, -50.0]]), np.zeros((2, 1)))
    assert s.log_std[0, 0] == 2.0 and s.log_std[1, 0] == -20.0
    assert np.all(s.in_range == 0)


def test_action_box_roundtrip():
    box = ActionBox([-10.0, -1.0], [10.0, 1.0])
    a = np.array([3.0, -0.25])
    assert np.allclose(box.to_env(box.to_unit(a)), a)


def _batch():
    return {"rew": np.array([1.0]), "done": np.array([0.0]), "next_obs": np.zeros((1, 1)),
            "obs": np.zeros((1, 1)), "act": np.zeros((1, 1))}


def test_q_backup_examples():
    assert q_backup([2.0], [1.0], [123.0], 0.99)[0] == 2.0
    assert q_backup([1.0], [0.0], [5.0], 0.9)[0] == pytest.approx(5.5)
    assert q_backup([1.0], [0.0], [min(3.0, 5.0)], 0.99)[0] == pytest.approx(3.97)


def test_q_target_uses_min_of_target_critics():
    hyper = SacHyper(hidden=(4,), alpha=0.0, gamma=0.99)
    agent = SacAgent(1, [-1.0], [1.0], hyper)
    for net, value in ((agent.q1_targ, 3.0), (agent.q2_targ, 5.0)):
        net.zero_()
        net.params[-1][...] = value
    assert agent.q_target(_batch())[0] == pytest.approx(3.97, rel=1e-12)
    assert agent.alpha == 0.0


def test_q_loss_examples():
    loss, dq = q_loss(np.array([2.0, 0.0]), np.array([1.0, 1.0]))
    assert loss == 1.0
    assert np.allclose(dq, [1.0, -1.0])
    assert q_loss(np.array([3.0]), np.array([3.0]))[0] == 0.0


def test_polyak_examples():
    src = Mlp((2, 3), np.random.default_rng(0))
    tgt = Mlp((2, 3), np.random.default_rng(1))
    orig = [p.copy() for p in tgt.params]
    polyak_update(tgt, src, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(tgt.params, orig))
    polyak_update(tgt, src, 0.25)
    for t, o, s in zip(tgt.params, orig, src.params):
        assert np.array_equal(t, 0.75 * o + 0.25 * s)
    polyak_update(tgt, src, 1.0)
    assert all(np.array_equal(a, b) for a, b in zip(tgt.params, src.params))
    a, b = Mlp((1, 1)).zero_(), Mlp((1, 1))
    b.params[0][...] = 2.0
    polyak_update(a, b, 0.5)
    assert a.params[0][0, 0] == 1.0
    with pytest.raises(DataError):
        polyak_update(a, Mlp((1, 2)), 0.5)


def _hand_critic(obs, act):
    return act[:, 0].copy(), np.ones_like(act)


def test_policy_step_moves_toward_higher_q():
    agent = SacAgent(1, [-1.0], [1.0], SacHyper(hidden=(8,), alpha=0.0), seed=2)
    obs = np.random.default_rng(0).standard_normal((64, 1))
    before = agent.policy_sample(obs, deterministic=True)[0].action.mean()
    agent.update_policy(obs, _hand_critic)
    after = agent.policy_sample(obs, deterministic=True)[0].action.mean()
    assert after > before


def test_zero_learning_rate_leaves_policy_unchanged():
    agent = SacAgent(1, [-1.0], [1.0], SacHyper(hidden=(8,), lr_policy=0.0), seed=2)
    before = agent.policy.get_flat()
    agent.update_policy(np.ones((16, 1)), _hand_critic)
    assert np.array_equal(agent.policy.get_flat(), before)


def test_entropy_only_increases_stdev():
    agent = SacAgent(1, [-1.0], [1.0], SacHyper(hidden=(8,), alpha=1.0), seed=2)
    # Start narrow: the squashed entropy peaks near unit stdev, so ascent
    # widens the policy only below that.
    agent.policy.params[-1][1] = -2.0
    obs = np.random.default_rng(0).standard_normal((64, 1))
    before = agent.policy(obs)[:, 1].mean()
    for _ in range(5):
        agent.update_policy(obs, lambda o, a: (np.zeros(len(a)), np.zeros_like(a)))
    assert agent.policy(obs)[:, 1].mean() > before


def test_adam_first_step_is_lr_sized():
    p = np.array([1.0, -1.0])
    opt = Adam([p], lr=0.1)
    opt.step([np.array([3.0, -0.5])])
    assert np.allclose(p, [0.9, -0.9])
    with pytest.raises(TrainingError):
        opt.step([np.array([np.inf, 0.0])])


def test_replay_ring_buffer():
    buf = ReplayBuffer(1, 1, capacity=5)
    rng = np.random.default_rng(0)
    for i in range(50):
        buf.add([i], [0.0], float(i), [i + 1], False)
        assert len(buf) <= 5
    assert sorted(buf.rew) == [45.0, 46.0, 47.0, 48.0, 49.0]
    batch = buf.sample(1000, rng)
    assert set(batch["rew"]) == {45.0, 46.0, 47.0, 48.0, 49.0}
    assert np.array_equal(batch["next_obs"][:, 0], batch["obs"][:, 0] + 1)


def test_hyper_validation():
    for bad in (dict(gamma=1.0), dict(tau=0.0), dict(alpha=-1.0),
                dict(batch_size=10, replay_size=5), dict(hidden=())):
        with pytest.raises(ConfigError):
            SacHyper(**bad)


def test_temperature_tracks_target_entropy():
    hyper = SacHyper(hidden=(16,), auto_alpha=True, alpha=1.0, lr_alpha=0.01, lr_policy=1e-3)
    agent = SacAgent(1, [-1.0], [1.0], hyper, seed=0)
    obs = np.zeros((256, 1))
    probe_obs = np.zeros((4096, 1))
    probe_xi = np.random.default_rng(1).standard_normal((4096, 1))
    rng = np.random.default_rng(0)

    def gap():
        entropy = -float(np.mean(squash(agent.policy(probe_obs), probe_xi).log_prob))
        return abs(entropy - agent.target_entropy)

    def critic(o, a):
        return -5.0 * a[:, 0] ** 2, -10.0 * a

    gaps = [gap()]
    for i in range(1, 3001):
        _, log_prob = agent.update_policy(obs, critic, rng)
        agent.update_alpha(log_prob)
        if i % 100 == 0:
            gaps.append(gap())
    # Approach is monotone until the first crossing, then damped.
    first = gaps[:5]
    assert all(a > b for a, b in zip(first, first[1:]))
    assert max(gaps[-10:]) < 0.05 * gaps[0]


def _toy_hyper(**kw):
    base = dict(hidden=(32, 32), epochs=6, steps_per_epoch=500, warmup_steps=500,
                batch_size=64, reward_scale=0.01, lr_policy=1e-3, lr_q=1e-3)
    base.update(kw)
    return SacHyper(**base)


def test_position_to_zero_converges():
    result = train(PositionToZeroEnv, _toy_hyper(), seed=0)
    assert len(result.metrics) == 6
    assert [m["epoch"] for m in result.metrics] == list(range(6))
    agent = result.agent
    env = PositionToZeroEnv()
    runs = [run_episode(env, lambda o: agent.act(o, deterministic=True), s)
            for s in evaluation_seeds(0, 20)]
    assert np.mean([r.mean_abs_position for r in runs]) < 0.1 * 50.0


def test_training_is_deterministic():
    hyper = _toy_hyper(epochs=2, steps_per_epoch=150, warmup_steps=100)
    a = train(PositionToZeroEnv, hyper, seed=5)
    b = train(PositionToZeroEnv, hyper, seed=5)
    assert a.metrics == b.metrics
    for (na, pa), (nb, pb) in zip(a.agent.named_arrays(), b.agent.named_arrays()):
        assert na == nb and np.array_equal(pa, pb)
    assert np.array_equal(a.buffer.obs, b.buffer.obs)
    c = train(PositionToZeroEnv, hyper, seed=6)
    assert c.metrics != a.metrics


def test_replay_bounded_over_long_run():
    hyper = _toy_hyper(epochs=1, steps_per_epoch=400, warmup_steps=400, replay_size=40,
                       batch_size=8)
    result = train(PositionToZeroEnv, hyper, seed=0)
    assert len(result.buffer) == 40 and result.buffer.obs.shape[0] == 40


def test_divergence_reports_partial_metrics():
    hyper = _toy_hyper(epochs=3, steps_per_epoch=100, warmup_steps=50, batch_size=16,
                       reward_scale=1e300, lr_q=1.0)
    with pytest.raises(TrainingError) as err:
        train(PositionToZeroEnv, hyper, seed=0)
    assert isinstance(err.value.metrics, list)
