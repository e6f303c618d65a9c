import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hedgelab.checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, read_checkpoint, save_checkpoint
from hedgelab.config import ExperimentConfig, env_overrides, load_config, parse_lines
from hedgelab.dashboard import episode_columns, export_dashboard, read_episode_csv, write_episode_csv
from hedgelab.env import EPISODE_COLUMNS, EnvConfig, HedgeEnv
from hedgelab.errors import ConfigError, DataError, ParameterError
from hedgelab.metrics import JsonlWriter, read_jsonl, sharpe_ratio, summarize
from hedgelab.portfolio import PORTFOLIO_COLUMNS, PortfolioEnv
from hedgelab.sac import SacAgent, SacHyper


def test_sharpe_hand_value():
    assert sharpe_ratio([0, 1, 3, 2]) == pytest.approx(0.4364357804719847, rel=1e-12)
    assert sharpe_ratio([0, 1, 3, 2]) == pytest.approx(0.43644, abs=1e-5)


def test_sharpe_constant_series_is_nan():
    assert math.isnan(sharpe_ratio([5.0, 5.0, 5.0, 5.0]))


def test_sharpe_too_short():
    with pytest.raises(ParameterError):
        sharpe_ratio([1.0, 2.0])


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.floats(0.01, 100))
def test_sharpe_scale_invariant(series, c):
    s = sharpe_ratio(series)
    scaled = sharpe_ratio([c * x for x in series])
    if math.isnan(s) or np.std(np.diff(series)) < 1e-6:
        return
    assert scaled == pytest.approx(s, rel=1e-6, abs=1e-9)


def test_summary_of_nothing():
    s = summarize([])
    assert s["episodes"] == 0 and s["mean_reward"] is None


def test_config_round_trip_default():
    cfg = ExperimentConfig()
    assert ExperimentConfig.from_flat(parse_lines(cfg.dumps())) == cfg


def test_config_round_trip_with_overrides():
    cfg = load_config(overrides={"market.sigma": "0.035", "sac.hidden": "64,32",
                                 "env.terminal_extra_penalty": "12.5", "run.mode": "portfolio",
                                 "portfolio.convex_parametrization": "true"})
    assert cfg.market.sigma == 0.035 and cfg.sac.hidden == (64, 32)
    assert cfg.env.terminal_extra_penalty == 12.5 and cfg.portfolio.convex_parametrization
    again = ExperimentConfig.from_flat(parse_lines(cfg.dumps()))
    assert again == cfg and again.dumps() == cfg.dumps()


def test_config_file_env_and_set_precedence(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# comment\n\nmarket.sigma = 0.03\nsac.epochs = 7\nflow.beta_skew=2\n")
    environ = {"HEDGELAB_SAC__EPOCHS": "9", "HEDGELAB_FLOW__BETA_SKEW": "3", "PATH": "/bin"}
    cfg = load_config(path, {"flow.beta_skew": "5"}, environ)
    assert cfg.market.sigma == 0.03
    assert cfg.sac.epochs == 9
    assert cfg.flow.beta_skew == 5.0


def test_env_override_parsing():
    assert env_overrides({"HEDGELAB_MARKET__S0": "50"}) == {"market.s0": "50"}
    with pytest.raises(ConfigError):
        env_overrides({"HEDGELAB_MARKET": "1"})


@pytest.mark.parametrize("flat", [{"market.nope": "1"}, {"nosection.x": "1"}, {"market": "1"},
                                  {"env.mode": "skew"}, {"market.sigma": "abc"},
                                  {"sac.auto_alpha": "maybe"}, {"run.mode": "other"},
                                  {"market.sigma": "-1"}])
def test_config_rejects_bad_keys_and_values(flat):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_flat(flat)


def test_config_line_without_equals(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("market.sigma 0.1\n")
    with pytest.raises(ConfigError):
        load_config(path, environ={})


def test_env_config_carries_sections():
    cfg = load_config(overrides={"run.mode": "skew", "market.sigma": "0.04",
                                 "env.max_hedge_size": "7"}, environ={})
    env_cfg = cfg.env_config()
    assert env_cfg.mode == "skew" and env_cfg.market.sigma == 0.04
    assert env_cfg.flow.max_hedge_size == 7.0
    assert load_config(overrides={"run.mode": "dummy"}, environ={}).env_config().mode == "single"


def _agent(alpha=0.2):
    return SacAgent(3, [-10.0, -5.0], [10.0, 5.0], SacHyper(hidden=(8, 4), alpha=alpha), seed=4)


@pytest.mark.parametrize("alpha", [0.2, 0.0])
def test_checkpoint_round_trip_bit_exact(tmp_path, alpha):
    agent = _agent(alpha)
    for _, a in agent.named_arrays():
        a += np.random.default_rng(1).standard_normal(a.shape) * 1e-3
    path = tmp_path / "ck.bin"
    save_checkpoint(path, agent, {"run.mode": "portfolio"})
    loaded, header = load_checkpoint(path)
    assert header["format_version"] == FORMAT_VERSION
    assert header["config"] == {"run.mode": "portfolio"}
    assert header["layers"] == {"policy": [3, 8, 4, 4], "q": [5, 8, 4, 1]}
    for (na, a), (nb, b) in zip(agent.named_arrays(), loaded.named_arrays()):
        assert na == nb
        assert a.tobytes() == b.tobytes()
    assert loaded.hyper == agent.hyper
    obs = np.array([0.1, -0.2, 0.3])
    assert np.array_equal(agent.act(obs, True), loaded.act(obs, True))
    save_checkpoint(tmp_path / "again.bin", loaded, {"run.mode": "portfolio"})
    assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()


def test_checkpoint_layout(tmp_path):
    agent = _agent()
    path = tmp_path / "ck.bin"
    save_checkpoint(path, agent)
    data = path.read_bytes()
    magic, version, n = struct.unpack_from("<8sII", data)
    assert magic == MAGIC and version == FORMAT_VERSION
    header, arrays = read_checkpoint(path)
    first = agent.named_arrays()[0][1]
    start = 16 + n
    assert np.array_equal(np.frombuffer(data[start:start + 8 * first.size], "<f8").reshape(first.shape), first)
    assert list(arrays) == [name for name, _ in agent.named_arrays()]


def test_checkpoint_corruption(tmp_path):
    path = tmp_path / "ck.bin"
    save_checkpoint(path, _agent())
    data = path.read_bytes()
    (tmp_path / "bad_magic.bin").write_bytes(b"X" + data[1:])
    (tmp_path / "short.bin").write_bytes(data[:-8])
    (tmp_path / "long.bin").write_bytes(data + b"\0" * 8)
    for name in ("bad_magic.bin", "short.bin", "long.bin"):
        with pytest.raises(DataError):
            read_checkpoint(tmp_path / name)


def test_jsonl_writer(tmp_path):
    path = tmp_path / "m.jsonl"
    with JsonlWriter(path) as w:
        w.write({"epoch": 0, "x": np.float64(1.5), "y": float("nan"), "n": np.int64(3)})
        w.write({"epoch": 1, "x": None})
    assert read_jsonl(path) == [{"epoch": 0, "x": 1.5, "y": None, "n": 3}, {"epoch": 1, "x": None}]


def _episode(mode="single"):
    if mode == "portfolio":
        env = PortfolioEnv()
    else:
        env = HedgeEnv(EnvConfig(mode=mode))
    env.reset(2)
    done = False
    while not done:
        _, _, done, _ = env.step(env.heuristic_action())
    return env.records


@pytest.mark.parametrize("mode", ["single", "skew", "price_of_risk", "portfolio"])
def test_episode_csv_round_trip(tmp_path, mode):
    records = _episode(mode)
    path = tmp_path / "episode.csv"
    cols = write_episode_csv(records, path)
    back = read_episode_csv(path)
    assert len(back) == len(records)
    assert ("maker_spread" in cols) == (mode == "price_of_risk")
    if mode == "portfolio":
        assert cols == list(PORTFOLIO_COLUMNS)
    else:
        assert cols[:len(EPISODE_COLUMNS)] == list(EPISODE_COLUMNS)
    for a, b in zip(records, back):
        for c in cols:
            if c == "maker_spread" or c == "taker_spread":
                assert (math.isnan(a[c]) and math.isnan(b[c])) or a[c] == b[c]
            else:
                assert a[c] == b[c]
        assert b["client_pnl"] + b["hedge_pnl"] + b["market_pnl"] == pytest.approx(b["net_pnl"], abs=1e-9)
        assert b["net_pos"] == pytest.approx(b["client_pos"] + b["hedge_pos"], abs=1e-9)


def test_dashboard_svg(tmp_path):
    records = _episode("price_of_risk")
    path = tmp_path / "dash.svg"
    export_dashboard(records, path, reward_history=[None, -5.0, -3.0], title="t")
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    export_dashboard(records, tmp_path / "again.svg", reward_history=[None, -5.0, -3.0], title="t")
    assert (tmp_path / "again.svg").read_text() == text


def test_episode_columns_empty():
    assert episode_columns([]) == list(EPISODE_COLUMNS)
