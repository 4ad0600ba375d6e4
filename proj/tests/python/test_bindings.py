import math

import pytest

import hyperl


def small_toy(tmp_path, agent="hyperl_param", **extra):
    overrides = {
        "env": "toy",
        "agent": agent,
        "seed": "0,1",
        "episodes": "4",
        "eval_every": "2",
        "eval_mu_count": "2",
        "td3_hidden": "16",
        "hyper_main_hidden": "8",
        "hyper_embed": "4",
        "batch_size": "4",
        "warmup_steps": "5",
        "log_wall_time": "false",
        "out": str(tmp_path / "run"),
    }
    overrides.update(extra)
    return hyperl.build_config({}, overrides)


def test_config_precedence_and_errors():
    cfg = hyperl.build_config({"gamma": "0.95", "rho": "0.01"}, {"rho": "0.02"})
    assert cfg.get("gamma") == "0.95"
    assert cfg.get("rho") == "0.02"
    assert cfg.get("batch_size") == "256"
    names = [k[0] for k in hyperl.config_keys()]
    assert len(hyperl.parse_config_text(cfg.to_text())) == len(names)
    with pytest.raises(hyperl.ConfigError):
        hyperl.build_config({}, {"agent": "ppo"})
    with pytest.raises(ValueError):
        hyperl.build_config({}, {"no_such_key": "1"})


def test_ks_environment_step():
    env = hyperl.make_env(hyperl.build_config({}, {"env": "ks"}))
    assert env.observation_dim == 64
    assert env.action_dim == 8
    env.reset(3, "eval", 0.1)
    assert env.mu == 0.1
    reward, state_cost, action_cost = env.step([0.0] * 8)
    assert reward <= 0.0
    assert state_cost >= 0.0
    assert action_cost == 0.0
    assert env.t_index == 1
    with pytest.raises(hyperl.DimensionError):
        env.step([0.0] * 3)


def test_agent_actions_are_bounded_and_deterministic():
    cfg = hyperl.build_config({}, {"env": "ks", "hyper_main_hidden": "16", "hyper_embed": "8"})
    env = hyperl.make_env(cfg)
    env.reset(1, "train")
    a = hyperl.make_agent(cfg, env, 5)
    b = hyperl.make_agent(cfg, env, 5)
    assert a.kind == "hyperl_param"
    act = a.act(env.observation, env.mu)
    assert len(act) == 8
    assert all(-1.0 <= x <= 1.0 for x in act)
    assert act == b.act(env.observation, env.mu)
    assert a.state().keys() == b.state().keys()


def test_network_helpers():
    dims = [3, 5, 2]
    params = hyperl.mlp_init(dims, 4)
    assert len(params) == hyperl.mlp_param_count(dims) == 3 * 5 + 5 + 5 * 2 + 2
    assert hyperl.mlp_forward(dims, "linear", [0.0] * len(params), [1.0, 2.0, 3.0]) == [0.0, 0.0]
    h = hyperl.hyper_init(1, [4], dims, 2)
    theta = hyperl.hyper_generate(1, [4], dims, h, [0.5])
    assert len(theta) == len(params)
    assert theta != hyperl.hyper_generate(1, [4], dims, h, [-0.5])


def test_training_is_reproducible(tmp_path):
    a = hyperl.run_training(small_toy(tmp_path / "a"))
    b = hyperl.run_training(small_toy(tmp_path / "b"))
    assert a == b
    train = [r for r in a if r.phase == "train"]
    assert len(train) == 8
    assert (tmp_path / "a" / "run" / "train.csv").read_bytes() == (tmp_path / "b" / "run" / "train.csv").read_bytes()
    back = hyperl.read_runlog(tmp_path / "a" / "run" / "train.csv")
    assert back == train


def test_trainer_checkpoint_and_eval(tmp_path):
    cfg = small_toy(tmp_path)
    t = hyperl.Trainer(cfg, 1)
    for _ in range(3):
        t.train_episode()
    t.save_checkpoint(tmp_path / "ck")
    u = hyperl.Trainer(cfg, 1)
    u.restore(tmp_path / "ck")
    assert u.episode == 3
    assert t.train_episode() == u.train_episode()
    ev = t.evaluate()
    assert len(ev) == 2
    assert all(r.phase == "eval" for r in ev)


def test_stats_bindings(tmp_path):
    recs = []
    for s in range(2):
        for e in range(1, 5):
            r = hyperl.EpisodeRecord()
            r.seed = s
            r.episode = e
            r.cum_reward = -float(e + s)
            recs.append(r)
    rows = hyperl.aggregate_phase_stats(recs, [2])
    assert [r.label for r in rows] == ["all", ">2"]
    assert rows[0].count == 8
    assert rows[0].mean == pytest.approx(-3.0)
    low, high = hyperl.bootstrap_ci([[0.0] * 10, [10.0] * 10], seed=3)
    assert low < 5.0 < high
    assert (low, high) == hyperl.bootstrap_ci([[0.0] * 10, [10.0] * 10], seed=3)
    with pytest.raises(hyperl.ConfigError):
        hyperl.bootstrap_ci([[1.0]])
    path = tmp_path / "stats.csv"
    hyperl.write_stats_csv(recs, path, [2])
    assert path.read_text().splitlines()[0] == hyperl.STATS_HEADER


def test_cli_entry_point(tmp_path):
    code, out, err = hyperl.cli(["train", "--rho", "0.03", "--show-config"])
    assert code == 0
    assert "rho = 0.03" in out
    code, out, err = hyperl.cli(["train", "--episodes", "abc"])
    assert code == 2
    assert err.startswith("error: exit=2 kind=config message=")
    assert math.isfinite(hyperl.derive_seed(1, 2, 3))
