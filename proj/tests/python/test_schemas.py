import pytest

import hyperl
from hyperl import schemas


def trained_run(tmp_path, seeds):
    cfg = hyperl.build_config({}, {
        "env": "ks",
        "agent": "hyperl_param",
        "seed": seeds,
        "episodes": "2",
        "ks_horizon": "5",
        "eval_every": "1",
        "eval_mu_count": "2",
        "hyper_main_hidden": "8",
        "hyper_embed": "4",
        "batch_size": "4",
        "warmup_steps": "3",
        "log_wall_time": "false",
        "out": str(tmp_path / "run"),
    })
    hyperl.run_training(cfg)
    return cfg, tmp_path / "run"


def test_runlog_schema_matches_harness_output(tmp_path):
    _, run = trained_run(tmp_path, "0,1")
    table = schemas.load_csv(run / "train.csv", "runlog")
    assert tuple(table) == schemas.RUNLOG_COLUMNS
    assert ",".join(schemas.RUNLOG_COLUMNS) == hyperl.RUNLOG_HEADER
    assert sorted(set(table["seed"])) == [0, 1]
    ev = schemas.load_csv(run / "eval.csv", "runlog")
    assert set(ev["phase"]) == {"eval"}


def test_stats_export_schema_and_ci_columns(tmp_path):
    _, run = trained_run(tmp_path, "0,1")
    recs = hyperl.read_runlog(run / "train.csv") + hyperl.read_runlog(run / "eval.csv")
    hyperl.write_stats_csv(recs, tmp_path / "stats.csv", [1])
    table = schemas.load_csv(tmp_path / "stats.csv", "stats")
    assert ",".join(schemas.STATS_COLUMNS) == hyperl.STATS_HEADER
    assert table["phase"] == ["train", "train", "eval", "eval"]
    assert table["window"] == ["all", ">1", "all", ">1"]
    for low, mean, high in zip(table["ci_low"], table["mean"], table["ci_high"]):
        assert low <= mean <= high

    single = [r for r in recs if r.seed == 0]
    hyperl.write_stats_csv(single, tmp_path / "single.csv")
    one = schemas.load_csv(tmp_path / "single.csv", "stats")
    assert one["ci_low"] == [None, None]
    assert one["ci_high"] == [None, None]


def test_single_seed_band_has_zero_width(tmp_path):
    _, run = trained_run(tmp_path, "4")
    table = schemas.load_csv(run / "train.csv", "runlog")
    episodes, means, stds = schemas.episode_bands(table)
    assert episodes == [1, 2]
    assert stds == [0.0, 0.0]
    assert means == table["cum_reward"]


def test_trajectory_schema(tmp_path):
    cfg, run = trained_run(tmp_path, "0")
    t = hyperl.Trainer(cfg, 0)
    rec = t.rollout(7, 0.1, 2, tmp_path / "traj.csv")
    table = schemas.load_csv(tmp_path / "traj.csv", "trajectory")
    assert tuple(table) == schemas.trajectory_columns(64, 8)
    assert table["t_index"] == list(range(6))
    assert table["controlled"][1] == 0 and table["controlled"][3] == 1
    assert sum(table["reward"]) == pytest.approx(rec.cum_reward, rel=0, abs=1e-9)


def test_schema_violations_are_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(schemas.SchemaError):
        schemas.load_csv(empty, "runlog")

    header_only = tmp_path / "header.csv"
    header_only.write_text(hyperl.RUNLOG_HEADER + "\n")
    with pytest.raises(schemas.SchemaError):
        schemas.load_csv(header_only, "runlog")

    extra = tmp_path / "extra.csv"
    extra.write_text(hyperl.RUNLOG_HEADER + ",bonus\ntrain,0,1,0,-1,1,0,5,0,0,7\n")
    with pytest.raises(schemas.SchemaError, match="unknown columns"):
        schemas.load_csv(extra, "runlog")

    bad_value = tmp_path / "bad.csv"
    bad_value.write_text(hyperl.RUNLOG_HEADER + "\ntrain,0,1,zero,-1,1,0,5,0,0\n")
    with pytest.raises(schemas.SchemaError):
        schemas.load_csv(bad_value, "runlog")

    with pytest.raises(schemas.SchemaError):
        schemas.load_csv(bad_value, "figures")
