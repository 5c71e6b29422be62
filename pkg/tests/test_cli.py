import json

import numpy as np
import pytest
import yaml

from breedsim.cli import main
from breedsim.data_io import load_dataset, read_episode_log


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = main(
        [
            "gen-data", "--out", str(out), "--founders", "30", "--markers", "96",
            "--chromosomes", "2", "--seed", "7",
        ]
    )
    assert code == 0
    return out


def dataset_args(data_dir):
    return [
        "--genotypes", str(data_dir / "genotypes.txt"),
        "--markers", str(data_dir / "markers.csv"),
    ]


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------


def test_gen_data_round_trip_and_reproducibility(tmp_path, data_dir):
    dataset = load_dataset(data_dir / "genotypes.txt", data_dir / "markers.csv")
    assert dataset.n_founders == 30 and dataset.n_loci == 96

    again = tmp_path / "again"
    assert main(
        [
            "gen-data", "--out", str(again), "--founders", "30", "--markers", "96",
            "--chromosomes", "2", "--seed", "7",
        ]
    ) == 0
    assert (again / "genotypes.txt").read_bytes() == (data_dir / "genotypes.txt").read_bytes()
    assert (again / "markers.csv").read_bytes() == (data_dir / "markers.csv").read_bytes()

    manifest = json.loads((data_dir / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert manifest["command"] == "gen-data"
    assert manifest["master_seed"] == 7


def test_gen_data_rejects_zero_markers(tmp_path):
    assert main(["gen-data", "--out", str(tmp_path / "x"), "--markers", "0"]) == 2


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate_args(data_dir, out, extra=()):
    return [
        "simulate", *dataset_args(data_dir), "--out", str(out),
        "--n", "10", "--k", "3", "--crosses", "2", "--horizon", "3",
        "--episodes", "5", "--seed", "11", *extra,
    ]


def test_simulate_outputs(tmp_path, data_dir, capsys):
    out = tmp_path / "sim"
    assert main(simulate_args(data_dir, out)) == 0
    records = read_episode_log(out / "episodes.csv")
    assert len(records) == 5 * 4  # five episodes, generations 0..3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["episodes"] == 5
    assert len(summary["final_best"]) == 5
    assert summary["policy"] == "standard-gs"
    finals = [r.best_trait for r in records if r.generation == 3]
    assert summary["final_best_mean"] == pytest.approx(np.mean(finals))
    assert "final best trait" in capsys.readouterr().out


def test_simulate_worker_count_is_invisible(tmp_path, data_dir):
    a, b = tmp_path / "w1", tmp_path / "w3"
    assert main(simulate_args(data_dir, a, ("--workers", "1"))) == 0
    assert main(simulate_args(data_dir, b, ("--workers", "3"))) == 0
    assert (a / "episodes.csv").read_bytes() == (b / "episodes.csv").read_bytes()


def test_simulate_usage_errors(tmp_path, data_dir):
    assert main(simulate_args(data_dir, tmp_path / "x", ("--policy", "psychic"))) == 2
    assert main(simulate_args(data_dir, tmp_path / "y", ("--env", "warp-gym"))) == 2
    assert main(
        simulate_args(data_dir, tmp_path / "z", ("--env", "pair-score"))
    ) == 2  # score policies cannot drive it from the CLI


def test_simulate_learned_checkpoint_marker_mismatch(tmp_path, data_dir):
    from breedsim.policy_net import NetConfig, init_params, save_checkpoint
    from breedsim.rng import RngStream

    ckpt = tmp_path / "wrong.ckpt"
    save_checkpoint(ckpt, init_params(NetConfig(markers=200), RngStream(0)))
    code = main(simulate_args(data_dir, tmp_path / "sim", ("--policy", f"learned:{ckpt}")))
    assert code == 2


def test_simulate_random_policy_and_simplified_env(tmp_path, data_dir):
    assert main(simulate_args(data_dir, tmp_path / "r", ("--policy", "random"))) == 0
    assert main(
        simulate_args(data_dir, tmp_path / "s", ("--env", "simplified-breeding-gym"))
    ) == 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def test_compare_self_comparison_is_exactly_zero(tmp_path, data_dir, capsys):
    out = tmp_path / "cmp"
    code = main(
        [
            "compare", *dataset_args(data_dir), "--out", str(out),
            "--policies", "standard-gs", "standard-gs",
            "--n", "10", "--k", "3", "--crosses", "2", "--horizon", "3",
            "--episodes", "4", "--seed", "2",
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    entry = summary["policies"]["p1_standard-gs"]
    assert entry["pct_diff_vs_first"] == 0.0

    report = (out / "report.csv").read_text().splitlines()
    assert len(report) == 1 + 4  # header + generations 0..3
    assert report[0].split(",")[0] == "generation"
    assert "+0.00%" in capsys.readouterr().out


def test_compare_standard_gs_beats_random(tmp_path, data_dir):
    out = tmp_path / "cmp2"
    code = main(
        [
            "compare", *dataset_args(data_dir), "--out", str(out),
            "--policies", "standard-gs", "random",
            "--n", "12", "--k", "3", "--crosses", "3", "--horizon", "4",
            "--episodes", "30", "--seed", "3",
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    entry = summary["policies"]["p1_random"]
    assert entry["final_best_mean"] < summary["policies"]["p0_standard-gs"]["final_best_mean"]
    assert entry["p_first_greater"] < 0.05


def test_compare_requires_two_policies(tmp_path, data_dir):
    code = main(
        [
            "compare", *dataset_args(data_dir), "--out", str(tmp_path / "c"),
            "--policies", "standard-gs", "--episodes", "2",
        ]
    )
    assert code == 2


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def test_train_smoke_and_resume(tmp_path, data_dir):
    out = tmp_path / "train"
    base = [
        "train", *dataset_args(data_dir), "--out", str(out),
        "--total-steps", "64", "--num-envs", "2", "--rollout-length", "8",
        "--minibatch-size", "8", "--epochs", "2", "--curriculum", "0:2",
        "--n", "6", "--k", "3", "--crosses", "2",
        "--eval-every", "2", "--eval-episodes", "3", "--checkpoint-every", "2",
        "--seed", "5",
    ]
    assert main(base) == 0
    assert (out / "checkpoint_final" / "policy.ckpt").exists()
    assert (out / "metrics.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert manifest["config"]["total_steps"] == 64

    resumed = tmp_path / "resumed"
    resume_args = [x if x != str(out) else str(resumed) for x in base]
    resume_args += ["--resume", str(out / "checkpoints" / "update_00002")]
    assert main(resume_args) == 0
    straight = (out / "metrics.csv").read_text().splitlines()
    cont = (resumed / "metrics.csv").read_text().splitlines()
    assert cont[1:] == straight[3:]


def test_train_missing_dataset_path(tmp_path):
    code = main(
        [
            "train", "--genotypes", str(tmp_path / "nope.txt"),
            "--markers", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "t"),
            "--total-steps", "8",
        ]
    )
    assert code == 2


def test_trained_checkpoint_is_usable_by_simulate(tmp_path, data_dir):
    out = tmp_path / "train2"
    assert main(
        [
            "train", *dataset_args(data_dir), "--out", str(out),
            "--total-steps", "32", "--num-envs", "2", "--rollout-length", "8",
            "--minibatch-size", "8", "--epochs", "1", "--curriculum", "0:2",
            "--n", "6", "--k", "3", "--crosses", "2", "--eval-episodes", "2",
        ]
    ) == 0
    sim_out = tmp_path / "sim2"
    code = main(
        simulate_args(
            data_dir, sim_out,
            ("--policy", f"learned:{out / 'checkpoint_final' / 'policy.ckpt'}",
             "--n", "6", "--k", "3", "--crosses", "2"),
        )
    )
    assert code == 0


# ---------------------------------------------------------------------------
# gradcheck & config overrides
# ---------------------------------------------------------------------------


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--markers", "96", "--plants", "2", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "max relative error" in out


def test_gradcheck_tolerance_failure():
    assert main(
        ["gradcheck", "--markers", "96", "--plants", "2", "--seed", "1", "--tol", "1e-12"]
    ) == 1


def test_data_dir_env_var_resolves_relative_paths(tmp_path, data_dir, monkeypatch):
    monkeypatch.setenv("BREEDSIM_DATA_DIR", str(data_dir))
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "sim_envvar"
    code = main(
        [
            "simulate", "--genotypes", "genotypes.txt", "--markers", "markers.csv",
            "--out", str(out), "--n", "10", "--k", "3", "--crosses", "2",
            "--horizon", "2", "--episodes", "2", "--seed", "1",
        ]
    )
    assert code == 0
    assert (out / "summary.json").exists()


def test_config_file_overrides_flags(tmp_path, data_dir):
    cfg = tmp_path / "override.yaml"
    cfg.write_text(yaml.safe_dump({"episodes": 3, "seed": 99}))
    out = tmp_path / "cfg_sim"
    code = main(simulate_args(data_dir, out, ("--config", str(cfg))))
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["episodes"] == 3

    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"imaginary_option": 1}))
    assert main(simulate_args(data_dir, tmp_path / "x", ("--config", str(bad)))) == 2
