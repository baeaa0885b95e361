import os

import numpy as np
import pandas as pd
import pytest

SMALL_CONFIG = """\
name: small
problem:
  name: ou-1d
schemes:
  - variant: pade-general
  - variant: krylov
    beta: 1
    krylov:
      m: 4
plan:
  step_sizes: [0.5, 0.25, 0.125]
  samples: 600
  functionals: [x1, x1^2]
include_euler: true
trajectory:
  h: 0.1
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yml"
    path.write_text(SMALL_CONFIG)
    return str(path)


def load_manifest(directory):
    from ruamel.yaml import YAML
    with open(os.path.join(directory, "manifest.yml")) as f:
        return YAML(typ="safe").load(f)


def test_list_schemes():
    from wllpypeline import list_schemes, SCHEME_VARIANTS
    text = list_schemes()
    for variant in SCHEME_VARIANTS + ("euler",):
        assert f"\n{variant}: " in "\n" + text
    assert text.count("preconditions:") == len(SCHEME_VARIANTS) + 1


def test_run_convergence(small_config, tmp_path):
    from wllpypeline import WLLInitializer, ExperimentRunner
    runner = ExperimentRunner.from_WLLInitializer(WLLInitializer(small_config, loglevel="WARNING"),
                                                  out=str(tmp_path / "out"))
    assert runner.check_model() == []
    reports = runner.run_convergence()
    assert list(reports) == [scheme.name for scheme in runner.config.schemes]
    files = sorted(os.listdir(runner.experiment_dir))
    expected = sorted([f"{name}.csv" for name in reports] + ["summary.csv", "config.yml", "manifest.yml"])
    assert files == expected

    summary = pd.read_csv(os.path.join(runner.experiment_dir, "summary.csv"))
    assert len(summary) == 2 * len(reports)
    assert set(summary["status"]) <= {"ok", "noise-floor", "insufficient-points"}
    table = pd.read_csv(os.path.join(runner.experiment_dir, "euler.csv"))
    assert table.columns.tolist() == ["scheme", "functional", "h", "error", "stderr", "n", "estimate", "reference",
                                      "reference_stderr"]
    assert len(table) == 6

    manifest = load_manifest(runner.experiment_dir)
    assert manifest["experiment"] == "small"
    assert manifest["config_sha256"] == runner.config.config_hash
    assert {"wllpypeline", "python", "numpy", "scipy", "pandas"} <= set(manifest["versions"])
    assert sorted(manifest["files"]) == sorted(f for f in files if f.endswith(".csv"))
    assert all(entry == {"command": "run-convergence", "seed": 1} for entry in manifest["files"].values())


def test_run_convergence_thread_independent(small_config, tmp_path):
    from wllpypeline import WLLInitializer, ExperimentRunner
    dirs = []
    for threads in (1, 3):
        out = str(tmp_path / f"threads{threads}")
        runner = ExperimentRunner.from_WLLInitializer(WLLInitializer(small_config, loglevel="WARNING"), out=out,
                                                      threads=threads)
        runner.run_convergence()
        dirs.append(runner.experiment_dir)
    for file in os.listdir(dirs[0]):
        with open(os.path.join(dirs[0], file), "rb") as a, open(os.path.join(dirs[1], file), "rb") as b:
            assert a.read() == b.read(), file


def test_run_convergence_fine_grid(tmp_path):
    from wllpypeline import load_example_experiment
    runner = load_example_experiment("pendulum_pade11", configs={
        "plan": {"samples": 100, "reference": "fine-grid", "reference_samples": 400,
                 "step_sizes": [0.5, 0.25, 0.125]},
        "output": {"directory": str(tmp_path)},
    })
    reports = runner.run_convergence()
    assert len(reports) == 3
    for report in reports.values():
        assert (report.table["reference_stderr"] > 0).all()
        assert report.table["reference"].nunique() == 1
    references = {report.table["reference"].iloc[0] for report in reports.values()}
    assert len(references) == 1


def test_run_convergence_stored_pendulum_reference(tmp_path):
    from wllpypeline import load_example_experiment
    from wllpypeline.modules.Catalog import builtin_problem
    runner = load_example_experiment("pendulum_beta1", configs={
        "plan": {"samples": 100, "step_sizes": [0.5, 0.25]},
        "output": {"directory": str(tmp_path)},
    })
    assert runner.config.plan.reference == "analytic"
    expected = builtin_problem("pendulum-sin").reference
    for report in runner.run_convergence().values():
        for label, table in report.table.groupby("functional"):
            assert (table["reference"] == expected.expectation(label)[0]).all()
            assert (table["reference_stderr"] < 1e-5).all()


def test_run_trajectory(small_config, tmp_path):
    from wllpypeline import WLLInitializer, ExperimentRunner
    out = str(tmp_path / "out")
    runner = ExperimentRunner.from_WLLInitializer(WLLInitializer(small_config, loglevel="WARNING"), out=out)
    paths = runner.run_trajectory()
    assert len(paths) == 3
    assert all(os.path.basename(p).startswith("trajectory_") and p.endswith("_seed1.csv") for p in paths)
    df = pd.read_csv(paths[0], keep_default_na=False)
    assert df.columns.tolist() == ["t", "x1", "jump_channels"]
    assert len(df) == 11
    np.testing.assert_allclose(df["t"], np.linspace(0, 1, 11), atol=1e-14)
    assert df.loc[0, "x1"] == 1.0
    assert (df["jump_channels"] == "").all()

    again = runner.run_trajectory()
    assert all(open(a).read() == open(b).read() for a, b in zip(paths, again))
    other = runner.run_trajectory(seed=5, h=0.25)
    assert all(p.endswith("_seed5.csv") for p in other)
    assert len(pd.read_csv(other[0])) == 5

    manifest = load_manifest(runner.experiment_dir)
    names = [os.path.basename(p) for p in paths + other]
    assert sorted(manifest["files"]) == sorted(names)
    assert manifest["files"][os.path.basename(other[0])] == {"command": "run-trajectory", "seed": 5, "h": 0.25}


def test_run_trajectory_jumps(tmp_path):
    from wllpypeline import load_example_experiment
    runner = load_example_experiment("jump_ou", configs={"output": {"directory": str(tmp_path)},
                                                          "trajectory": {"h": 0.1}})
    paths = runner.run_trajectory(seed=3)
    df = pd.read_csv(paths[0], keep_default_na=False, dtype={"jump_channels": str})
    n_jumps = int((df["jump_channels"] == "1").sum())
    assert len(df) == 11 + n_jumps
    assert set(df["jump_channels"]) <= {"", "1"}
    assert np.all(np.diff(df["t"]) > 0)
    assert df["t"].iloc[-1] == pytest.approx(1.0)


def test_manifest_reset_on_config_change(small_config, tmp_path):
    from wllpypeline import WLLInitializer, ExperimentRunner
    out = str(tmp_path / "out")
    init = WLLInitializer(small_config, loglevel="WARNING")
    runner = ExperimentRunner.from_WLLInitializer(init, out=out)
    first = runner.run_trajectory()
    init.configs["problem"]["params"] = {"a": -0.5}
    runner = ExperimentRunner.from_WLLInitializer(init, out=out)
    second = runner.run_trajectory(seed=2)
    manifest = load_manifest(runner.experiment_dir)
    assert manifest["config_sha256"] == runner.config.config_hash
    assert sorted(manifest["files"]) == sorted(os.path.basename(p) for p in second)
    assert not set(manifest["files"]) & {os.path.basename(p) for p in first}
