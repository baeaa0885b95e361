import os

import pytest


def write_yml(path, text: str) -> str:
    path = str(path)
    with open(path, "w") as f:
        f.write(text)
    return path


def test_defaults(tmp_path):
    from wllpypeline import WLLInitializer, ExperimentConfig, SchemeConfig
    init = WLLInitializer(loglevel="WARNING")
    assert init.configs == init.defaults
    assert init.file_path_yaml == WLLInitializer.get_default_yml_path()
    config = init.validate(out=str(tmp_path))
    assert isinstance(config, ExperimentConfig)
    assert config.name == "experiment"
    assert config.problem.model.name == "ou-1d"
    assert config.schemes == (SchemeConfig(),)
    assert config.plan.step_sizes == (0.25, 0.125, 0.0625, 0.03125, 0.015625)
    assert config.plan.samples == 10000
    assert config.plan.n_reference_samples == 40000
    assert config.seed == 1 and config.threads == 1
    assert config.jumps is None
    assert config.experiment_dir == os.path.join(str(tmp_path), "experiment")
    assert not set(config.configs) & {"threads", "output", "loglevel"}


def test_bundled_experiments(tmp_path):
    from wllpypeline import WLLInitializer
    bundled = WLLInitializer.list_bundled_experiments()
    assert {"ou1d", "ou_nd", "pendulum_beta1", "pendulum_beta2", "pendulum_pade11", "jump_ou",
            "pendulum_jumps"} <= set(bundled)
    for name in bundled:
        config = WLLInitializer(name, loglevel="WARNING").validate(out=str(tmp_path))
        assert config.name == name
    config = WLLInitializer("ou1d", loglevel="WARNING").validate(out=str(tmp_path))
    names = [scheme.name for scheme in config.schemes]
    assert len(names) == 7 and names[-1] == "euler"
    krylov = [scheme for scheme in config.schemes if scheme.variant == "krylov"][0]
    assert krylov.krylov.m == 4
    assert config.schemes[-2].noise == "two-point"
    jump_config = WLLInitializer("jump_ou", loglevel="WARNING").validate(out=str(tmp_path))
    assert jump_config.jumps.mu == (2.0,)


def test_invalid_files(tmp_path):
    from wllpypeline import WLLInitializer, ConfigError
    with pytest.raises(ConfigError):
        WLLInitializer("not-an-experiment")
    with pytest.raises(ConfigError):
        WLLInitializer(str(tmp_path / "missing.yml"))
    with pytest.raises(ConfigError):
        WLLInitializer(write_yml(tmp_path / "list.yml", "- 1\n- 2\n"))
    with pytest.raises(ConfigError):
        WLLInitializer(write_yml(tmp_path / "broken.yml", "name: [unclosed\n"))
    with pytest.raises(ConfigError) as e:
        WLLInitializer(write_yml(tmp_path / "unknown.yml", "name: x\nsamples: 10\n"))
    assert "samples" in str(e.value)
    empty = WLLInitializer(write_yml(tmp_path / "empty.yml", ""))
    assert empty.configs == empty.defaults


@pytest.mark.parametrize("text,key", [
    ("problem:\n  name: unknown\n", "problem"),
    ("problem:\n  name: ou-1d\n  params:\n    b: 1.0\n", "problem"),
    ("schemes:\n  - variant: pade\n", "schemes[0]"),
    ("schemes:\n  - variant: pade-general\n    order: 2\n", "schemes[0]"),
    ("schemes:\n  - variant: midpoint\n    beta: 1\n", "schemes[0]"),
    ("schemes:\n  - {variant: pade-general}\n  - {variant: pade-general}\n", "schemes"),
    ("problem:\n  name: time-dep-g\nschemes:\n  - variant: ozaki-shoji\n", "schemes[0]"),
    ("seed: -1\n", "seed"),
    ("seed: 1.5\n", "seed"),
    ("threads: 0\n", "threads"),
    ("plan:\n  samples: 50\n", "plan"),
    ("plan:\n  step_sizes: [0.1, 0.2]\n", "plan"),
    ("plan:\n  step_sizes: [2.0, 1.0]\n", "plan"),
    ("plan:\n  functionals: [x3]\n", "plan"),
    ("plan:\n  budget: 1\n", "plan"),
    ("problem:\n  name: jump-ou\nplan:\n  functionals: [cos_x1]\n", "plan.reference"),
    ("jumps:\n  intensities: [1.0]\n  coefficients:\n    - {name: constant, c: 0.5}\n", "plan.reference"),
    ("jumps:\n  intensities: [1.0, 2.0]\n  coefficients:\n    - {name: constant}\n", "jumps"),
    ("jumps:\n  intensities: [1.0]\n  coefficients:\n    - {name: quadratic}\n", "jumps.coefficients[0]"),
    ("trajectory:\n  h: 1.5\n", "trajectory.h"),
    ("trajectory:\n  h: 0\n", "trajectory.h"),
    ("name: ''\n", "name"),
])
def test_validate_errors(tmp_path, text, key):
    from wllpypeline import WLLInitializer, ConfigError
    init = WLLInitializer(write_yml(tmp_path / "config.yml", text), loglevel="WARNING")
    with pytest.raises(ConfigError) as e:
        init.validate(out=str(tmp_path))
    assert str(e.value).startswith(key)


def test_jumps_override(tmp_path):
    from wllpypeline import WLLInitializer
    text = "problem:\n  name: pendulum-jumps\nplan:\n  reference: fine-grid\njumps:\n  intensities: [1.0, 0.5]\n" \
           "  coefficients:\n    - {name: constant, c: 0.5}\n    - {name: proportional, c: -0.2}\n"
    config = WLLInitializer(write_yml(tmp_path / "config.yml", text), loglevel="WARNING").validate(out=str(tmp_path))
    assert config.jumps.mu == (1.0, 0.5)
    assert config.jumps.labels == ("constant", "proportional")


def test_output_precedence(tmp_path, monkeypatch):
    from wllpypeline import WLLInitializer, ConfigError
    init = WLLInitializer(loglevel="WARNING")
    monkeypatch.delenv(WLLInitializer.out_env_variable, raising=False)
    monkeypatch.chdir(tmp_path)
    assert init.validate().output_directory == "results"
    env_dir = str(tmp_path / "env")
    monkeypatch.setenv(WLLInitializer.out_env_variable, env_dir)
    assert init.validate().output_directory == env_dir
    cli_dir = str(tmp_path / "cli")
    assert init.validate(out=cli_dir).output_directory == cli_dir
    blocker = write_yml(tmp_path / "file", "")
    with pytest.raises(ConfigError):
        init.validate(out=os.path.join(blocker, "sub"))


def test_overrides_keep_hash(tmp_path):
    from wllpypeline import WLLInitializer
    init = WLLInitializer("ou1d", loglevel="WARNING")
    config = init.validate(out=str(tmp_path))
    overridden = init.validate(out=str(tmp_path / "other"), threads=4, seed=11, trajectory_h=0.5)
    assert overridden.threads == 4 and overridden.seed == 11 and overridden.trajectory_h == 0.5
    assert overridden.plan.seed == 11
    assert overridden.config_hash == config.config_hash
    init.configs["seed"] = 2
    assert init.validate(out=str(tmp_path)).config_hash != config.config_hash


def test_write_config(tmp_path):
    from wllpypeline import WLLInitializer
    init = WLLInitializer("pendulum_pade11", loglevel="WARNING")
    config = init.validate(out=str(tmp_path), threads=3)
    init.write_config(str(tmp_path), config.configs)
    path = tmp_path / WLLInitializer.yml_file_name
    assert path.is_file()
    assert not (tmp_path / WLLInitializer.yml_file_name_tmp).exists()
    reloaded = WLLInitializer(str(path), loglevel="WARNING").validate(out=str(tmp_path))
    assert reloaded.config_hash == config.config_hash
    assert reloaded.threads == 1
    assert [s.name for s in reloaded.schemes] == [s.name for s in config.schemes]
