import os
import platform
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional
import logging

import numpy as np
import pandas as pd
import scipy
try:
    from ruamel_yaml import YAML
except ModuleNotFoundError:
    from ruamel.yaml import YAML

from wllpypeline.version import __version__
from wllpypeline.helpers import get_logger, to_plain, get_result_name_suffix
from wllpypeline.core.WLLInitializer import WLLInitializer, ExperimentConfig
from wllpypeline.modules import SCHEME_CATALOG, TimeGrid, WeakErrorReport, estimate_weak_error,\
    fine_grid_reference, simulate_path, validate_model


def list_schemes() -> str:
    """
    Text listing of every scheme variant with its description, provenance, preconditions and notes.
    """
    lines = []
    for variant, info in SCHEME_CATALOG.items():
        lines.append(f"{variant}: {info.description}")
        lines.append(f"    provenance: {info.provenance}")
        lines.append(f"    preconditions: {info.preconditions}")
        lines.append(f"    notes: {info.notes}")
    return "\n".join(lines) + "\n"


class ExperimentRunner:
    """
    | Runs the experiments of a validated configuration and writes their results to the experiment directory
      ``<output directory>/<experiment name>``.
    | Every output file gets an entry in ``manifest.yml`` holding the configuration hash, the seed and the versions
      of the numerical stack, together with ``config.yml`` this is sufficient to re-run it.
    """
    manifest_name = "manifest.yml"
    summary_name = "summary.csv"
    n_probes = 20

    def __init__(self, config: ExperimentConfig, initializer: Optional[WLLInitializer] = None,
                 loglevel=logging.DEBUG):
        """
        Parameters
        ----------
        config
            the validated experiment configuration
        initializer
            initializer that writes ``config.yml``, a default one is created if None
        loglevel
            level of the logger
        """
        self.logger = get_logger(self.__class__.__name__, loglevel=loglevel)
        self.loglevel = loglevel
        self.config = config
        self.initializer = initializer if initializer is not None else WLLInitializer(loglevel=loglevel)
        self.yaml = YAML()
        self.yaml.indent(mapping=2, sequence=4, offset=2)
        self.yaml.default_flow_style = False

    @classmethod
    def from_WLLInitializer(cls, wll_init: WLLInitializer, loglevel=None, **kwargs) -> "ExperimentRunner":
        """
        Validates the configuration of the initializer, the keyword arguments are passed to
        :meth:`WLLInitializer.validate`.
        """
        config = wll_init.validate(**kwargs)
        if loglevel is None:
            loglevel = wll_init.logger.getEffectiveLevel()
        return cls(config, wll_init, loglevel=loglevel)

    @property
    def experiment_dir(self) -> str:
        return self.config.experiment_dir

    def check_model(self):
        """Logs derivative inconsistencies of the model at sampled probe points, never raises."""
        model = self.config.problem.model
        violations = validate_model(model, rng=np.random.default_rng(self.config.seed), n_probes=self.n_probes)
        if violations:
            self.logger.warning("Model %s has %d derivative inconsistencies, results may be off",
                                model.name, len(violations))
        return violations

    def run_convergence(self) -> Dict[str, WeakErrorReport]:
        """
        Estimates the weak errors of every configured scheme and writes ``<scheme>.csv``, ``summary.csv``,
        ``config.yml`` and ``manifest.yml``. Files are only written after every scheme finished.

        Returns
        -------
        dict
            scheme name -> :class:`WeakErrorReport`

        """
        config = self.config
        problem = config.problem
        self.check_model()
        reports = {}
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            reference = problem.reference
            if config.plan.reference == "fine-grid":
                reference = fine_grid_reference(config.plan, problem.model, problem.initial_law, problem.jumps,
                                                executor, loglevel=self.loglevel)
            for scheme in config.schemes:
                self.logger.info("Running scheme %s", scheme.name)
                reports[scheme.name] = estimate_weak_error(config.plan, scheme, problem.model, problem.initial_law,
                                                           reference, problem.jumps, executor, loglevel=self.loglevel)

        os.makedirs(self.experiment_dir, exist_ok=True)
        files = []
        for name, report in reports.items():
            file_name = f"{name}.csv"
            report.to_csv(os.path.join(self.experiment_dir, file_name))
            files.append(file_name)
        summary = pd.concat([report.summary() for report in reports.values()], ignore_index=True)
        summary.to_csv(os.path.join(self.experiment_dir, self.summary_name), index=False, float_format="%.17g")
        files.append(self.summary_name)
        self.initializer.write_config(self.experiment_dir, config.configs)
        self.write_manifest({file: dict(command="run-convergence", seed=config.seed) for file in files})
        self.logger.info("Results written to %s", self.experiment_dir)
        return reports

    def run_trajectory(self, seed: Optional[int] = None, h: Optional[float] = None) -> List[str]:
        """
        Simulates one sample path per configured scheme and writes ``trajectory_<scheme>_seed<S>.csv`` with the
        columns t, x1..xd and jump_channels (the channels that jumped at t, separated by ``;``).

        Parameters
        ----------
        seed
            seed of the path, the configured seed if None
        h
            step size, the configured ``trajectory.h`` if None

        Returns
        -------
        list
            paths of the written files

        """
        config = self.config
        problem = config.problem
        model = problem.model
        seed = config.seed if seed is None else seed
        h = config.trajectory_h if h is None else h
        grid = TimeGrid.uniform(model.t0, model.T, h)
        self.check_model()
        frames = {}
        for scheme in config.schemes:
            rng = np.random.default_rng(seed)
            x0 = problem.initial_law.draw(rng, 1)[0]
            times, states, channels = simulate_path(scheme, model, grid, rng, x0, problem.jumps)
            df = pd.DataFrame(states, columns=[f"x{i + 1}" for i in range(model.d)])
            df.insert(0, "t", times)
            df["jump_channels"] = [";".join(str(c) for c in ch) for ch in channels]
            frames[f"trajectory_{scheme.name}{get_result_name_suffix(seed=seed)}.csv"] = df

        os.makedirs(self.experiment_dir, exist_ok=True)
        for file_name, df in frames.items():
            df.to_csv(os.path.join(self.experiment_dir, file_name), index=False, float_format="%.17g")
        self.initializer.write_config(self.experiment_dir, config.configs)
        self.write_manifest({file: dict(command="run-trajectory", seed=seed, h=float(h)) for file in frames})
        return [os.path.join(self.experiment_dir, file) for file in frames]

    def manifest_header(self) -> Dict:
        return dict(
            experiment=self.config.name,
            config_sha256=self.config.config_hash,
            versions=dict(wllpypeline=__version__, python=platform.python_version(), numpy=np.__version__,
                          scipy=scipy.__version__, pandas=pd.__version__),
        )

    def write_manifest(self, entries: Dict[str, Dict]):
        """
        Adds the entries to ``manifest.yml``. Entries of a manifest with a different configuration hash are dropped.
        """
        path = os.path.join(self.experiment_dir, self.manifest_name)
        manifest = self.manifest_header()
        files = {}
        if os.path.isfile(path):
            with open(path) as f:
                existing = to_plain(self.yaml.load(f) or {})
            if existing.get("config_sha256") == manifest["config_sha256"]:
                files.update(existing.get("files", {}))
            else:
                self.logger.info("Configuration changed, dropping the previous manifest entries")
        files.update(to_plain(entries))
        manifest["files"] = {k: files[k] for k in sorted(files)}
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            self.yaml.dump(manifest, f)
        os.replace(tmp, path)
