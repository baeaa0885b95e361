import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
try:
    from ruamel_yaml import YAML
except ModuleNotFoundError:
    from ruamel.yaml import YAML
import logging

from wllpypeline import path_package_config
from wllpypeline.helpers import get_logger, deep_update, to_plain, config_hash
from wllpypeline.modules import ModelError, SchemeConfigError, SchemeConfig, PadeConfig, KrylovConfig, McPlan,\
    JumpSpec, CatalogProblem, builtin_problem, builtin_functional, jump_coefficient


class ConfigError(ValueError):
    pass


#: keys that do not influence any result, they are left out of the configuration hash and the written config
RUN_ONLY_KEYS = ("threads", "output", "loglevel")


@dataclass
class ExperimentConfig:
    """
    Validated experiment configuration, built by :meth:`WLLInitializer.validate`.

    Attributes
    ----------
    name
        experiment name, results are written to ``output_directory/name``
    problem
        the wired catalog problem; its ``jumps`` are replaced by the configured jump channels
    schemes
        schemes in the configured order, the Euler baseline last if ``include_euler`` is set
    plan
        the Monte Carlo plan
    configs
        the effective configuration as plain python types, without the run-only keys

    """
    name: str
    problem_name: str
    problem: CatalogProblem
    schemes: Tuple[SchemeConfig, ...]
    plan: McPlan
    output_directory: str
    seed: int
    threads: int
    loglevel: str
    trajectory_h: float
    configs: Dict = field(default_factory=dict)

    @property
    def jumps(self) -> Optional[JumpSpec]:
        return self.problem.jumps

    @property
    def experiment_dir(self) -> str:
        return os.path.join(self.output_directory, self.name)

    @property
    def config_hash(self) -> str:
        return config_hash(self.configs)


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise ConfigError(f"{key}: {message}")


def _as_int(value, key: str, minimum: Optional[int] = None) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), key, f"should be an integer, got {value!r}")
    if minimum is not None:
        _require(value >= minimum, key, f"should be at least {minimum}, got {value}")
    return value


def _as_float(value, key: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), key, f"should be a number, got {value!r}")
    return float(value)


def _writable(directory: str) -> bool:
    path = os.path.abspath(directory)
    while not os.path.exists(path):
        parent = os.path.dirname(path)
        if parent == path:
            return False
        path = parent
    return os.path.isdir(path) and os.access(path, os.W_OK)


class WLLInitializer:
    """
    | Reads experiment configurations. The packaged default file holds every key with its default value; a user file
      is merged over it, user keys win.
    | :meth:`validate` turns the merged configuration into an :class:`ExperimentConfig`, every problem is reported as a
      :class:`ConfigError` naming the key.
    """
    yml_file_name_tmp = "config_tmp.yml"
    yml_file_name = "config.yml"
    default_yml_name = "wll_default.yml"
    experiments_path = "experiments"
    out_env_variable = "WLLPYPELINE_OUT"

    def __init__(self, file_path_yml: Optional[str] = None, loglevel=logging.DEBUG):
        """
        Parameters
        ----------
        file_path_yml
            path to a yaml config file, the name of a bundled experiment or "default"
        loglevel
            level of the logger
        """
        self.logger = get_logger(self.__class__.__name__, loglevel=loglevel)
        self.yaml = YAML()
        self.yaml.indent(mapping=2, sequence=4, offset=2)
        self.yaml.default_flow_style = False
        self.yaml.width = 4096

        #: defaults from the packaged file, the user file is merged over them
        self.defaults = to_plain(self.load_yml(self.get_default_yml_path()))
        self.configs = deep_update(self.defaults, {})
        self._file_path_yaml = None
        self.file_path_yaml = "default" if file_path_yml is None else file_path_yml

    @property
    def file_path_yaml(self):
        """
        Setting the yaml file path sets the configurations to the defaults merged with the file.

        Note
        -----
        The value can be set to either:

        - "default"
        - the name of a bundled experiment, see :meth:`list_bundled_experiments`
        - a path to a yml file

        Raises
        ------
        ConfigError
            if the file was not found, does not hold a mapping or has unknown top-level keys

        """
        return self._file_path_yaml

    @file_path_yaml.setter
    def file_path_yaml(self, file_path_yml: str):
        file_path_yml = str(file_path_yml)
        if file_path_yml.lower() == "default":
            self._file_path_yaml = self.get_default_yml_path()
        elif file_path_yml.lower().endswith((".yml", ".yaml")):
            self._file_path_yaml = os.path.normpath(file_path_yml)
        elif file_path_yml in self.list_bundled_experiments():
            self._file_path_yaml = os.path.join(path_package_config, self.experiments_path, file_path_yml + ".yml")
        else:
            raise ConfigError(f"Invalid value provided for yaml file: {file_path_yml}, should be a .yml path or one "
                              f"of: {', '.join(self.list_bundled_experiments())}")
        if not os.path.isfile(self._file_path_yaml):
            raise ConfigError(f"Config file not found: {self._file_path_yaml}")
        self.logger.debug("yml file location: %s", self._file_path_yaml)

        self.logger.info("loading yml file")
        try:
            user = self.load_yml(self._file_path_yaml)
        except Exception as e:
            raise ConfigError(f"Could not parse {self._file_path_yaml}: {e}") from e
        if user is None:
            user = {}
        if not hasattr(user, "items"):
            raise ConfigError(f"{self._file_path_yaml} should hold a mapping of settings")
        unknown = sorted(set(user) - set(self.defaults))
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(map(str, unknown))}")
        self.configs = deep_update(self.defaults, user)
        self.logger.debug(f"Config file contents: {self.configs}")

    def load_yml(self, path: str):
        with open(path) as f:
            return self.yaml.load(f)

    @staticmethod
    def get_default_yml_path() -> str:
        return os.path.join(path_package_config, WLLInitializer.default_yml_name)

    @staticmethod
    def list_bundled_experiments() -> List[str]:
        experiments = os.path.join(path_package_config, WLLInitializer.experiments_path)
        return sorted(x[:-len(".yml")] for x in os.listdir(experiments) if x.endswith(".yml"))

    def _scheme(self, raw, key: str) -> SchemeConfig:
        _require(hasattr(raw, "items"), key, "should be a mapping")
        defaults = self.defaults["schemes"][0]
        unknown = sorted(set(raw) - set(defaults))
        _require(not unknown, key, f"unknown keys {unknown}")
        raw = deep_update(defaults, raw)
        try:
            pade = PadeConfig(**raw["pade"])
            krylov = None
            if raw["variant"] == "krylov":
                krylov = KrylovConfig(pade=pade, **raw["krylov"])
            return SchemeConfig(variant=raw["variant"], beta=raw["beta"], pade=pade, krylov=krylov,
                                noise=raw["noise"], phi_defect=_as_float(raw["phi_defect"], f"{key}.phi_defect"),
                                label=raw["label"])
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"{key}: {e}") from e

    def _jumps(self, raw, key: str = "jumps") -> Optional[JumpSpec]:
        _require(hasattr(raw, "items"), key, "should be null or a mapping with intensities and coefficients")
        intensities = raw.get("intensities", [])
        coefficients = raw.get("coefficients", [])
        _require(isinstance(intensities, list) and isinstance(coefficients, list), key,
                 "intensities and coefficients should be lists")
        _require(len(intensities) == len(coefficients), key,
                 f"got {len(intensities)} intensities for {len(coefficients)} coefficients")
        if not intensities:
            return None
        functions, labels = [], []
        for i, coefficient in enumerate(coefficients):
            _require(hasattr(coefficient, "items") and "name" in coefficient, f"{key}.coefficients[{i}]",
                     "should be a mapping with name and c")
            try:
                functions.append(jump_coefficient(coefficient["name"], coefficient.get("c", 1.0)))
            except ModelError as e:
                raise ConfigError(f"{key}.coefficients[{i}]: {e}") from e
            labels.append(str(coefficient["name"]))
        try:
            return JumpSpec(tuple(_as_float(x, f"{key}.intensities") for x in intensities), tuple(functions),
                            tuple(labels))
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"{key}: {e}") from e

    def validate(self, out: Optional[str] = None, threads: Optional[int] = None, seed: Optional[int] = None,
                 trajectory_h: Optional[float] = None) -> ExperimentConfig:
        """
        Validates the merged configuration.

        Parameters
        ----------
        out
            output directory, takes precedence over the ``WLLPYPELINE_OUT`` environment variable and the
            ``output.directory`` setting
        threads
            worker threads, overrides ``threads``
        seed
            master seed, overrides ``seed``
        trajectory_h
            step size of a single trajectory, overrides ``trajectory.h``

        Returns
        -------
        ExperimentConfig
            the validated configuration

        Raises
        ------
        ConfigError
            naming the first invalid key

        """
        base = deep_update(self.configs, {})
        configs = deep_update(base, {})
        if threads is not None:
            configs["threads"] = threads
        if seed is not None:
            configs["seed"] = seed
        if trajectory_h is not None:
            configs["trajectory"]["h"] = trajectory_h

        name = configs["name"]
        _require(isinstance(name, str) and name and os.sep not in name, "name", f"invalid experiment name {name!r}")

        problem_cfg = configs["problem"]
        _require(hasattr(problem_cfg, "items"), "problem", "should be a mapping")
        params = problem_cfg.get("params") or {}
        _require(hasattr(params, "items"), "problem.params", "should be a mapping")
        try:
            problem = builtin_problem(problem_cfg.get("name"), **params)
        except ModelError as e:
            raise ConfigError(f"problem: {e}") from e
        if configs["jumps"] is not None:
            problem = problem._replace(jumps=self._jumps(configs["jumps"]))

        schemes = configs["schemes"]
        _require(isinstance(schemes, list) and schemes, "schemes", "should be a non-empty list")
        scheme_configs = [self._scheme(raw, f"schemes[{i}]") for i, raw in enumerate(schemes)]
        _require(isinstance(configs["include_euler"], bool), "include_euler", "should be true or false")
        if configs["include_euler"]:
            scheme_configs.append(SchemeConfig("euler"))
        names = [s.name for s in scheme_configs]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        _require(not duplicates, "schemes", f"duplicate scheme labels {duplicates}")
        for i, scheme in enumerate(scheme_configs):
            try:
                scheme.check_model(problem.model)
            except SchemeConfigError as e:
                raise ConfigError(f"schemes[{i}]: {e}") from e

        seed = _as_int(configs["seed"], "seed", minimum=0)
        threads = _as_int(configs["threads"], "threads", minimum=1)
        plan_cfg = configs["plan"]
        unknown = sorted(set(plan_cfg) - set(self.defaults["plan"]))
        _require(not unknown, "plan", f"unknown keys {unknown}")
        functionals = plan_cfg["functionals"]
        _require(isinstance(functionals, list) and functionals, "plan.functionals", "should be a non-empty list")
        try:
            plan = McPlan(
                step_sizes=tuple(_as_float(h, "plan.step_sizes") for h in plan_cfg["step_sizes"]),
                samples=_as_int(plan_cfg["samples"], "plan.samples"),
                seed=seed,
                functionals=tuple(builtin_functional(label) for label in functionals),
                reference=plan_cfg["reference"],
                reference_samples=plan_cfg["reference_samples"],
                reference_divisor=_as_int(plan_cfg["reference_divisor"], "plan.reference_divisor"),
                threads=threads,
            )
            plan.check_span(problem.model)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"plan: {e}") from e
        if plan.reference == "analytic":
            missing = [f.label for f in plan.functionals if not problem.reference.covers(f.label)]
            _require(not missing, "plan.reference",
                     f"no analytic reference of {problem.model.name} for {missing}, use fine-grid")
            _require(configs["jumps"] is None, "plan.reference",
                     "analytic references assume the jump channels of the catalog problem, use fine-grid")

        trajectory_h = _as_float(configs["trajectory"]["h"], "trajectory.h")
        span = problem.model.T - problem.model.t0
        _require(0 < trajectory_h <= span * (1 + 1e-12), "trajectory.h",
                 f"should be in (0, {span:g}], the time span of {problem.model.name}")

        if out is None:
            out = os.environ.get(self.out_env_variable) or configs["output"]["directory"]
        _require(isinstance(out, str) and out != "", "output.directory", f"invalid directory {out!r}")
        _require(_writable(out), "output.directory", f"{out} is not writable")
        loglevel = str(configs["loglevel"])

        plain = {k: v for k, v in base.items() if k not in RUN_ONLY_KEYS}
        self.logger.debug("Validated experiment %s with schemes %s", name, names)
        return ExperimentConfig(name=name, problem_name=problem_cfg["name"], problem=problem,
                                schemes=tuple(scheme_configs), plan=plan, output_directory=out, seed=seed,
                                threads=threads, loglevel=loglevel, trajectory_h=trajectory_h, configs=plain)

    def write_config(self, directory: str, configs: Optional[Dict] = None):
        """
        Writes the configuration (by default the merged one) to ``directory/config.yml``, via a temporary file that
        replaces an existing config.
        """
        self.logger.debug("Updating yml settings file")
        os.makedirs(directory, exist_ok=True)
        yml_file_loc_tmp = os.path.join(directory, WLLInitializer.yml_file_name_tmp)
        with open(yml_file_loc_tmp, "w") as outfile:
            self.yaml.dump(to_plain(self.configs if configs is None else configs), outfile)
        os.replace(yml_file_loc_tmp, os.path.join(directory, WLLInitializer.yml_file_name))
