import argparse
import logging
import sys
from typing import Optional, Sequence

from wllpypeline.helpers import get_logger, set_package_loglevel
from wllpypeline.core.WLLInitializer import WLLInitializer, ConfigError
from wllpypeline.core.ExperimentRunner import ExperimentRunner, list_schemes
from wllpypeline.modules import LinAlgError, ModelError, SchemeConfigError, NonFiniteStateError,\
    InsufficientPointsError

#: exceptions of a run that are reported with exit status 1
RUN_ERRORS = (LinAlgError, ModelError, SchemeConfigError, NonFiniteStateError, InsufficientPointsError, ValueError,
              ArithmeticError)


class UIHandler:
    """
    | Used to take the mapping of arguments provided by the :class:`~WLLParser` through the command line and run the
      selected command.
    | The outcome is stored in ``exit_status``: 0 on success, 2 for configuration errors (no output files are written)
      and 1 for failures of the run itself, e.g. a singular Jacobian or a diverging trajectory.
    """
    def __init__(self, command: str, config: Optional[str] = None, seed: Optional[int] = None,
                 h: Optional[float] = None, threads: Optional[int] = None, out: Optional[str] = None,
                 loglevel=logging.WARNING, stream=None):
        """
        Parameters
        ----------
        command
            one of ``run-convergence``, ``run-trajectory`` and ``list-schemes``
        config
            path to the yaml config file or name of a bundled experiment
        seed
            seed override of run-trajectory
        h
            step size override of run-trajectory
        threads
            number of worker threads
        out
            output directory, overrides the config and the WLLPYPELINE_OUT environment variable
        loglevel
            level of the loggers
        stream
            text stream list-schemes is printed to, stdout if None
        """
        self.logger = get_logger(self.__class__.__name__, loglevel=loglevel)
        set_package_loglevel(loglevel)
        self.exit_status = 0
        self.outputs = []

        if command == "list-schemes":
            (stream or sys.stdout).write(list_schemes())
            return
        try:
            wll_init = WLLInitializer(config, loglevel=loglevel)
            validate_kwargs = dict(out=out, threads=threads)
            if command == "run-trajectory":
                validate_kwargs.update(seed=seed, trajectory_h=h)
            runner = ExperimentRunner.from_WLLInitializer(wll_init, loglevel=loglevel, **validate_kwargs)
        except ConfigError as e:
            self.logger.error("Configuration error: %s", e)
            self.exit_status = 2
            return

        try:
            if command == "run-convergence":
                runner.run_convergence()
                self.outputs = [runner.experiment_dir]
            elif command == "run-trajectory":
                self.outputs = runner.run_trajectory()
            else:
                raise ValueError(f"Unknown command: {command}")
        except RUN_ERRORS as e:
            self.logger.error("%s failed: %s: %s", command, e.__class__.__name__, e)
            self.exit_status = 1


class WLLParser(argparse.ArgumentParser):
    """
    | Uses the ``argparse`` module to provide a parser for the command line options and sub-commands through which
      experiments are run (see :ref:`get-started`).
    """
    def __init__(self, argv: Optional[Sequence[str]] = None):
        super().__init__(prog="wllpypeline",
                         description="Weak local linearization schemes for SDEs with additive noise and jumps: "
                                     "convergence studies and sample paths.")
        self._add_run_options(self, logging.WARNING, None)
        # the same options are accepted after the sub-command
        common = argparse.ArgumentParser(add_help=False)
        self._add_run_options(common, argparse.SUPPRESS, argparse.SUPPRESS)
        commands = self.add_subparsers(dest="command", metavar="command", parser_class=argparse.ArgumentParser)
        commands.required = True

        convergence = commands.add_parser("run-convergence", parents=[common],
                                          help="estimate the weak errors and convergence orders of all schemes")
        convergence.add_argument("config", help="path to a yml config file or name of a bundled experiment")

        trajectory = commands.add_parser("run-trajectory", parents=[common],
                                         help="write one sample path per scheme as csv")
        trajectory.add_argument("config", help="path to a yml config file or name of a bundled experiment")
        trajectory.add_argument("--seed", dest="seed", type=int, default=None,
                                help="seed of the path, default: seed of the config")
        trajectory.add_argument("--h", dest="h", type=float, default=None,
                                help="step size, default: trajectory.h of the config")

        commands.add_parser("list-schemes", parents=[common], help="list the scheme variants and their preconditions")

        self.args = self.parse_args(argv)
        self.args_dict = vars(self.args)

    @staticmethod
    def _add_run_options(parser: argparse.ArgumentParser, loglevel_default, default):
        parser.add_argument(
            "--threads",
            dest="threads",
            type=int,
            default=default,
            help="Number of worker threads. Results do not depend on it. Default: threads of the config"
        )
        parser.add_argument(
            "--out",
            dest="out",
            default=default,
            help="Output directory, takes precedence over the WLLPYPELINE_OUT environment variable and the config"
        )
        parser.add_argument(
            "--loglevel",
            dest="loglevel",
            action="store",
            default=loglevel_default,
            help="Logging level. Should be from options (lowest to highest): DEBUG < INFO < WARNING < ERROR. "
                 "The higher the logging level the fewer messages are shown. Default: WARNING"
        )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = WLLParser(argv)
    ui = UIHandler(**parser.args_dict)
    return ui.exit_status
