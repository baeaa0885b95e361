# setup variables required for package
import os
path_package = os.path.dirname(os.path.realpath(__file__))
path_package_config = os.path.join(path_package, "config")


# flatten package imports for the core package
from .version import __version__
from .modules import *
from .core import *
# import for "from package import *"
__all__ = [
    "path_package",
    "path_package_config",
    "__version__",
]
__all__.extend(core.__all__)
__all__.extend(modules.__all__)


def load_example_experiment(name: str = "ou1d", configs: dict = None, loglevel="WARNING") -> ExperimentRunner:
    """
    Loads a bundled experiment into an :class:`ExperimentRunner`.

    Parameters
    ----------
    name
        name of the bundled experiment, see :meth:`WLLInitializer.list_bundled_experiments`
    configs
        configs that are merged over the experiment, e.g. ``{"plan": {"samples": 1000}}``
    loglevel
        level of the loggers

    Returns
    -------
    A runner with the validated configuration.

    """
    from .helpers import deep_update

    init = WLLInitializer(name, loglevel=loglevel)
    init.configs = deep_update(init.configs, configs)
    return ExperimentRunner.from_WLLInitializer(init, loglevel=loglevel)


__all__.append("load_example_experiment")
