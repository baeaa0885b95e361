def test_import():
    import inspect
    # test imports from core
    from wllpypeline import WLLParser, WLLInitializer, ExperimentRunner, UIHandler, ExperimentConfig
    assert inspect.isclass(WLLParser)
    assert inspect.isclass(WLLInitializer)
    assert inspect.isclass(ExperimentRunner)
    assert inspect.isclass(UIHandler)
    assert inspect.isclass(ExperimentConfig)
    from wllpypeline import main, list_schemes, load_example_experiment
    assert inspect.isfunction(main)
    assert inspect.isfunction(list_schemes)
    assert inspect.isfunction(load_example_experiment)
    # test imports from modules
    from wllpypeline import SdeModel, SchemeConfig, PadeConfig, KrylovConfig, McPlan, JumpSpec, WeakErrorReport
    assert inspect.isclass(SdeModel)
    assert inspect.isclass(SchemeConfig)
    assert inspect.isclass(PadeConfig)
    assert inspect.isclass(KrylovConfig)
    assert inspect.isclass(McPlan)
    assert inspect.isclass(JumpSpec)
    assert inspect.isclass(WeakErrorReport)
    from wllpypeline import pade_expm, krylov_expmv, psd_sqrt, solve_pencil, increment, step, estimate_weak_error,\
        estimate_local_order, builtin_problem
    assert inspect.isfunction(pade_expm)
    assert inspect.isfunction(krylov_expmv)
    assert inspect.isfunction(psd_sqrt)
    assert inspect.isfunction(solve_pencil)
    assert inspect.isfunction(increment)
    assert inspect.isfunction(step)
    assert inspect.isfunction(estimate_weak_error)
    assert inspect.isfunction(estimate_local_order)
    assert inspect.isfunction(builtin_problem)
    # test imports from helpers
    from wllpypeline.helpers import get_logger, set_package_loglevel, deep_update, to_plain, config_hash,\
        get_result_name_suffix, add_end_docstrings
    assert inspect.isfunction(get_logger)
    assert inspect.isfunction(set_package_loglevel)
    assert inspect.isfunction(deep_update)
    assert inspect.isfunction(to_plain)
    assert inspect.isfunction(config_hash)
    assert inspect.isfunction(get_result_name_suffix)
    assert inspect.isfunction(add_end_docstrings)


def test_config_available():
    from wllpypeline import path_package_config
    import os
    assert os.path.isdir(path_package_config)
    assert os.path.isfile(os.path.join(path_package_config, "wll_default.yml"))
    assert os.path.isdir(os.path.join(path_package_config, "experiments"))
