def test_deep_update():
    from wllpypeline.helpers import deep_update
    base = {"plan": {"samples": 100, "step_sizes": [0.5, 0.25]}, "seed": 1}
    merged = deep_update(base, {"plan": {"samples": 1000}, "name": "test"})
    assert merged == {"plan": {"samples": 1000, "step_sizes": [0.5, 0.25]}, "seed": 1, "name": "test"}
    assert base["plan"]["samples"] == 100
    merged["plan"]["step_sizes"].append(0.1)
    assert base["plan"]["step_sizes"] == [0.5, 0.25]
    assert deep_update(base, None) == base
    # non-mapping values replace mappings
    assert deep_update({"jumps": {"intensities": [1.0]}}, {"jumps": None}) == {"jumps": None}


def test_to_plain():
    import numpy as np
    from collections import OrderedDict
    from wllpypeline.helpers import to_plain
    plain = to_plain(OrderedDict(a=np.float64(0.5), b=(1, np.int64(2)), c=np.array([[1.0]]), d=True, e=None))
    assert plain == {"a": 0.5, "b": [1, 2], "c": [[1.0]], "d": True, "e": None}
    assert type(plain) is dict and type(plain["a"]) is float and type(plain["b"][1]) is int


def test_config_hash():
    from wllpypeline.helpers import config_hash
    a = config_hash({"seed": 1, "plan": {"samples": 100, "step_sizes": [0.5]}})
    b = config_hash({"plan": {"step_sizes": [0.5], "samples": 100}, "seed": 1})
    assert a == b
    assert len(a) == 64
    assert config_hash({"seed": 2, "plan": {"samples": 100, "step_sizes": [0.5]}}) != a


def test_get_result_name_suffix():
    from wllpypeline.helpers import get_result_name_suffix
    assert get_result_name_suffix() == ""
    assert get_result_name_suffix(seed=3) == "_seed3"
    assert get_result_name_suffix(7) == "_seed7"
