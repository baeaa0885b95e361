import numpy as np
import pytest


def constant_jumps(mu=(1.0,), c=0.5):
    from wllpypeline.modules.Jumps import JumpSpec
    return JumpSpec(mu, tuple((lambda t, z, c=c: np.full(z.shape, c)) for _ in mu))


def test_jump_spec():
    from wllpypeline.modules.Jumps import JumpSpec
    with pytest.raises(ValueError):
        JumpSpec((1.0, 2.0), (lambda t, z: z,))
    with pytest.raises(ValueError):
        JumpSpec((-1.0,), (lambda t, z: z,))
    spec = JumpSpec((1.0, 2.0), (lambda t, z: np.full(z.shape, 1.0), lambda t, z: 2 * z))
    assert spec.p == 2
    assert spec.labels == ("1", "2")
    z = np.array([[1.0], [2.0], [3.0]])
    jumped = np.array([[True, False], [False, True], [True, True]])
    np.testing.assert_array_equal(spec.apply(np.zeros(3), z, jumped), [[2.0], [6.0], [10.0]])
    np.testing.assert_array_equal(spec.apply(np.zeros(3), z, np.zeros((3, 2), dtype=bool)), z)


def test_sample_jump_times(rng):
    from wllpypeline.modules.Jumps import sample_jump_times
    counts = []
    for _ in range(2000):
        sched = sample_jump_times([2.0, 0.0], 0.5, 2.5, rng)
        assert sched.p == 2
        assert sched.times[1].size == 0
        times = sched.times[0]
        assert np.all(np.diff(times) > 0)
        assert np.all((times > 0.5) & (times <= 2.5))
        counts.append(sched.n_events)
    # Poisson(4) counts
    assert abs(np.mean(counts) - 4.0) < 0.2
    assert abs(np.var(counts) - 4.0) < 0.6
    with pytest.raises(ValueError):
        sample_jump_times([1.0], 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        sample_jump_times([-1.0], 0.0, 1.0, rng)


def test_sample_jump_times_intensity_ratio(rng):
    from wllpypeline.modules.Jumps import sample_jump_times
    counts = np.zeros(2)
    for _ in range(4000):
        sched = sample_jump_times([1.0, 3.0], 0.0, 1.0, rng)
        counts += [sched.times[0].size, sched.times[1].size]
    # Poisson totals 4000 and 12000, standard error of the ratio about 0.055
    assert abs(counts[1] / counts[0] - 3.0) < 0.25
    assert abs(counts[0] / 4000 - 1.0) < 0.07
    assert abs(counts[1] / 4000 - 3.0) < 0.12


def test_sample_jump_times_reproducible():
    from wllpypeline.modules.Jumps import sample_jump_times
    a = sample_jump_times([1.0, 3.0], 0.0, 1.0, np.random.default_rng(5))
    b = sample_jump_times([1.0, 3.0], 0.0, 1.0, np.random.default_rng(5))
    for x, y in zip(a.times, b.times):
        np.testing.assert_array_equal(x, y)


def test_merged_grid_and_indicators():
    from wllpypeline.modules.Jumps import JumpSchedule, merged_grid
    from wllpypeline.modules.Model import TimeGrid
    base = TimeGrid.uniform(0.0, 1.0, 0.25)
    sched = JumpSchedule((np.array([0.3, 0.5 + 1e-16]), np.array([0.9])))
    grid = merged_grid(base, sched)
    np.testing.assert_allclose(grid.times, [0, 0.25, 0.3, 0.5, 0.75, 0.9, 1.0])
    assert grid.max_step <= base.max_step
    indicators = sched.indicators(grid.times)
    assert indicators.shape == (7, 2)
    np.testing.assert_array_equal(np.flatnonzero(indicators[:, 0]), [2, 3])
    np.testing.assert_array_equal(np.flatnonzero(indicators[:, 1]), [5])
    assert sched.channels_at(0.9) == [1]
    assert sched.channels_at(0.5) == [0]
    assert sched.channels_at(0.6) == []
    np.testing.assert_allclose(sched.all_times(), [0.3, 0.5, 0.9])
    # a jump at T is part of the base grid
    at_end = JumpSchedule((np.array([1.0]),))
    assert merged_grid(base, at_end) is base
    with pytest.raises(ValueError):
        sched.indicators(base.times)
    assert merged_grid(base, JumpSchedule((np.empty(0),))) is base


def test_jump_step():
    from wllpypeline.modules.Jumps import JumpSchedule, jump_step
    from wllpypeline.modules.LocalLinearization import SchemeConfig, step
    from wllpypeline.modules.Catalog import builtin_problem
    model = builtin_problem("ou-1d").model
    jumps = constant_jumps((1.0, 1.0), c=0.5)
    sched = JumpSchedule((np.array([0.5]), np.array([0.7])))
    scheme = SchemeConfig()
    xi = np.array([0.3])
    z = np.array([1.0])
    no_jump = step(scheme, model, 0.0, z, 0.25, None, xi=xi)
    np.testing.assert_array_equal(jump_step(scheme, model, jumps, sched, 0.0, 0.25, z, None, xi=xi), no_jump)
    with_jump = jump_step(scheme, model, jumps, sched, 0.25, 0.5, z, None, xi=xi)
    np.testing.assert_allclose(with_jump, step(scheme, model, 0.25, z, 0.25, None, xi=xi) + 0.5)
