import math

import numpy as np
import pytest

from gmonlab.bose_hubbard import InstanceConfig, sample_instance
from gmonlab.experiments import (correlation_curve, cycle_distributions, initial_slope,
                                 instance_seeds, knee_width, mean_entanglement_curve,
                                 memory_loss_study, porter_thomas_study, sample_ensemble,
                                 step_fidelity_curve, truncation_fidelities)
from gmonlab.fock_basis import Bands, MaxLevel, enumerate_basis

SMALL = InstanceConfig(N=6, cycles=3)


def test_instance_seeds_reproducible_and_distinct():
    a = instance_seeds(7, 20)
    assert a == instance_seeds(7, 20)
    assert len(set(a)) == 20
    assert instance_seeds(7, 5) == a[:5]


def test_ensemble_from_seed():
    a, b = sample_ensemble(SMALL, 3, 1), sample_ensemble(SMALL, 3, 1)
    assert all(np.array_equal(x.delta, y.delta) for x, y in zip(a, b))


def test_cycle_distributions_shape_and_start():
    inst = sample_instance(SMALL, 0)
    basis = enumerate_basis(6, 3, MaxLevel(2))
    traj = cycle_distributions(inst, basis)
    assert traj.shape == (4, 20)
    assert np.allclose(traj.sum(axis=1), 1.0)
    start = np.zeros(20)
    labels = enumerate_basis(6, 3, MaxLevel(1)).labels()
    start[labels.index("010101")] = 1.0
    assert np.allclose(traj[0], start)


def test_porter_thomas_study_smoke():
    res = porter_thomas_study(SMALL, 4, seed=0)
    assert res.n_instances == 4 and res.kl >= 0
    assert 0 <= res.tail_fraction <= 1
    assert res.entropy_deviation >= 0


def test_truncation_fidelities_self_is_one():
    inst = sample_instance(SMALL, 2)
    f = truncation_fidelities(inst, [MaxLevel(3), Bands(1, 0)], truth=MaxLevel(3))
    assert f["max:3"] == pytest.approx(1.0, abs=1e-12)
    # a truncated model can score slightly above 1; it is never exact
    assert abs(f["bands:1,0"] - 1.0) > 1e-6


def test_knee_width_definition():
    curve = {16: -0.5, 32: 0.05, 45: 0.5, 64: 0.995, 128: 1.0}
    assert knee_width(curve) == 2.0
    assert knee_width({16: 0.5, 32: 0.995}) == math.inf


def test_step_fidelity_curve_converges():
    inst = sample_instance(InstanceConfig(N=4, cycles=2), 1)
    basis = enumerate_basis(4, 2, MaxLevel(2))
    curve = step_fidelity_curve(inst, basis, [2000, 4000])
    assert curve[4000] == pytest.approx(1.0, abs=1e-6)


def test_memory_loss_smoke():
    res = memory_loss_study(InstanceConfig(N=4, cycles=4), 3, t0_cycle=1)
    assert list(res.cycles) == [2, 3, 4]
    assert np.all(res.baseline > 0) and np.all(res.relative_gap >= 0)


def test_correlation_curve_length():
    c = correlation_curve(InstanceConfig(N=5, cycles=2), 2)
    assert c.shape == (4,)


def test_entanglement_curve_starts_at_zero():
    x, s = mean_entanglement_curve(InstanceConfig(N=4, cycles=1), 2, points_per_cycle=4)
    assert len(x) == 5 and s[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(s >= -1e-12)


def test_initial_slope():
    x = np.linspace(0, 2, 9)
    assert initial_slope(x, 3 * x + 1, 1.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        initial_slope(x, x, 0.1)
