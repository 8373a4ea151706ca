import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from gmonlab.bose_hubbard import (CycleOperator, InstanceConfig, InstanceParams, PulseSchedule,
                                  StateVector, TWO_PI_MHZ, NS, apply_hamiltonian, coupling_envelope,
                                  diagonal_energies, hopping_tables, instance_from_json,
                                  sample_instance)
from gmonlab.errors import ConfigError
from gmonlab.fock_basis import Bands, MaxLevel, enumerate_basis


def dense_hamiltonian(params, basis, t, cutoff):
    """Brute-force H from Kronecker products of truncated ladder operators."""
    n = params.N
    a1 = np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1)
    eye = np.eye(cutoff + 1)

    def site_op(op, i):
        out = np.array([[1.0]])
        for j in range(n):
            out = np.kron(out, op if j == i else eye)
        return out

    a = [site_op(a1, i) for i in range(n)]
    num = [x.T @ x for x in a]
    H = sum(params.delta[i] * num[i] + 0.5 * params.eta[i] * num[i] @ (num[i] - np.eye(len(num[i])))
            for i in range(n))
    g = params.pulses.couplings(t)
    for b in range(n - 1):
        H = H + g[b] * (a[b].T @ a[b + 1] + a[b + 1].T @ a[b])
    idx = [int(np.ravel_multi_index(basis.state_of(k), (cutoff + 1,) * n)) for k in range(basis.dim)]
    return H[np.ix_(idx, idx)]


def make_instance(n, cycles=2, seed=0, **kw):
    return sample_instance(InstanceConfig(N=n, cycles=cycles, **kw), seed)


@pytest.mark.parametrize("kind", ["sin2", "square", "trapezoid"])
def test_envelope_endpoints_and_peak(kind):
    T = 50e-9
    assert coupling_envelope(T / 2, T, 3.0, kind) == pytest.approx(3.0)
    if kind != "square":
        assert coupling_envelope(0.0, T, 3.0, kind) == 0.0
        assert coupling_envelope(T, T, 3.0, kind) == pytest.approx(0.0, abs=1e-15)


def test_sin2_area():
    T, g = 42e-9, 2.0
    area, _ = quad(lambda t: coupling_envelope(t, T, g), 0.0, T, epsabs=1e-20)
    assert area == pytest.approx(g * T / 2, rel=1e-10)


def test_unknown_envelope():
    with pytest.raises(ValueError):
        coupling_envelope(0.1, 1.0, 1.0, "gauss")


def test_couplings_vanish_at_cycle_boundaries():
    inst = make_instance(5, cycles=4)
    for t in inst.pulses.boundaries:
        assert np.allclose(inst.pulses.couplings(t), 0.0, atol=1e-6 * TWO_PI_MHZ)


def test_total_time():
    inst = make_instance(4, cycles=3)
    assert inst.total_time == pytest.approx(inst.pulses.durations.sum())
    assert np.all(inst.pulses.durations > 0)


def test_sampling_reproducible_and_in_range():
    cfg = InstanceConfig(N=6, cycles=5)
    a, b = sample_instance(cfg, 7), sample_instance(cfg, 7)
    assert np.array_equal(a.delta, b.delta)
    assert np.array_equal(a.pulses.g_max, b.pulses.g_max)
    assert np.all(np.abs(a.delta) <= 5.0 * TWO_PI_MHZ)
    g = a.pulses.g_max / TWO_PI_MHZ
    assert np.all((g >= 22.4) & (g <= 38.4))
    T = a.pulses.durations / NS
    assert np.all((T >= 42.0) & (T <= 72.0))
    assert a.delta.shape == (6,) and a.pulses.g_max.shape == (5, 5)


def test_different_seeds_differ():
    cfg = InstanceConfig(N=4, cycles=1)
    same = sum(np.array_equal(sample_instance(cfg, s).delta, sample_instance(cfg, s + 1000).delta)
               for s in range(100))
    assert same == 0


def test_zero_width_ranges_give_constants():
    cfg = InstanceConfig(N=4, cycles=3, delta_MHz=0.0, g_max_MHz=(30.0, 30.0),
                         t_pulse_ns=(50.0, 50.0))
    inst = sample_instance(cfg, 3)
    assert np.all(inst.delta == 0)
    assert np.allclose(inst.pulses.g_max, 30.0 * TWO_PI_MHZ)
    assert np.allclose(inst.pulses.durations, 50e-9)


def test_shared_pulse_height_option():
    inst = sample_instance(InstanceConfig(N=5, cycles=3, per_bond=False), 1)
    assert np.all(inst.pulses.g_max == inst.pulses.g_max[:, :1])


@pytest.mark.parametrize("cfg", [
    InstanceConfig(N=1, cycles=2),
    InstanceConfig(N=4, cycles=0),
    InstanceConfig(N=4, cycles=1, t_pulse_ns=(50.0, 40.0)),
    InstanceConfig(N=4, cycles=1, g_max_MHz=(30.0, 20.0)),
])
def test_bad_configs(cfg):
    with pytest.raises(ConfigError):
        sample_instance(cfg, 0)


def test_json_round_trip():
    inst = make_instance(5, cycles=3, seed=4)
    doc = inst.to_json(scheme=Bands(1, 0))
    back, n_exc, scheme = instance_from_json(doc)
    assert n_exc == 2 and scheme == Bands(1, 0)
    assert np.allclose(back.delta, inst.delta)
    assert np.allclose(back.pulses.g_max, inst.pulses.g_max)
    assert np.allclose(back.pulses.durations, inst.pulses.durations)


@pytest.mark.parametrize("doc", [{}, {"N": 3}, {"N": 3, "cycles": 1, "delta_MHz": [0, 0],
                                                 "eta_MHz": [0, 0, 0], "T_pulse_ns": [10],
                                                 "g_max_MHz": [5]}])
def test_bad_instance_json(doc):
    with pytest.raises(ConfigError):
        instance_from_json(doc)


def test_schedule_validation():
    with pytest.raises(ValueError):
        PulseSchedule(np.array([1e-8, -1e-8]), np.ones((2, 3)))
    with pytest.raises(ValueError):
        PulseSchedule(np.array([1e-8]), np.ones((2, 3)))


def test_diagonal_when_uncoupled():
    params = InstanceParams(3, np.array([1.0, 2.0, 3.0]), np.array([-5.0, -5.0, -5.0]),
                            PulseSchedule(np.array([1.0]), np.zeros((1, 2))))
    basis = enumerate_basis(3, 2, MaxLevel(2))
    rng = np.random.default_rng(0)
    psi = StateVector(basis, rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim))
    out = apply_hamiltonian(params, 0.3, psi)
    n = basis.states.astype(float)
    energies = n @ params.delta + 0.5 * (n * (n - 1)) @ params.eta
    assert np.allclose(out.amplitudes, energies * psi.amplitudes)


def test_two_site_swap_is_sigma_x():
    g = 2.5
    params = InstanceParams(2, np.zeros(2), np.full(2, -1.0),
                            PulseSchedule(np.array([1.0]), np.array([[g]]), "square"))
    basis = enumerate_basis(2, 1, MaxLevel(1))
    H = np.column_stack([apply_hamiltonian(params, 0.5, StateVector(basis, e)).amplitudes
                         for e in np.eye(2)])
    assert np.allclose(H, g * np.array([[0, 1], [1, 0]]))


@pytest.mark.parametrize("n, k, scheme", [
    (4, 2, MaxLevel(2)), (4, 2, Bands(1, 0)), (3, 3, MaxLevel(3)), (5, 2, MaxLevel(1)),
])
def test_matches_dense_construction(n, k, scheme):
    params = make_instance(n, seed=11)
    basis = enumerate_basis(n, k, scheme)
    t = 0.37 * params.pulses.durations[0]
    H = dense_hamiltonian(params, basis, t, scheme.ceiling)
    rng = np.random.default_rng(1)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    got = apply_hamiltonian(params, t, StateVector(basis, v)).amplitudes
    assert np.max(np.abs(got - H @ v)) < 1e-12 * np.max(np.abs(H)) * basis.dim


def test_cycle_operator_matches_apply():
    params = make_instance(5, cycles=2, seed=3)
    basis = enumerate_basis(5, 2, MaxLevel(2))
    v = np.random.default_rng(2).normal(size=basis.dim).astype(complex)
    t_local = 0.2 * params.pulses.durations[1]
    op = CycleOperator(params, basis, 1)
    t_abs = params.pulses.boundaries[1] + t_local
    ref = apply_hamiltonian(params, t_abs, StateVector(basis, v)).amplitudes
    assert np.allclose(op.matvec(t_local, v), ref, rtol=1e-12, atol=1e-3)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), m=st.integers(1, 3), seed=st.integers(0, 10 ** 6))
def test_hamiltonian_hermitian_and_number_conserving(n, m, seed):
    params = make_instance(n, seed=seed)
    basis = enumerate_basis(n, n // 2, MaxLevel(m))
    for a in hopping_tables(basis).bonds:
        assert abs(a - a.T).max() == 0 if a.nnz else True
    rng = np.random.default_rng(seed)
    u = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    t = rng.uniform(0, params.total_time)
    Hu = apply_hamiltonian(params, t, StateVector(basis, u)).amplitudes
    Hv = apply_hamiltonian(params, t, StateVector(basis, v)).amplitudes
    assert np.vdot(v, Hu) == pytest.approx(np.conj(np.vdot(u, Hv)), rel=1e-10, abs=1e-3)


def test_spectral_bound_is_upper_bound():
    params = make_instance(6, seed=5)
    basis = enumerate_basis(6, 3, MaxLevel(2))
    op = CycleOperator(params, basis, 0)
    H = np.diag(op.diag) + op.hop.toarray()
    assert op.spectral_bound() >= np.max(np.abs(np.linalg.eigvalsh(H))) * (1 - 1e-9)


def test_statevector_validation():
    basis = enumerate_basis(3, 1, MaxLevel(1))
    with pytest.raises(ValueError):
        StateVector(basis, np.zeros(5))
    assert StateVector.fock(basis, (0, 1, 0)).norm == 1.0


def test_time_reversal_undoes_evolution():
    from gmonlab.integrator import rk4_evolve
    params = make_instance(4, cycles=2, seed=9)
    basis = enumerate_basis(4, 2, MaxLevel(2))
    psi0 = StateVector.fock(basis, (0, 1, 0, 1))
    fwd = rk4_evolve(params, basis, psi0, 4000).final_state
    back = rk4_evolve(params.time_reversed(), basis, fwd, 4000).final_state
    assert np.max(np.abs(back.amplitudes - psi0.amplitudes)) < 1e-7


def test_diagonal_energy_values():
    params = InstanceParams(2, np.array([1.0, -2.0]), np.array([-10.0, -20.0]),
                            PulseSchedule(np.array([1.0]), np.zeros((1, 1))))
    basis = enumerate_basis(2, 2, MaxLevel(2))
    e = dict(zip(map(tuple, basis.states.tolist()), diagonal_energies(params, basis)))
    assert e[(2, 0)] == pytest.approx(2.0 - 10.0)
    assert e[(1, 1)] == pytest.approx(-1.0)
    assert e[(0, 2)] == pytest.approx(-4.0 - 20.0)
    assert math.isfinite(sum(e.values()))
