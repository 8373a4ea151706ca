import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from gmonlab.bose_hubbard import InstanceConfig, InstanceParams, PulseSchedule, StateVector, sample_instance
from gmonlab.errors import BudgetExceeded
from gmonlab.fock_basis import MaxLevel, enumerate_basis, initial_pattern
from gmonlab.integrator import rk4_evolve
from gmonlab.oracles import (binned_amplitude, count_trajectories, enumerate_trajectories,
                             fermion_propagator, free_fermion_amplitude,
                             free_fermion_probabilities, linearized_product_amplitude,
                             path_sum_amplitude, phase_binned_weights, total_weight)
from gmonlab.oracles.free_fermion import single_particle_hamiltonian


def square_instance(delta, g, T):
    n = len(delta)
    return InstanceParams(n, np.asarray(delta, float), np.full(n, -2 * math.pi * 200e6),
                          PulseSchedule(np.array([T]), np.array([g], float), "square"))


# ---------------------------------------------------------------- free fermions

def test_zero_time_is_identity():
    inst = InstanceParams(4, np.zeros(4), np.zeros(4), PulseSchedule(np.zeros(0), np.zeros((0, 3))))
    assert np.array_equal(fermion_propagator(inst).V, np.eye(4))


def test_square_pulse_matches_matrix_exponential():
    rng = np.random.default_rng(0)
    n = 5
    inst = square_instance(rng.uniform(-3e7, 3e7, n), rng.uniform(1e8, 2e8, n - 1), 40e-9)
    h = single_particle_hamiltonian(inst, inst.pulses.g_max[0])
    V = fermion_propagator(inst, steps=4000).V
    assert np.max(np.abs(V - expm(-1j * 40e-9 * h))) < 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 8))
def test_propagator_unitary(seed, n):
    inst = sample_instance(InstanceConfig(N=n, cycles=2), seed)
    assert fermion_propagator(inst, 4000).unitarity_error() < 1e-9


def test_two_site_swap_amplitude():
    g, T = 2 * math.pi * 10e6, 20e-9
    V = fermion_propagator(square_instance([0.0, 0.0], [g], T), 2000)
    assert free_fermion_amplitude(V, (0, 1), (1, 0)) == pytest.approx(-1j * math.sin(g * T), abs=1e-10)


def test_vacuum_and_mismatch():
    V = np.eye(3)
    assert free_fermion_amplitude(V, (0, 0, 0), (0, 0, 0)) == 1.0
    with pytest.raises(ValueError):
        free_fermion_amplitude(V, (1, 0, 0), (1, 1, 0))
    with pytest.raises(ValueError):
        free_fermion_amplitude(V, (2, 0, 0), (0, 2, 0))


@pytest.mark.parametrize("n, seed", [(4, 0), (6, 1), (8, 2)])
def test_determinants_match_qubit_simulation(n, seed):
    inst = sample_instance(InstanceConfig(N=n, cycles=2), seed)
    basis = enumerate_basis(n, n // 2, MaxLevel(1))
    psi = rk4_evolve(inst, basis, StateVector.fock(basis, initial_pattern(n)), 6000).final_state
    V = fermion_propagator(inst, 6000)
    ff = free_fermion_probabilities(V, initial_pattern(n), basis.states)
    assert np.max(np.abs(ff - np.abs(psi.amplitudes) ** 2)) < 1e-8


def test_probabilities_sum_to_one():
    inst = sample_instance(InstanceConfig(N=6, cycles=3), 4)
    basis = enumerate_basis(6, 3, MaxLevel(1))
    p = free_fermion_probabilities(fermion_propagator(inst), initial_pattern(6), basis.states)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------- path sums

def three_site(seed):
    return sample_instance(InstanceConfig(N=3, cycles=1, t_pulse_ns=(16.0, 25.0)), seed)


def test_uncoupled_chain_is_pure_phase():
    delta = np.array([1e7, 2e7, -1e7])
    inst = InstanceParams(3, delta, np.full(3, -1e9), PulseSchedule(np.array([30e-9]), np.zeros((1, 2))))
    n = (1, 0, 1)
    amp = path_sum_amplitude(inst, n, n, 4)
    assert amp == pytest.approx(np.exp(-1j * 30e-9 * (delta[0] + delta[2])), abs=1e-13)
    assert count_trajectories(inst, n, n, 4) == 1
    assert path_sum_amplitude(inst, n, (0, 1, 1), 4) == 0


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n_in, n_out", [((0, 1, 0), (1, 0, 0)), ((1, 0, 1), (0, 1, 1)),
                                          ((1, 0, 1), (2, 0, 0))])
def test_exhaustive_equals_slice_product(seed, n_in, n_out):
    inst = three_site(seed)
    a = path_sum_amplitude(inst, n_in, n_out, 4)
    assert abs(a - linearized_product_amplitude(inst, n_in, n_out, 4)) < 1e-12
    assert abs(a - path_sum_amplitude(inst, n_in, n_out, 4, method="transfer")) < 1e-12


def test_four_sites_exhaustive_vs_transfer():
    inst = sample_instance(InstanceConfig(N=4, cycles=1), 3)
    n_in, n_out = (0, 1, 0, 1), (1, 1, 0, 0)
    a = path_sum_amplitude(inst, n_in, n_out, 3)
    assert abs(a - path_sum_amplitude(inst, n_in, n_out, 3, method="transfer")) < 1e-12
    assert abs(a - linearized_product_amplitude(inst, n_in, n_out, 3)) < 1e-12


def test_trajectory_count_matches_enumeration():
    inst = three_site(0)
    trs = list(enumerate_trajectories(inst, (1, 0, 1), (0, 1, 1), 3))
    assert len(trs) == count_trajectories(inst, (1, 0, 1), (0, 1, 1), 3)
    for t in trs:
        assert t.occupations.shape == (7, 3)
        assert np.all(t.occupations.sum(axis=1) == 2)


def test_budget_enforced():
    with pytest.raises(BudgetExceeded):
        path_sum_amplitude(three_site(0), (1, 0, 1), (0, 1, 1), 12, budget=1000)


def test_large_chain_rejected():
    inst = sample_instance(InstanceConfig(N=5, cycles=1), 0)
    with pytest.raises(ValueError):
        path_sum_amplitude(inst, (0, 1, 0, 1, 0), (1, 1, 0, 0, 0), 2)


def test_unknown_method():
    with pytest.raises(ValueError):
        path_sum_amplitude(three_site(0), (0, 1, 0), (0, 1, 0), 2, method="magic")


def test_converges_to_rk4_at_first_order():
    inst = three_site(1)
    basis = enumerate_basis(3, 1, MaxLevel(1))
    exact = rk4_evolve(inst, basis, StateVector.fock(basis, (0, 1, 0)), 4000).final_state
    ref = exact.amplitudes[basis.index_of((1, 0, 0))]
    errs = [abs(path_sum_amplitude(inst, (0, 1, 0), (1, 0, 0), M, method="transfer") - ref)
            for M in (64, 128, 256)]
    assert errs[0] > errs[1] > errs[2]
    assert 1.6 < errs[0] / errs[1] < 2.5 and 1.6 < errs[1] / errs[2] < 2.5


@pytest.mark.parametrize("R", [10 ** 3, 10 ** 6])
def test_phase_binning_reproduces_amplitude(R):
    inst = three_site(0)
    trs = list(enumerate_trajectories(inst, (1, 0, 1), (0, 1, 1), 4))
    exact = path_sum_amplitude(inst, (1, 0, 1), (0, 1, 1), 4)
    w = phase_binned_weights(trs, R)
    assert w.sum() == pytest.approx(total_weight(inst, (1, 0, 1), (0, 1, 1), 4))
    rel = abs(binned_amplitude(w, centered=True) - exact) / abs(exact)
    assert rel < 10.0 / R


def test_single_trajectory_lands_in_one_bin():
    inst = InstanceParams(2, np.array([2e7, 0.0]), np.zeros(2), PulseSchedule(np.array([10e-9]), np.zeros((1, 1))))
    trs = list(enumerate_trajectories(inst, (1, 0), (1, 0), 2))
    assert len(trs) == 1
    w = phase_binned_weights(trs, 16)
    assert np.count_nonzero(w) == 1 and w.sum() == pytest.approx(1.0)


def test_binning_needs_two_bins():
    with pytest.raises(ValueError):
        phase_binned_weights([], 1)


def test_cancellation_grows_with_slices():
    inst = three_site(2)
    ratios = [abs(path_sum_amplitude(inst, (1, 0, 1), (0, 1, 1), M, method="transfer"))
              / total_weight(inst, (1, 0, 1), (0, 1, 1), M) for M in (4, 16, 64)]
    assert ratios[0] > ratios[1] > ratios[2]
