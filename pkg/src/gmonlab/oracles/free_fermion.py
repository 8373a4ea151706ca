"""Hard-core limit: Jordan-Wigner free fermions and determinant amplitudes.

In the qubit subspace the chain maps onto free fermions with the N x N
single-particle Hamiltonian h(t) (diagonal delta_i, off-diagonal
g_{i,i+1}(t)).  Open-chain nearest-neighbour hops carry no Jordan-Wigner
string, so amplitudes between Fock states are k x k determinants of the
single-particle propagator.  The anharmonicity never enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bose_hubbard import InstanceParams, coupling_envelope
from ..integrator import steps_per_cycle


@dataclass
class FermionPropagator:
    V: np.ndarray

    def unitarity_error(self) -> float:
        n = self.V.shape[0]
        return float(np.linalg.norm(self.V.conj().T @ self.V - np.eye(n), ord=2))


def single_particle_hamiltonian(instance: InstanceParams, couplings) -> np.ndarray:
    h = np.diag(instance.delta.astype(complex))
    idx = np.arange(instance.N - 1)
    h[idx, idx + 1] = couplings
    h[idx + 1, idx] = couplings
    return h


def fermion_propagator(instance: InstanceParams, steps: int = 4000) -> FermionPropagator:
    """Time-ordered exp(-i int h dt) by RK4, stepping exactly like ``rk4_evolve``."""
    pulses = instance.pulses
    n = instance.N
    V = np.eye(n, dtype=complex)
    if pulses.total_time == 0:
        return FermionPropagator(V)
    h_diag = single_particle_hamiltonian(instance, np.zeros(n - 1))
    idx = np.arange(n - 1)
    hop = np.zeros((n, n), dtype=complex)
    for c, n_steps in enumerate(steps_per_cycle(pulses.durations, steps)):
        hop[:] = 0.0
        hop[idx, idx + 1] = pulses.g_max[c]
        hop[idx + 1, idx] = pulses.g_max[c]
        t_pulse = pulses.durations[c]
        dt = t_pulse / n_steps

        def f(t, M):
            env = coupling_envelope(t, t_pulse, 1.0, pulses.envelope)
            return -1j * ((h_diag + env * hop) @ M)

        t = 0.0
        for k in range(n_steps):
            k1 = f(t, V)
            k2 = f(t + 0.5 * dt, V + 0.5 * dt * k1)
            k3 = f(t + 0.5 * dt, V + 0.5 * dt * k2)
            k4 = f(t + dt, V + dt * k3)
            V = V + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (k + 1) * dt
    return FermionPropagator(V)


def occupied_sites(counts) -> np.ndarray:
    counts = np.asarray(counts)
    if np.any((counts < 0) | (counts > 1)):
        raise ValueError("free-fermion amplitudes need hard-core (0/1) occupations")
    return np.nonzero(counts)[0]


def free_fermion_amplitude(V, n_in, n_out) -> complex:
    """<n_out| U |n_in> = det V[j_beta, i_alpha] over occupied sites."""
    V = V.V if isinstance(V, FermionPropagator) else np.asarray(V)
    i_sites = occupied_sites(n_in)
    j_sites = occupied_sites(n_out)
    if len(i_sites) != len(j_sites):
        raise ValueError("input and output excitation numbers differ")
    if len(i_sites) == 0:
        return 1.0 + 0.0j
    return complex(np.linalg.det(V[np.ix_(j_sites, i_sites)]))


def free_fermion_probabilities(V, n_in, states) -> np.ndarray:
    """|amplitude|^2 for every hard-core output state in ``states``."""
    return np.array([abs(free_fermion_amplitude(V, n_in, s)) ** 2 for s in states])
