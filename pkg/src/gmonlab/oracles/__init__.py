"""Independent amplitude computations used to cross-check the simulator."""

from .free_fermion import (FermionPropagator, fermion_propagator, free_fermion_amplitude,
                           free_fermion_probabilities)
from .path_sum import (Trajectory, binned_amplitude, count_trajectories, enumerate_trajectories,
                       linearized_product_amplitude, path_sum_amplitude, phase_binned_weights,
                       total_weight)

__all__ = [
    "FermionPropagator", "fermion_propagator", "free_fermion_amplitude",
    "free_fermion_probabilities", "Trajectory", "binned_amplitude", "count_trajectories",
    "enumerate_trajectories", "linearized_product_amplitude", "path_sum_amplitude",
    "phase_binned_weights", "total_weight",
]
