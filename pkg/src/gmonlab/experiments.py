"""Ensemble studies built from the simulator and the diagnostics.

Each runner draws its instances from an :class:`InstanceConfig` with seeds
spawned from one base seed, so a study is reproducible from
``(config, n_instances, seed)`` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bose_hubbard import InstanceConfig, InstanceParams, StateVector, sample_instance
from .diagnostics import (ProbabilityDistribution, entanglement_entropy,
                          entropy, porter_thomas_entropy, pt_histogram, pt_kl_divergence,
                          time_cross_entropy, two_body_correlations, uncorrelated_baseline)
from .fock_basis import Basis, MaxLevel, TruncationScheme, enumerate_basis, half_filling
from .integrator import (default_steps, distribution_fidelity, evolve_auto, evolve_initial,
                         project_qubit_subspace, qubit_basis, qubit_probabilities)


def instance_seeds(seed: int, n: int) -> list[int]:
    """Independent per-instance seeds derived from one base seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1)[0]) for c in children]


def sample_ensemble(config: InstanceConfig, n_instances: int, seed: int = 0) -> list[InstanceParams]:
    return [sample_instance(config, s) for s in instance_seeds(seed, n_instances)]


def _evolve(instance, basis, steps, **kw):
    if steps:
        return evolve_initial(instance, basis, steps, **kw)
    return evolve_auto(instance, basis, **kw)


def qubit_distribution(psi: StateVector) -> ProbabilityDistribution:
    return project_qubit_subspace(psi).normalized


def final_distribution(instance: InstanceParams, basis: Basis,
                       steps: int | None = None) -> ProbabilityDistribution:
    return qubit_distribution(_evolve(instance, basis, steps, keep_states=False).final_state)


def cycle_distributions(instance: InstanceParams, basis: Basis,
                        steps: int | None = None) -> np.ndarray:
    """Renormalized qubit distributions after every cycle, shape (cycles + 1, D)."""
    res = _evolve(instance, basis, steps, keep_states=False)
    rows = []
    for _, p in res.checkpoints:
        q = p[basis.qubit_mask]
        rows.append(q / q.sum())
    return np.array(rows)


# ---------------------------------------------------------------------------
# Porter-Thomas convergence
# ---------------------------------------------------------------------------

@dataclass
class PorterThomasResult:
    N: int
    n_instances: int
    kl: float
    mean_entropy: float
    pt_entropy: float
    tail_fraction: float                 # fraction of states with p * D > 4
    histogram: object = field(repr=False, default=None)

    @property
    def entropy_deviation(self) -> float:
        return abs(self.mean_entropy - self.pt_entropy) / self.pt_entropy


def porter_thomas_study(config: InstanceConfig, n_instances: int, seed: int = 0,
                        scheme: TruncationScheme = MaxLevel(2), bins: int = 32,
                        x_max: float = 8.0) -> PorterThomasResult:
    basis = enumerate_basis(config.N, half_filling(config.N), scheme)
    dists = [final_distribution(inst, basis) for inst in sample_ensemble(config, n_instances, seed)]
    hist = pt_histogram(dists, bins=bins, x_max=x_max)
    d = dists[0].n_states
    xs = np.concatenate([p.p * d for p in dists])
    return PorterThomasResult(config.N, n_instances, pt_kl_divergence(hist),
                              float(np.mean([entropy(p) for p in dists])),
                              porter_thomas_entropy(d), float(np.mean(xs > 4.0)), hist)


# ---------------------------------------------------------------------------
# Truncation hierarchy and integrator convergence
# ---------------------------------------------------------------------------

def truncation_fidelities(instance: InstanceParams, schemes, truth: TruncationScheme = MaxLevel(4),
                          steps: int | None = None) -> dict:
    """XEB fidelity of each scheme's qubit output scored against ``truth``."""
    n_exc = half_filling(instance.N)
    truth_basis = enumerate_basis(instance.N, n_exc, truth)
    ref = final_distribution(instance, truth_basis, steps)
    out = {}
    for scheme in schemes:
        basis = enumerate_basis(instance.N, n_exc, scheme)
        out[str(scheme)] = distribution_fidelity(final_distribution(instance, basis, steps), ref)
    return out


def step_fidelity_curve(instance: InstanceParams, basis: Basis, step_counts,
                        reference_steps: int | None = None) -> dict:
    """Fidelity of the qubit output at each step count against a fine reference."""
    if reference_steps is None:
        reference_steps = 4 * default_steps(instance, basis)
    ref = final_distribution(instance, basis, reference_steps)
    out = {}
    for s in step_counts:
        with np.errstate(all="ignore"):
            res = evolve_initial(instance, basis, int(s), check_norm=False, keep_states=False)
            p = qubit_probabilities(res.final_state.amplitudes, basis)
            p = p / p.sum() if np.isfinite(p.sum()) and p.sum() > 0 else np.full_like(p, np.nan)
        out[int(s)] = distribution_fidelity(p, ref)
    return out


def knee_width(curve: dict, low: float = 0.1, high: float = 0.99) -> float:
    """Ratio between the first step count above ``high`` and the last below ``low``.

    Returns inf when the curve never crosses both levels.
    """
    steps = sorted(curve)
    below = [s for s in steps if curve[s] < low]
    above = [s for s in steps if curve[s] > high and (not below or s > max(below))]
    if not below or not above:
        return math.inf
    return min(above) / max(below)


# ---------------------------------------------------------------------------
# Loss of memory
# ---------------------------------------------------------------------------

@dataclass
class MemoryLossResult:
    cycles: np.ndarray          # later times t, in cycles
    mean_tce: np.ndarray        # ensemble mean S(t0, t)
    baseline: np.ndarray        # uncorrelated baseline at each t
    t0_cycle: int

    @property
    def relative_gap(self) -> np.ndarray:
        return np.abs(self.mean_tce - self.baseline) / self.baseline


def memory_loss_study(config: InstanceConfig, n_instances: int, seed: int = 0,
                      t0_cycle: int = 2, scheme: TruncationScheme = MaxLevel(2)) -> MemoryLossResult:
    basis = enumerate_basis(config.N, half_filling(config.N), scheme)
    traj = np.array([cycle_distributions(inst, basis)
                     for inst in sample_ensemble(config, n_instances, seed)])
    later = np.arange(t0_cycle + 1, config.cycles + 1)
    p0 = traj[:, t0_cycle]
    mean_tce = np.array([np.mean([time_cross_entropy(p0[i], traj[i, c])
                                  for i in range(n_instances)]) for c in later])
    base = np.array([uncorrelated_baseline(p0, traj[:, c]) for c in later])
    return MemoryLossResult(later, mean_tce, base, t0_cycle)


# ---------------------------------------------------------------------------
# Localization and entanglement
# ---------------------------------------------------------------------------

def correlation_curve(config: InstanceConfig, n_instances: int, seed: int = 0,
                      scheme: TruncationScheme = MaxLevel(2), first_cycle: int = 1) -> np.ndarray:
    """Mean |C(d)| over pairs, instances and cycles ``first_cycle..cycles``."""
    basis = enumerate_basis(config.N, half_filling(config.N), scheme)
    labels = qubit_basis(config.N, half_filling(config.N)).labels()
    dists = []
    for inst in sample_ensemble(config, n_instances, seed):
        for p in cycle_distributions(inst, basis)[first_cycle:]:
            dists.append(ProbabilityDistribution(p, labels))
    return two_body_correlations(dists)


def entanglement_curve(instance: InstanceParams, basis: Basis, points_per_cycle: int = 8,
                       steps: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(times, half-chain entanglement entropy) sampled inside every cycle."""
    res = _evolve(instance, basis, steps, keep_states=True, sub_checkpoints=points_per_cycle)
    cut = basis.n_sites // 2
    t = np.array([c[0] for c in res.checkpoints])
    s = np.array([entanglement_entropy(c[1], cut) for c in res.checkpoints])
    return t, s


def mean_entanglement_curve(config: InstanceConfig, n_instances: int, seed: int = 0,
                            scheme: TruncationScheme = MaxLevel(2),
                            points_per_cycle: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble-mean S_{N/2} on a common grid of fractional cycle counts."""
    basis = enumerate_basis(config.N, half_filling(config.N), scheme)
    curves = []
    for inst in sample_ensemble(config, n_instances, seed):
        _, s = entanglement_curve(inst, basis, points_per_cycle)
        curves.append(s)
    grid = np.arange(len(curves[0])) / points_per_cycle
    return grid, np.mean(curves, axis=0)


def initial_slope(x: np.ndarray, y: np.ndarray, x_max: float) -> float:
    """Least-squares slope of y(x) through the points with x <= x_max."""
    m = x <= x_max + 1e-12
    if m.sum() < 2:
        raise ValueError("need at least two points in the fit window")
    return float(np.polyfit(x[m], y[m], 1)[0])
