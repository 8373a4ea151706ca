"""Trotter path sum over occupation-number trajectories.

The evolution time T is cut into 2M slices of length tau = T / 2M.  Slice k
applies the bonds of one parity (bonds starting at an even site for even k,
odd site for odd k) with the bond operator expanded to first order,

    1 - i (2 tau) g_b (a_b^dag a_{b+1} + h.c.),

so every bond is driven for a total time T.  The diagonal energy is
accumulated on the time points with the trapezoid weights tau/2 at t = 0 and
t = 2M and tau in between.  A trajectory is the list of occupation vectors
n(0) = n_in, ..., n(2M) = n_out; its amplitude is e^{i phase} * weight with

    weight = prod over hops |2 tau g sqrt(n_from (n_to + 1))|
    phase  = -sum_t w_t H_d(n(t)) - (pi/2) sum over hops sign(g).

Because the bond factors are linearized, the sum converges to the exact
amplitude only at first order in tau; it equals the product of the same
linearized slice matrices exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..bose_hubbard import InstanceParams, hopping_tables
from ..errors import BudgetExceeded
from ..fock_basis import MaxLevel, enumerate_basis

DEFAULT_BUDGET = 10 ** 7
MAX_SITES = 4


@dataclass(frozen=True)
class Trajectory:
    occupations: np.ndarray     # (2M + 1, N)
    phase: float
    weight: float

    @property
    def amplitude(self) -> complex:
        return self.weight * complex(math.cos(self.phase), math.sin(self.phase))


class SliceGrid:
    """Time discretization shared by the path sum and the slice product."""

    def __init__(self, instance: InstanceParams, M: int):
        if M < 1:
            raise ValueError("M must be at least 1")
        self.instance = instance
        self.M = M
        self.n_slices = 2 * M
        self.tau = instance.total_time / self.n_slices
        self.bond_step = 2.0 * self.tau
        n_bonds = instance.N - 1
        self.bonds = [[b for b in range(n_bonds) if b % 2 == k % 2] for k in range(2)]
        # couplings sampled at slice midpoints, per slice and bond
        self.g = np.array([instance.pulses.couplings((k + 0.5) * self.tau)
                           for k in range(self.n_slices)]).reshape(self.n_slices, n_bonds)

    def point_weight(self, t: int) -> float:
        return 0.5 * self.tau if t in (0, self.n_slices) else self.tau

    def slice_bonds(self, k: int) -> list[int]:
        return self.bonds[k % 2]

    def diagonal_energy(self, n) -> float:
        n = np.asarray(n, dtype=float)
        inst = self.instance
        return float(n @ inst.delta + 0.5 * (n * (n - 1.0)) @ inst.eta)


def _as_counts(n, n_sites) -> tuple[int, ...]:
    n = tuple(int(c) for c in n)
    if len(n) != n_sites or any(c < 0 for c in n):
        raise ValueError("occupation vector does not fit the chain")
    return n


def _bond_moves(n: tuple, b: int, g: float):
    """(new occupations, |hop factor| without step, hop sign) for one bond, identity first."""
    yield n, 1.0, 0
    if g == 0.0:
        return
    if n[b] > 0:        # boson b -> b + 1
        m = list(n)
        m[b] -= 1
        m[b + 1] += 1
        yield tuple(m), math.sqrt(n[b] * (n[b + 1] + 1)), 1
    if n[b + 1] > 0:    # boson b + 1 -> b
        m = list(n)
        m[b] += 1
        m[b + 1] -= 1
        yield tuple(m), math.sqrt(n[b + 1] * (n[b] + 1)), 1


def _slice_moves(grid: SliceGrid, k: int, n: tuple):
    """All successors of ``n`` through slice ``k`` with their weight and swap phase."""
    options = [list(_bond_moves(n, b, grid.g[k, b])) for b in grid.slice_bonds(k)]
    bonds = grid.slice_bonds(k)
    for combo in itertools.product(*options):
        m = list(n)
        w = 1.0
        phase = 0.0
        for b, (sub, factor, hop) in zip(bonds, combo):
            if hop:
                m[b], m[b + 1] = sub[b], sub[b + 1]
                g = grid.g[k, b]
                w *= abs(grid.bond_step * g * factor)
                phase -= 0.5 * math.pi * math.copysign(1.0, g)
        yield tuple(m), w, phase


def _backward_counts(grid: SliceGrid, n_out: tuple, n_exc: int) -> list[dict]:
    """counts[k][n] = number of nonzero-weight trajectories from n at time k to n_out."""
    basis = enumerate_basis(grid.instance.N, n_exc, MaxLevel(max(n_exc, 1)))
    configs = [tuple(int(c) for c in row) for row in basis.states]
    counts = [dict() for _ in range(grid.n_slices + 1)]
    counts[grid.n_slices] = {n_out: 1}
    for k in range(grid.n_slices - 1, -1, -1):
        nxt = counts[k + 1]
        cur = {}
        for n in configs:
            c = sum(nxt.get(m, 0) for m, _, _ in _slice_moves(grid, k, n))
            if c:
                cur[n] = c
        counts[k] = cur
    return counts


def count_trajectories(instance: InstanceParams, n_in, n_out, M: int) -> int:
    """Number of trajectories with nonzero weight between ``n_in`` and ``n_out``."""
    grid = SliceGrid(instance, M)
    n_in = _as_counts(n_in, instance.N)
    n_out = _as_counts(n_out, instance.N)
    if sum(n_in) != sum(n_out):
        return 0
    return _backward_counts(grid, n_out, sum(n_in))[0].get(n_in, 0)


def enumerate_trajectories(instance: InstanceParams, n_in, n_out, M: int,
                           budget: int = DEFAULT_BUDGET) -> Iterator[Trajectory]:
    """Depth-first enumeration of every nonzero-weight trajectory.

    Branches that cannot reach ``n_out`` in the remaining slices are pruned
    using the backward trajectory counts, which also enforce the budget.
    """
    if instance.N > MAX_SITES:
        raise ValueError(f"exhaustive path sums are limited to N <= {MAX_SITES}")
    grid = SliceGrid(instance, M)
    n_in = _as_counts(n_in, instance.N)
    n_out = _as_counts(n_out, instance.N)
    if sum(n_in) != sum(n_out):
        return
    counts = _backward_counts(grid, n_out, sum(n_in))
    total = counts[0].get(n_in, 0)
    if total > budget:
        raise BudgetExceeded(f"{total} trajectories exceed the budget of {budget}")
    if total == 0:
        return
    energies = {}

    def energy(n):
        if n not in energies:
            energies[n] = grid.diagonal_energy(n)
        return energies[n]

    path = [n_in]

    def rec(k, n, w, phase):
        if k == grid.n_slices:
            yield Trajectory(np.array(path, dtype=np.int64), phase, w)
            return
        reach = counts[k + 1]
        for m, dw, dphase in _slice_moves(grid, k, n):
            if m not in reach:
                continue
            path.append(m)
            yield from rec(k + 1, m, w * dw,
                           phase + dphase - grid.point_weight(k + 1) * energy(m))
            path.pop()

    yield from rec(0, n_in, 1.0, -grid.point_weight(0) * energy(n_in))


def _transfer_sum(grid: SliceGrid, n_in: tuple, n_out: tuple) -> tuple[complex, float]:
    """Sum over trajectories by propagating partial sums per configuration."""
    e0 = grid.diagonal_energy(n_in)
    amp = {n_in: complex(math.cos(-grid.point_weight(0) * e0),
                         math.sin(-grid.point_weight(0) * e0))}
    weight = {n_in: 1.0}
    energies = {}
    for k in range(grid.n_slices):
        nxt_a: dict = {}
        nxt_w: dict = {}
        for n, a in amp.items():
            for m, dw, dphase in _slice_moves(grid, k, n):
                nxt_a[m] = nxt_a.get(m, 0.0) + a * dw * complex(math.cos(dphase), math.sin(dphase))
                nxt_w[m] = nxt_w.get(m, 0.0) + weight[n] * dw
        wt = grid.point_weight(k + 1)
        for m in nxt_a:
            if m not in energies:
                energies[m] = grid.diagonal_energy(m)
            nxt_a[m] *= complex(math.cos(wt * energies[m]), -math.sin(wt * energies[m]))
        amp, weight = nxt_a, nxt_w
    return amp.get(n_out, 0.0j), weight.get(n_out, 0.0)


def _fsum_complex(values) -> complex:
    re, im = [], []
    for v in values:
        re.append(v.real)
        im.append(v.imag)
    return complex(math.fsum(re), math.fsum(im))


def path_sum_amplitude(instance: InstanceParams, n_in, n_out, M: int, *,
                       method: str = "exhaustive", budget: int = DEFAULT_BUDGET) -> complex:
    """<n_out| U |n_in> as a sum over Trotter trajectories.

    ``method="exhaustive"`` enumerates every trajectory (N <= 4, at most
    ``budget`` of them) and sums with compensated summation.
    ``method="transfer"`` performs the same sum slice by slice, accumulating
    partial sums per intermediate configuration; it has no budget and
    reaches large M.
    """
    if method == "exhaustive":
        return _fsum_complex(t.amplitude
                             for t in enumerate_trajectories(instance, n_in, n_out, M, budget))
    if method == "transfer":
        n_in = _as_counts(n_in, instance.N)
        n_out = _as_counts(n_out, instance.N)
        if sum(n_in) != sum(n_out):
            return 0.0j
        return _transfer_sum(SliceGrid(instance, M), n_in, n_out)[0]
    raise ValueError(f"unknown method {method!r}")


def total_weight(instance: InstanceParams, n_in, n_out, M: int) -> float:
    """Sum of trajectory weights, the scale against which |Z| cancels."""
    n_in = _as_counts(n_in, instance.N)
    n_out = _as_counts(n_out, instance.N)
    if sum(n_in) != sum(n_out):
        return 0.0
    return _transfer_sum(SliceGrid(instance, M), n_in, n_out)[1]


def linearized_slice_product(instance: InstanceParams, M: int, n_exc: int):
    """Dense product of the linearized slice matrices on the full n_exc sector.

    Returns ``(basis, U)``; amplitudes are ``U[index_of(n_out), index_of(n_in)]``.
    """
    grid = SliceGrid(instance, M)
    basis = enumerate_basis(instance.N, n_exc, MaxLevel(max(n_exc, 1)))
    tables = hopping_tables(basis)
    hops = [a.toarray() for a in tables.bonds]
    energies = basis.states.astype(float) @ instance.delta + \
        0.5 * (basis.states * (basis.states - 1.0)).astype(float) @ instance.eta
    dim = basis.dim
    eye = np.eye(dim, dtype=complex)

    def diag_phase(t):
        return np.exp(-1j * grid.point_weight(t) * energies)

    U = np.diag(diag_phase(0))
    for k in range(grid.n_slices):
        S = eye.copy()
        for b in grid.slice_bonds(k):
            S = (eye - 1j * grid.bond_step * grid.g[k, b] * hops[b]) @ S
        U = diag_phase(k + 1)[:, None] * (S @ U)
    return basis, U


def linearized_product_amplitude(instance: InstanceParams, n_in, n_out, M: int) -> complex:
    n_in = _as_counts(n_in, instance.N)
    n_out = _as_counts(n_out, instance.N)
    if sum(n_in) != sum(n_out):
        return 0.0j
    basis, U = linearized_slice_product(instance, M, sum(n_in))
    return complex(U[basis.index_of(n_out), basis.index_of(n_in)])


def phase_binned_weights(trajectories, R: int) -> np.ndarray:
    """Total weight w_r of trajectories whose phase mod 2pi falls in bin r of R.

    Bin r covers [2pi r / R, 2pi (r + 1) / R).
    """
    if R < 2:
        raise ValueError("need at least two phase bins")
    w = np.zeros(R)
    phases = []
    weights = []
    for t in trajectories:
        phases.append(t.phase)
        weights.append(t.weight)
    if not phases:
        return w
    frac = np.mod(np.asarray(phases), 2.0 * math.pi) / (2.0 * math.pi)
    r = np.minimum((frac * R).astype(np.int64), R - 1)
    np.add.at(w, r, np.asarray(weights))
    return w


def binned_amplitude(w_r: np.ndarray, centered: bool = False) -> complex:
    """sum_r w_r e^{2 pi i r / R}, or at bin centres (r + 1/2) / R."""
    R = len(w_r)
    r = np.arange(R) + (0.5 if centered else 0.0)
    z = w_r * np.exp(2j * math.pi * r / R)
    return complex(math.fsum(z.real), math.fsum(z.imag))
