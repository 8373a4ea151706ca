"""Driven Bose-Hubbard chain: protocol instances and the Hamiltonian action.

Internal units are seconds and angular frequency (rad/s).  The JSON form of
an instance uses MHz (frequency / 2pi) and ns; conversion happens at the
boundary only.

    H(t) = sum_i [delta_i n_i + eta_i/2 n_i (n_i - 1)]
         + sum_i g_{i,i+1}(t) (a_i^dag a_{i+1} + h.c.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .fock_basis import Basis, MaxLevel, TruncationScheme, half_filling, parse_scheme

TWO_PI_MHZ = 2.0 * math.pi * 1e6
NS = 1e-9

ENVELOPES = ("sin2", "square", "trapezoid")


def coupling_envelope(t, t_pulse: float, g_max: float = 1.0, kind: str = "sin2",
                      ramp: float = 0.2):
    """Coupling within one pulse, ``0 <= t <= t_pulse``.

    ``sin2`` is g_max sin^2(pi t / T); ``trapezoid`` ramps linearly over the
    first and last ``ramp`` fraction of the pulse; ``square`` is flat.
    """
    x = np.clip(np.asarray(t, dtype=float) / t_pulse, 0.0, 1.0)
    if kind == "sin2":
        shape = np.sin(np.pi * x) ** 2
    elif kind == "square":
        shape = np.ones_like(x)
    elif kind == "trapezoid":
        shape = np.clip(np.minimum(x, 1.0 - x) / ramp, 0.0, 1.0)
    else:
        raise ValueError(f"unknown envelope {kind!r}")
    out = g_max * shape
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class PulseSchedule:
    """Coupler pulses: one pulse per cycle, all bonds pulsed together."""

    durations: np.ndarray          # (cycles,) seconds
    g_max: np.ndarray              # (cycles, bonds) rad/s
    envelope: str = "sin2"

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=float).reshape(-1)
        self.g_max = np.asarray(self.g_max, dtype=float)
        if self.g_max.ndim == 1:
            self.g_max = self.g_max.reshape(len(self.durations), -1)
        if self.g_max.shape[0] != len(self.durations):
            raise ValueError("g_max needs one row per cycle")
        if np.any(self.durations <= 0):
            raise ValueError("pulse durations must be positive")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}")

    @property
    def cycles(self) -> int:
        return len(self.durations)

    @property
    def n_bonds(self) -> int:
        return self.g_max.shape[1]

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def total_time(self) -> float:
        return float(self.durations.sum())

    def locate(self, t: float) -> tuple[int, float]:
        """(cycle index, local time) for absolute time ``t``."""
        b = self.boundaries
        if t < -1e-15 * max(1.0, b[-1]) or t > b[-1] * (1 + 1e-12):
            raise ValueError(f"time {t} outside schedule [0, {b[-1]}]")
        c = int(np.searchsorted(b, t, side="right") - 1)
        c = min(max(c, 0), self.cycles - 1)
        return c, min(max(t - b[c], 0.0), self.durations[c])

    def envelope_at(self, cycle: int, local_t: float) -> float:
        return coupling_envelope(local_t, self.durations[cycle], 1.0, self.envelope)

    def couplings(self, t: float) -> np.ndarray:
        """Per-bond coupling g_{i,i+1}(t) in rad/s."""
        c, lt = self.locate(t)
        return self.g_max[c] * self.envelope_at(c, lt)

    def truncated(self, cycles: int) -> "PulseSchedule":
        return PulseSchedule(self.durations[:cycles], self.g_max[:cycles], self.envelope)

    def reversed(self) -> "PulseSchedule":
        return PulseSchedule(self.durations[::-1].copy(), self.g_max[::-1].copy(), self.envelope)


@dataclass
class InstanceParams:
    """One random protocol instance."""

    N: int
    delta: np.ndarray            # rad/s
    eta: np.ndarray              # rad/s
    pulses: PulseSchedule
    seed: int = 0

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float).reshape(-1)
        self.eta = np.asarray(self.eta, dtype=float).reshape(-1)
        if len(self.delta) != self.N or len(self.eta) != self.N:
            raise ValueError("delta and eta need one entry per site")
        if self.pulses.n_bonds != self.N - 1:
            raise ValueError(f"pulse schedule has {self.pulses.n_bonds} bonds, chain has {self.N - 1}")

    @property
    def total_time(self) -> float:
        return self.pulses.total_time

    def truncated(self, cycles: int) -> "InstanceParams":
        return InstanceParams(self.N, self.delta, self.eta, self.pulses.truncated(cycles), self.seed)

    def time_reversed(self) -> "InstanceParams":
        """Schedule run backwards with every Hamiltonian term sign-flipped.

        Evolving under this after the original returns the initial state.
        """
        p = self.pulses.reversed()
        return InstanceParams(self.N, -self.delta, -self.eta,
                              PulseSchedule(p.durations, -p.g_max, p.envelope), self.seed)

    def to_json(self, n_exc: int | None = None, scheme: TruncationScheme | None = None) -> dict:
        return {
            "N": self.N,
            "n_exc": half_filling(self.N) if n_exc is None else n_exc,
            "scheme": str(scheme if scheme is not None else MaxLevel(2)),
            "delta_MHz": (self.delta / TWO_PI_MHZ).tolist(),
            "eta_MHz": (self.eta / TWO_PI_MHZ).tolist(),
            "cycles": self.pulses.cycles,
            "T_pulse_ns": (self.pulses.durations / NS).tolist(),
            "g_max_MHz": (self.pulses.g_max / TWO_PI_MHZ).tolist(),
            "envelope": self.pulses.envelope,
            "seed": self.seed,
        }


def instance_from_json(doc: dict) -> tuple[InstanceParams, int, TruncationScheme]:
    """Parse the instance JSON schema; returns (params, n_exc, scheme)."""
    try:
        n = int(doc["N"])
        cycles = int(doc["cycles"])
        g = np.asarray(doc["g_max_MHz"], dtype=float)
        if g.ndim == 1 and len(g) == cycles:
            g = np.repeat(g[:, None], n - 1, axis=1)
        pulses = PulseSchedule(np.asarray(doc["T_pulse_ns"], dtype=float) * NS,
                               g.reshape(cycles, n - 1) * TWO_PI_MHZ,
                               doc.get("envelope", "sin2"))
        params = InstanceParams(n, np.asarray(doc["delta_MHz"], dtype=float) * TWO_PI_MHZ,
                                np.asarray(doc["eta_MHz"], dtype=float) * TWO_PI_MHZ,
                                pulses, int(doc.get("seed", 0)))
        n_exc = int(doc.get("n_exc", half_filling(n)))
        scheme = parse_scheme(str(doc.get("scheme", "max:2")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad instance document: {exc}") from exc
    return params, n_exc, scheme


@dataclass
class InstanceConfig:
    """Sampling ranges.  Frequencies in MHz (f / 2pi), durations in ns."""

    N: int
    cycles: int
    delta_MHz: float = 5.0                 # detunings uniform in +-delta_MHz
    g_max_MHz: tuple = (22.4, 38.4)
    t_pulse_ns: tuple = (42.0, 72.0)
    eta_MHz: float = -200.0
    per_bond: bool = True                  # independent pulse height per coupler
    envelope: str = "sin2"
    seed: int = 0


def sample_instance(config: InstanceConfig, seed: int | None = None) -> InstanceParams:
    """Draw a reproducible instance; the same seed gives the same instance."""
    seed = config.seed if seed is None else seed
    lo_t, hi_t = config.t_pulse_ns
    lo_g, hi_g = config.g_max_MHz
    if lo_t < 0 or hi_t < lo_t:
        raise ConfigError(f"bad pulse duration range {config.t_pulse_ns}")
    if hi_g < lo_g or config.delta_MHz < 0:
        raise ConfigError("degenerate or inverted sampling range")
    if config.N < 2 or config.cycles < 1:
        raise ConfigError("need N >= 2 and at least one cycle")
    rng = np.random.default_rng(seed)
    n, cyc = config.N, config.cycles
    delta = rng.uniform(-config.delta_MHz, config.delta_MHz, size=n)
    durations = rng.uniform(lo_t, hi_t, size=cyc)
    if np.any(durations <= 0):
        raise ConfigError("pulse durations must be positive")
    if config.per_bond:
        g = rng.uniform(lo_g, hi_g, size=(cyc, n - 1))
    else:
        g = np.repeat(rng.uniform(lo_g, hi_g, size=cyc)[:, None], n - 1, axis=1)
    pulses = PulseSchedule(durations * NS, g * TWO_PI_MHZ, config.envelope)
    eta = np.full(n, config.eta_MHz * TWO_PI_MHZ)
    return InstanceParams(n, delta * TWO_PI_MHZ, eta, pulses, seed)


@dataclass
class StateVector:
    basis: Basis
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError("amplitude vector does not match basis dimension")

    @classmethod
    def fock(cls, basis: Basis, counts) -> "StateVector":
        amp = np.zeros(basis.dim, dtype=complex)
        amp[basis.index_of(tuple(counts))] = 1.0
        return cls(basis, amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


class HoppingTables:
    """Per-bond hopping operators A_b = a_b^dag a_{b+1} + h.c. on a basis.

    Stored as sparse index tables (CSR); H(t) itself is never assembled.
    Hops leaving the admissible set are dropped.
    """

    def __init__(self, basis: Basis):
        self.basis = basis
        n, dim = basis.n_sites, basis.dim
        st = basis.states.astype(np.int64)
        self.occupations = st
        self.bonds = []
        shift = basis.bits
        for b in range(n - 1):
            # a_b^dag a_{b+1}: boson moves from b+1 to b
            src = np.nonzero(st[:, b + 1] > 0)[0]
            w_b = shift * (n - 1 - b)
            w_b1 = shift * (n - 2 - b)
            tgt_codes = basis.codes[src] + (1 << w_b) - (1 << w_b1)
            ok_range = st[src, b] + 1 < (1 << shift)
            tgt = np.full(len(src), -1, dtype=np.int64)
            tgt[ok_range] = basis.lookup(tgt_codes[ok_range])
            keep = tgt >= 0
            src, tgt = src[keep], tgt[keep]
            amp = np.sqrt(st[src, b + 1] * (st[src, b] + 1.0))
            half = sp.csr_matrix((amp, (tgt, src)), shape=(dim, dim))
            self.bonds.append((half + half.T).tocsr())

    def combined(self, weights) -> sp.csr_matrix:
        """sum_b weights[b] A_b as one sparse operator."""
        dim = self.basis.dim
        out = sp.csr_matrix((dim, dim))
        for w, a in zip(weights, self.bonds):
            if w != 0.0:
                out = out + w * a
        return out.tocsr()


@lru_cache(maxsize=8)
def _tables(basis: Basis) -> HoppingTables:
    return HoppingTables(basis)


def hopping_tables(basis: Basis) -> HoppingTables:
    return _tables(basis)


def diagonal_energies(params: InstanceParams, basis: Basis) -> np.ndarray:
    n = basis.states.astype(float)
    return n @ params.delta + 0.5 * (n * (n - 1.0)) @ params.eta


def _check(params: InstanceParams, basis: Basis):
    if basis.n_sites != params.N:
        raise ValueError(f"basis has {basis.n_sites} sites, instance has {params.N}")


def apply_hamiltonian(params: InstanceParams, t: float, psi: StateVector) -> StateVector:
    """H(t)|psi> without assembling H."""
    basis = psi.basis
    _check(params, basis)
    tables = hopping_tables(basis)
    out = diagonal_energies(params, basis) * psi.amplitudes
    for g, a in zip(params.pulses.couplings(t), tables.bonds):
        if g != 0.0:
            out = out + g * (a @ psi.amplitudes)
    return StateVector(basis, out)


class CycleOperator:
    """H(t) restricted to one cycle: diag + envelope(t) * K_cycle.

    All bonds share the cycle's envelope, so the hopping part collapses into
    one precombined sparse operator per cycle.
    """

    def __init__(self, params: InstanceParams, basis: Basis, cycle: int, diag=None):
        _check(params, basis)
        self.diag = diagonal_energies(params, basis) if diag is None else diag
        self.hop = hopping_tables(basis).combined(params.pulses.g_max[cycle]).astype(complex)
        self.t_pulse = params.pulses.durations[cycle]
        self.kind = params.pulses.envelope

    def envelope(self, local_t):
        return coupling_envelope(local_t, self.t_pulse, 1.0, self.kind)

    def matvec(self, local_t: float, v: np.ndarray, env: float | None = None) -> np.ndarray:
        if env is None:
            env = self.envelope(local_t)
        out = self.diag * v
        if env != 0.0:
            out += env * (self.hop @ v)
        return out

    def spectral_bound(self) -> float:
        """Upper bound on ||H(t)|| over the cycle (envelope peaks at 1)."""
        return norm_bound(self.diag, self.hop)


def norm_bound(diag: np.ndarray, hop) -> float:
    """max|diag| + ||hop||_2, the latter from a Lanczos estimate with a safety margin."""
    d = float(np.max(np.abs(diag))) if len(diag) else 0.0
    if hop.nnz == 0:
        return d
    if hop.shape[0] < 64:
        h = float(np.max(np.abs(np.linalg.eigvalsh(hop.toarray()))))
    else:
        from scipy.sparse.linalg import eigsh
        h = float(abs(eigsh(hop, k=1, which="LM", tol=1e-4, return_eigenvectors=False)[0]))
    return d + 1.05 * h
