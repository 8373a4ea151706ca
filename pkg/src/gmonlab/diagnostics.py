"""Statistical probes of chaotic output distributions.

All entropies are in nats.  Estimators from sample counts are plug-in
estimators without bias correction; the entropy of ``k`` counts over ``D``
states is biased low by roughly ``(D - 1) / (2 k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015329


@dataclass
class ProbabilityDistribution:
    p: np.ndarray
    labels: list | None = None
    normalized: bool = True

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        if np.any(self.p < 0):
            raise ValueError("probabilities must be non-negative")
        if self.labels is not None and len(self.labels) != len(self.p):
            raise ValueError("one label per probability")
        if self.normalized and abs(math.fsum(self.p) - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {math.fsum(self.p)!r}, not 1")

    @property
    def n_states(self) -> int:
        return len(self.p)

    @classmethod
    def uniform(cls, n: int, labels=None) -> "ProbabilityDistribution":
        return cls(np.full(n, 1.0 / n), labels)

    @classmethod
    def from_counts(cls, counts: dict, labels: list) -> "ProbabilityDistribution":
        c = np.array([counts.get(lab, 0) for lab in labels], dtype=float)
        return cls(c / c.sum(), list(labels))


def _p(x) -> np.ndarray:
    return np.asarray(x.p if isinstance(x, ProbabilityDistribution) else x, dtype=float)


def _xlogy_checked(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    if p.shape != q.shape:
        raise ValueError("distributions have different supports")
    bad = (p > 0) & (q <= 0)
    if np.any(bad):
        raise ValueError("cross-entropy undefined: q vanishes where p > 0")
    out = np.zeros_like(p)
    m = p > 0
    out[m] = p[m] * np.log(q[m])
    return out


def entropy(P) -> float:
    p = _p(P)
    return -math.fsum(_xlogy_checked(p, p))


def cross_entropy(P, Q) -> float:
    return -math.fsum(_xlogy_checked(_p(P), _p(Q)))


def kl_divergence(P, Q) -> float:
    p, q = _p(P), _p(Q)
    terms = _xlogy_checked(p, q) - _xlogy_checked(p, p)
    return -math.fsum(terms)


def porter_thomas_entropy(n_states: int) -> float:
    """Large-D entropy of a Porter-Thomas distribution: ln D - 1 + gamma."""
    return math.log(n_states) - 1.0 + EULER_GAMMA


# ---------------------------------------------------------------------------
# Porter-Thomas histograms
# ---------------------------------------------------------------------------

@dataclass
class Histogram:
    """Histogram of x = p * n_states with an overflow bin above the last edge."""

    bin_edges: np.ndarray
    counts: np.ndarray
    overflow: int
    total: int

    @property
    def frequencies(self) -> np.ndarray:
        """Per-bin fractions including the overflow bin as the last entry."""
        return np.append(self.counts, self.overflow) / self.total

    def reference(self) -> np.ndarray:
        """e^{-x} integrated over each bin plus the overflow tail."""
        e = np.exp(-self.bin_edges)
        return np.append(e[:-1] - e[1:], e[-1])

    def density(self) -> np.ndarray:
        return self.counts / (self.total * np.diff(self.bin_edges))


def pt_histogram(dists, bins: int | np.ndarray = 32, x_max: float = 8.0) -> Histogram:
    """Histogram of weighted probabilities for one or many distributions."""
    if isinstance(dists, ProbabilityDistribution) or (
            isinstance(dists, np.ndarray) and dists.ndim == 1):
        dists = [dists]
    xs = np.concatenate([_p(d) * len(_p(d)) for d in dists])
    edges = np.linspace(0.0, x_max, bins + 1) if np.ndim(bins) == 0 else np.asarray(bins, float)
    counts, _ = np.histogram(xs[xs < edges[-1]], bins=edges)
    return Histogram(edges, counts, int(np.sum(xs >= edges[-1])), int(len(xs)))


def pt_kl_divergence(hist: Histogram) -> float:
    """KL divergence of the weighted-probability histogram from e^{-x}."""
    return kl_divergence(hist.frequencies, hist.reference())


# ---------------------------------------------------------------------------
# Cross-entropy fidelity
# ---------------------------------------------------------------------------

def xeb_fidelity(measured, expected) -> float:
    """Normalized cross-entropy difference.

    alpha = [S(inc, exp) - S(meas, exp)] / [S(inc, exp) - S(exp)], with inc
    the uniform distribution.  ``measured`` may be a distribution or a dict of
    sample counts keyed by index or by label of ``expected``.
    """
    pe = _p(expected)
    if np.any(pe <= 0):
        raise ValueError("expected distribution must be strictly positive")
    log_pe = np.log(pe)
    s_inc = -float(np.mean(log_pe))
    s_exp = entropy(pe)
    denom = s_inc - s_exp
    if abs(denom) < 1e-12:
        raise ValueError("expected distribution is uniform; fidelity undefined")
    if isinstance(measured, dict):
        lookup = ({lab: k for k, lab in enumerate(expected.labels)}
                  if isinstance(expected, ProbabilityDistribution) and expected.labels else None)
        total = 0
        acc = []
        for key, c in measured.items():
            k = lookup[key] if lookup is not None and not isinstance(key, (int, np.integer)) else int(key)
            acc.append(c * log_pe[k])
            total += c
        s_meas = -math.fsum(acc) / total
    else:
        s_meas = cross_entropy(measured, pe)
    return (s_inc - s_meas) / denom


# ---------------------------------------------------------------------------
# Loss of memory
# ---------------------------------------------------------------------------

def time_cross_entropy(dist_t0, dist_t) -> float:
    """S(t0, t) = -sum_z p_z(t0) ln(p_z(t) / p_z(t0))."""
    return kl_divergence(dist_t0, dist_t)


def uncorrelated_baseline(p_t0, p_t) -> float:
    """Ensemble value of S(t0, t) if the two times were uncorrelated.

    ``p_t0`` and ``p_t`` are (instances, states) arrays.  Computes
    -sum_z (mean p_z(t0) * mean ln p_z(t) - mean p_z(t0) ln p_z(t0)).
    """
    a = np.asarray(p_t0, dtype=float)
    b = np.asarray(p_t, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("ensembles must be matching (instances, states) arrays")
    if np.any(b <= 0):
        raise ValueError("zero probability at time t")
    with np.errstate(divide="ignore", invalid="ignore"):
        self_term = np.where(a > 0, a * np.log(a), 0.0).mean(axis=0)
    return -math.fsum(a.mean(axis=0) * np.log(b).mean(axis=0) - self_term)


# ---------------------------------------------------------------------------
# Entanglement
# ---------------------------------------------------------------------------

def schmidt_values(amplitudes: np.ndarray, states: np.ndarray, cut: int) -> np.ndarray:
    """Schmidt coefficients across the bond between sites cut-1 and cut.

    The state is block diagonal in the left excitation number, so each block
    is decomposed separately.
    """
    n = states.shape[1]
    if not 1 <= cut <= n - 1:
        raise ValueError(f"cut must lie in 1..{n - 1}")
    left = states[:, :cut]
    right = states[:, cut:]
    n_left = left.sum(axis=1)
    values = []
    for k in np.unique(n_left):
        rows = np.nonzero(n_left == k)[0]
        _, li = np.unique(left[rows], axis=0, return_inverse=True)
        _, ri = np.unique(right[rows], axis=0, return_inverse=True)
        li, ri = li.reshape(-1), ri.reshape(-1)
        block = np.zeros((li.max() + 1, ri.max() + 1), dtype=complex)
        block[li, ri] = amplitudes[rows]
        values.append(np.linalg.svd(block, compute_uv=False))
    return np.concatenate(values) if values else np.zeros(0)


def entanglement_entropy(psi, cut: int) -> float:
    """Von Neumann entropy -sum lambda^2 ln lambda^2 of the left block."""
    lam = schmidt_values(psi.amplitudes, psi.basis.states, cut)
    w = lam ** 2
    w = w[w > 1e-300] / w.sum()
    return -math.fsum(w * np.log(w))


# ---------------------------------------------------------------------------
# Two-body correlations
# ---------------------------------------------------------------------------

def bit_matrix(labels) -> np.ndarray:
    return np.array([[ch == "1" for ch in lab] for lab in labels], dtype=float)


def connected_correlations(p, bits: np.ndarray) -> np.ndarray:
    """C_ij = <z_i z_j> - <z_i><z_j> for bit values z in {0, 1}."""
    p = _p(p)
    mean = p @ bits
    second = bits.T @ (p[:, None] * bits)
    return second - np.outer(mean, mean)


def two_body_correlations(dists, bits: np.ndarray | None = None) -> np.ndarray:
    """Mean |C_ij| at each separation d = 1..N-1 over pairs and distributions.

    Returns an array indexed by d - 1.
    """
    dists = list(dists)
    if bits is None:
        bits = bit_matrix(dists[0].labels)
    n = bits.shape[1]
    sums = np.zeros(n - 1)
    for d in dists:
        c = np.abs(connected_correlations(d, bits))
        for sep in range(1, n):
            sums[sep - 1] += np.diagonal(c, offset=sep).mean()
    return sums / len(dists)


def correlation_length(curve, separations=None) -> float:
    """xi from a least-squares fit of ln C(d) = -d / xi + const."""
    c = np.asarray(curve, dtype=float)
    d = np.arange(1, len(c) + 1) if separations is None else np.asarray(separations, float)
    m = c > 0
    if m.sum() < 3:
        raise ValueError("need at least three positive separations to fit a length")
    slope, _ = np.polyfit(d[m], np.log(c[m]), 1)
    if slope >= 0:
        return math.inf
    return -1.0 / slope
