import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gmonlab.bose_hubbard import StateVector
from gmonlab.diagnostics import (EULER_GAMMA, ProbabilityDistribution, bit_matrix,
                                 connected_correlations, correlation_length, cross_entropy,
                                 entanglement_entropy, entropy, kl_divergence,
                                 porter_thomas_entropy, pt_histogram, pt_kl_divergence,
                                 schmidt_values, time_cross_entropy, two_body_correlations,
                                 uncorrelated_baseline, xeb_fidelity)
from gmonlab.fock_basis import MaxLevel, enumerate_basis


def positive_dist(n):
    return arrays(float, n, elements=st.floats(1e-3, 1.0)).map(lambda x: x / x.sum())


def pt_sample(rng, d):
    x = rng.exponential(size=d)
    return x / x.sum()


def test_distribution_validation():
    with pytest.raises(ValueError):
        ProbabilityDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        ProbabilityDistribution([1.5, -0.5])
    with pytest.raises(ValueError):
        ProbabilityDistribution([0.5, 0.5], ["a"])
    assert ProbabilityDistribution([0.2, 0.2], normalized=False).n_states == 2


def test_from_counts():
    d = ProbabilityDistribution.from_counts({"01": 3, "10": 1}, ["01", "10", "11"])
    assert np.allclose(d.p, [0.75, 0.25, 0.0])


@pytest.mark.parametrize("d", [2, 7, 64])
def test_uniform_entropy(d):
    assert entropy(ProbabilityDistribution.uniform(d)) == pytest.approx(math.log(d))


@settings(max_examples=50, deadline=None)
@given(p=positive_dist(8), q=positive_dist(8))
def test_gibbs_inequality(p, q):
    assert cross_entropy(p, q) >= entropy(p) - 1e-12
    assert kl_divergence(p, q) >= -1e-12
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_undefined_support():
    with pytest.raises(ValueError):
        cross_entropy([0.5, 0.5], [1.0, 0.0])


def test_porter_thomas_entropy_on_synthetic_draws():
    rng = np.random.default_rng(0)
    d = 4096
    s = np.mean([entropy(pt_sample(rng, d)) for _ in range(20)])
    assert s == pytest.approx(porter_thomas_entropy(d), rel=0.01)
    assert porter_thomas_entropy(d) == pytest.approx(math.log(d) - 1 + EULER_GAMMA)


def test_histogram_uniform_lands_in_unit_bin():
    h = pt_histogram(ProbabilityDistribution.uniform(50), bins=8, x_max=8.0)
    assert h.counts[1] == 50 and h.counts.sum() == 50 and h.overflow == 0


def test_histogram_structure():
    rng = np.random.default_rng(1)
    h = pt_histogram([pt_sample(rng, 100) for _ in range(5)])
    assert h.counts.sum() + h.overflow == h.total == 500
    assert np.all(np.diff(h.bin_edges) > 0)
    assert h.reference().sum() == pytest.approx(1.0)
    assert h.frequencies.sum() == pytest.approx(1.0)


def test_histogram_of_exponential_draws():
    rng = np.random.default_rng(2)
    n = 10 ** 6
    x = rng.exponential(size=n)
    h = pt_histogram(x / n, bins=32, x_max=8.0)
    ref = h.reference()
    sigma = np.sqrt(ref * (1 - ref) / n)
    assert np.all(np.abs(h.frequencies - ref) < 3.5 * sigma)
    assert pt_kl_divergence(h) < 1e-4


def test_xeb_limits():
    rng = np.random.default_rng(3)
    p = ProbabilityDistribution(pt_sample(rng, 200))
    assert xeb_fidelity(p, p) == pytest.approx(1.0)
    assert xeb_fidelity(ProbabilityDistribution.uniform(200), p) == pytest.approx(0.0, abs=1e-12)


def test_xeb_from_counts():
    rng = np.random.default_rng(4)
    labels = [f"{k:03b}" for k in range(8)]
    p = ProbabilityDistribution(pt_sample(rng, 8), labels)
    counts = dict(zip(labels, rng.multinomial(200000, p.p)))
    assert xeb_fidelity(counts, p) == pytest.approx(1.0, abs=0.05)
    by_index = {k: c for k, c in enumerate(counts.values())}
    assert xeb_fidelity(by_index, p) == pytest.approx(xeb_fidelity(counts, p))


@settings(max_examples=30, deadline=None)
@given(p=positive_dist(6), q=positive_dist(6), perm=st.permutations(range(6)))
def test_xeb_relabeling_invariance(p, q, perm):
    assume(np.ptp(q) > 1e-3)
    perm = list(perm)
    assert xeb_fidelity(p[perm], q[perm]) == pytest.approx(xeb_fidelity(p, q), rel=1e-9, abs=1e-9)


def test_xeb_rejects_uniform_expectation():
    with pytest.raises(ValueError):
        xeb_fidelity(ProbabilityDistribution.uniform(4), ProbabilityDistribution.uniform(4))


def test_time_cross_entropy_at_t0():
    p = np.array([0.1, 0.2, 0.7])
    assert time_cross_entropy(p, p) == 0.0


def test_uncorrelated_baseline_on_independent_draws():
    rng = np.random.default_rng(5)
    d, m = 256, 400
    a = np.array([pt_sample(rng, d) for _ in range(m)])
    b = np.array([pt_sample(rng, d) for _ in range(m)])
    s = np.array([time_cross_entropy(x, y) for x, y in zip(a, b)])
    base = uncorrelated_baseline(a, b)
    assert abs(s.mean() - base) < 3 * s.std(ddof=1) / math.sqrt(m)
    # for two independent PT draws S -> 1 - gamma + ... ~ 1 nat
    assert 0.8 < base < 1.2


def test_baseline_shape_check():
    with pytest.raises(ValueError):
        uncorrelated_baseline(np.ones((2, 3)) / 3, np.ones((3, 3)) / 3)


def two_site_state(amps):
    basis = enumerate_basis(2, 1, MaxLevel(1))
    return StateVector(basis, np.asarray(amps, complex))


def test_entanglement_product_state():
    assert entanglement_entropy(two_site_state([1, 0]), 1) == pytest.approx(0.0, abs=1e-15)


def test_entanglement_bell_state():
    s = entanglement_entropy(two_site_state([1 / math.sqrt(2), 1 / math.sqrt(2)]), 1)
    assert s == pytest.approx(math.log(2))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), cut=st.integers(1, 5))
def test_entanglement_bounds_and_schmidt_norm(seed, cut):
    basis = enumerate_basis(6, 3, MaxLevel(2))
    rng = np.random.default_rng(seed)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    lam = schmidt_values(v, basis.states, cut)
    assert np.sum(lam ** 2) == pytest.approx(1.0)
    s = entanglement_entropy(StateVector(basis, v), cut)
    left = len({tuple(x[:cut]) for x in basis.states.tolist()})
    right = len({tuple(x[cut:]) for x in basis.states.tolist()})
    assert -1e-12 <= s <= math.log(min(left, right)) + 1e-12


def test_entanglement_reflection_symmetry():
    basis = enumerate_basis(4, 2, MaxLevel(2))
    rng = np.random.default_rng(7)
    v = rng.normal(size=basis.dim) + 0j
    refl = np.array([basis.index_of(tuple(reversed(basis.state_of(k)))) for k in range(basis.dim)])
    v = v + v[refl]
    v /= np.linalg.norm(v)
    psi = StateVector(basis, v)
    assert entanglement_entropy(psi, 1) == pytest.approx(entanglement_entropy(psi, 3))


def test_entanglement_matches_dense_reduced_density():
    basis = enumerate_basis(4, 2, MaxLevel(2))
    rng = np.random.default_rng(8)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    full = np.zeros((3,) * 4, complex)
    for k in range(basis.dim):
        full[basis.state_of(k)] = v[k]
    m = full.reshape(9, 9)
    rho = m @ m.conj().T
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    assert entanglement_entropy(StateVector(basis, v), 2) == pytest.approx(-np.sum(w * np.log(w)))


def test_product_distribution_has_no_correlations():
    labels = [f"{k:03b}" for k in range(8)]
    bits = bit_matrix(labels)
    marg = np.array([0.2, 0.5, 0.9])
    p = np.prod(np.where(bits == 1, marg, 1 - marg), axis=1)
    c = connected_correlations(p, bits)
    assert np.allclose(c - np.diag(np.diag(c)), 0.0, atol=1e-15)


def test_anticorrelated_pair():
    c = connected_correlations(np.array([0.5, 0.5]), bit_matrix(["01", "10"]))
    assert c[0, 1] == pytest.approx(-0.25)


def test_two_body_curve_shape():
    labels = ["0011", "0101", "0110", "1001", "1010", "1100"]
    d = ProbabilityDistribution.uniform(6, labels)
    curve = two_body_correlations([d, d])
    assert curve.shape == (3,)
    assert np.all(curve >= 0)


@pytest.mark.parametrize("xi", [1.5, 4.0, 7.0])
def test_correlation_length_recovers_exponential(xi):
    d = np.arange(1, 9)
    assert correlation_length(0.3 * np.exp(-d / xi)) == pytest.approx(xi)


def test_correlation_length_flat_and_degenerate():
    assert correlation_length(np.ones(5)) == math.inf
    with pytest.raises(ValueError):
        correlation_length([0.1, 0.0])
