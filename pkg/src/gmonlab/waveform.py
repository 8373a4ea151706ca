"""Control-line calibration: pulse distortion, predistortion, crosstalk and timing.

Distortion model: H(w) = 1 + sum_i eps_i * i w tau_i / (1 + i w tau_i), i.e.
a step acquires an overshoot eps_i e^{-t / tau_i} per term.  Waveforms are
real, uniformly sampled arrays with time step ``dt`` in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len
from scipy.optimize import least_squares
from scipy.special import erf

from .errors import NumericalError

PAD_FACTOR = 4
TAIL_DECAYS = 40          # pad at least this many of the longest time constants


@dataclass(frozen=True)
class TransferFunction:
    terms: tuple = ()            # ((eps, tau_seconds), ...)

    def __post_init__(self):
        terms = tuple((float(e), float(t)) for e, t in self.terms)
        if len(terms) > 2:
            raise ValueError("at most two distortion terms")
        for eps, tau in terms:
            if not tau > 0:
                raise ValueError("time constants must be positive")
            if not abs(eps) < 0.1:
                raise ValueError("distortion amplitudes must satisfy |eps| < 0.1")
        object.__setattr__(self, "terms", terms)

    def response(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        h = np.ones(omega.shape, dtype=complex)
        for eps, tau in self.terms:
            x = 1j * omega * tau
            h += eps * x / (1.0 + x)
        return h

    def step_response(self, t) -> np.ndarray:
        """Analytic response to a unit step at t = 0 (t >= 0)."""
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for eps, tau in self.terms:
            out += eps * np.exp(-t / tau)
        return np.where(t >= 0, out, 0.0)


def _step_kernel_spectrum(tf: TransferFunction, n_fft: int, dt: float,
                          shift: float = 0.0) -> np.ndarray:
    """DFT of the differenced step response 1 + sum eps e^{-t/tau}, sampled.

    With ``shift`` the response is read ``shift * dt`` after each sample.
    """
    m = (np.arange(n_fft) + shift) * dt
    step = np.ones(n_fft)
    for eps, tau in tf.terms:
        step += eps * np.exp(-m / tau)
    return np.fft.rfft(np.diff(step, prepend=0.0))


def _filter(signal, dt: float, tf: TransferFunction, inverse: bool, min_gain: float = 1e-6,
            shift: float = 0.0):
    """Filter a held waveform through the line (or its inverse).

    The waveform is treated as a sequence of steps, one per sample
    difference, each of which the line turns into 1 + sum eps e^{-t/tau}.
    The differences are zero padded to PAD_FACTOR times their length, and to
    at least TAIL_DECAYS of the longest time constant past the end, so the
    exponential tails do not wrap around the circular convolution.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("signal must be a 1-D array with at least two samples")
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = len(x)
    d = np.diff(x, prepend=x[0])
    tau_max = max((tau for _, tau in tf.terms), default=0.0)
    n_fft = next_fast_len(max(PAD_FACTOR * n, n + int(math.ceil(TAIL_DECAYS * tau_max / dt))),
                          real=True)
    k = _step_kernel_spectrum(tf, n_fft, dt, shift)
    if inverse:
        if np.min(np.abs(k)) < min_gain:
            raise ValueError("transfer function nearly vanishes; cannot invert")
        k = 1.0 / k
    y = np.fft.irfft(np.fft.rfft(d, n_fft) * k, n_fft)[:n]
    return x[0] + np.cumsum(y)


def apply_transfer(tf: TransferFunction, signal, dt: float) -> np.ndarray:
    """Waveform as it arrives after the distorting line."""
    if not tf.terms:
        return np.array(signal, dtype=float)
    return _filter(signal, dt, tf, inverse=False)


def predistort(tf: TransferFunction, desired, dt: float, min_gain: float = 1e-6) -> np.ndarray:
    """Waveform to send so that ``apply_transfer`` delivers ``desired``."""
    if not tf.terms:
        return np.array(desired, dtype=float)
    return _filter(desired, dt, tf, inverse=True, min_gain=min_gain)


def predict_phase_response(tf: TransferFunction, pulse, dt: float, flux_to_freq) -> np.ndarray:
    """Accumulated qubit phase 2 pi int (f(flux(t)) - f(0)) dt of the distorted pulse.

    The held pulse jumps at every sample and the line output relaxes
    smoothly in between, so each interval is integrated by Simpson's rule
    on the values just after t_k, at the midpoint and just before t_{k+1}.
    ``flux_to_freq`` maps flux to qubit frequency in Hz and must accept arrays.
    """
    x = np.asarray(pulse, dtype=float)
    if tf.terms:
        start = _filter(x, dt, tf, inverse=False)
        mid = _filter(x, dt, tf, inverse=False, shift=0.5)
        end = _filter(x, dt, tf, inverse=False, shift=1.0)
    else:
        start = mid = end = x
    f0 = float(flux_to_freq(np.array(0.0)))

    def detuning(flux):
        return np.asarray(flux_to_freq(flux), dtype=float) - f0

    steps = (detuning(start[:-1]) + 4.0 * detuning(mid[:-1]) + detuning(end[:-1])) * (dt / 6.0)
    return 2.0 * math.pi * np.concatenate([[0.0], np.cumsum(steps)])


@dataclass
class TransferFit:
    tf: TransferFunction
    residual_rms: float
    nfev: int


def fit_transfer_function(phase, pulse, dt: float, flux_to_freq, n_terms: int = 1,
                          tau_guesses=None, max_nfev: int = 2000) -> TransferFit:
    """Least-squares (eps, tau) fit of a measured phase trace.

    Several starting time constants are tried and the best fit kept; with
    ``n_terms = 2`` the guesses are taken pairwise.
    """
    if n_terms not in (1, 2):
        raise ValueError("n_terms must be 1 or 2")
    phase = np.asarray(phase, dtype=float)
    span = dt * len(phase)
    if tau_guesses is None:
        tau_guesses = np.geomspace(4 * dt, span / 2, 6)
    starts = ([(t,) for t in tau_guesses] if n_terms == 1 else
              [(a, b) for i, a in enumerate(tau_guesses) for b in tau_guesses[i + 1:]])
    scale = max(float(np.max(np.abs(phase))), 1e-12)

    def unpack(x):
        return TransferFunction(tuple((x[2 * k], math.exp(x[2 * k + 1])) for k in range(n_terms)))

    def resid(x):
        try:
            tf = unpack(x)
        except ValueError:
            return np.full(phase.shape, 1e3)
        return (predict_phase_response(tf, pulse, dt, flux_to_freq) - phase) / scale

    best = None
    lo = np.tile([-0.0999, math.log(dt / 10)], n_terms)
    hi = np.tile([0.0999, math.log(span * 10)], n_terms)
    for taus in starts:
        x0 = np.ravel([(0.0, math.log(t)) for t in taus])
        sol = least_squares(resid, x0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14,
                            gtol=1e-14, max_nfev=max_nfev)
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None or best.status <= 0:
        raise NumericalError("transfer-function fit did not converge")
    terms = sorted(unpack(best.x).terms, key=lambda et: et[1])
    rms = float(np.sqrt(np.mean(best.fun ** 2)) * scale)
    return TransferFit(TransferFunction(tuple(terms)), rms, int(best.nfev))


# ---------------------------------------------------------------------------
# Crosstalk
# ---------------------------------------------------------------------------

@dataclass
class CrosstalkMatrix:
    """Fluxes seen by each device = matrix @ control fluxes; unit diagonal."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("crosstalk matrix must be square")
        if not np.allclose(np.diag(m), 1.0):
            raise ValueError("crosstalk matrix must have a unit diagonal")
        off = np.abs(m).sum(axis=1) - np.abs(np.diag(m))
        if np.any(off >= np.abs(np.diag(m))):
            raise ValueError("crosstalk matrix must be strictly diagonally dominant")
        self.matrix = m

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0]

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


def compensate_crosstalk(X: CrosstalkMatrix, desired) -> np.ndarray:
    """Control fluxes c with X c = desired (a linear solve, not a product)."""
    m = X.matrix if isinstance(X, CrosstalkMatrix) else np.asarray(X, dtype=float)
    try:
        return np.linalg.solve(m, np.asarray(desired, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise ValueError("crosstalk matrix is singular") from exc


def random_crosstalk(n: int, scale: float, seed: int = 0) -> CrosstalkMatrix:
    """Unit-diagonal matrix with off-diagonals uniform in [-scale, scale]."""
    rng = np.random.default_rng(seed)
    m = rng.uniform(-scale, scale, (n, n))
    np.fill_diagonal(m, 1.0)
    return CrosstalkMatrix(m)


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

@dataclass
class TimingFit:
    offset: float
    t1: float
    t2: float
    width: float
    depth: float
    baseline: float


def dip_model(t, baseline, depth, t1, t2, width):
    t = np.asarray(t, dtype=float)
    return baseline - depth * 0.5 * (erf((t - t1) / width) - erf((t - t2) / width))


def fit_timing_dip(delays, prob, min_snr: float = 5.0) -> TimingFit:
    """Fit a dip bounded by two error-function edges with a shared width."""
    t = np.asarray(delays, dtype=float)
    p = np.asarray(prob, dtype=float)
    if len(t) != len(p) or len(t) < 6:
        raise ValueError("need matching delay and probability arrays of length >= 6")
    order = np.argsort(t)
    t, p = t[order], p[order]
    noise = 1.4826 * np.median(np.abs(np.diff(p) - np.median(np.diff(p)))) / math.sqrt(2.0)
    baseline = float(np.median(p))
    depth = baseline - float(np.min(p))
    if depth <= min_snr * max(noise, 1e-12) or depth <= 0:
        raise ValueError("no dip detected in the timing response")
    below = np.nonzero(p < baseline - depth / 2)[0]
    t1, t2 = t[below[0]], t[below[-1]]
    step = float(np.median(np.diff(t)))
    if t2 <= t1:
        t2 = t1 + step
    width0 = max(step, (t2 - t1) / 10)
    x0 = [baseline, depth, t1, t2, width0]
    sol = least_squares(lambda x: dip_model(t, *x) - p, x0,
                        x_scale=[depth, depth, step, step, step])
    if sol.status <= 0:
        raise NumericalError("timing fit did not converge")
    b, a, s1, s2, w = sol.x
    s1, s2 = sorted((s1, s2))
    return TimingFit(0.5 * (s1 + s2), s1, s2, abs(w), a, b)


def fit_timing_offset(delays, prob) -> float:
    """Delay of the dip centre, (t1 + t2) / 2."""
    return fit_timing_dip(delays, prob).offset
