"""Gmon qubit circuit model: exact spectrum, perturbative polynomial and fits.

The qubit is a capacitor C in series with a geometric inductance L_g and a
flux-tunable junction (inductance L_j).  In units of the oscillator energy
hbar * w0, w0 = 1 / sqrt(C (L_g + L_j)), the Hamiltonian reads

    H = 4 lam n^2 + (1 + beta) / (8 lam) * [-cos phi_j + (beta / 2) sin^2 phi_j]

with beta = L_g / L_j, lam = Z0 / (R_k / pi), Z0 = sqrt((L_g + L_j) / C) and
phi = phi_j + beta sin phi_j linking the loop phase to the junction phase.
It is diagonalized in the harmonic-oscillator basis of phi, with potential
matrix elements from Gauss-Hermite quadrature.

Units: capacitance in fF, inductance in nH (mutuals M0 in pH), angular
frequencies in rad/s; spectra are returned in Hz.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import constants, special
from scipy.linalg import eigh
from scipy.optimize import least_squares

from .errors import NumericalError

PHI0 = constants.h / (2.0 * constants.e)
R_K = constants.h / constants.e ** 2
FF = 1e-15
NH = 1e-9
PH = 1e-12

MAX_LEVELS = 60
DEFAULT_LEVELS = 20
LAMBDA_RANGE = (0.0, 0.04)
BETA_RANGE = (0.0, 0.25)

# Coefficients of beta^n lam^(m+1), rows n = 0..3, columns m = 0..2.
PRINTED_A = np.array([
    [-0.9989185, -1.01547902, -3.39493789],
    [2.92743183, -1.15831188, 0.0],
    [-4.93953913, 8.17006907, 0.0],
    [4.03181772, 0.0, 0.0],
])
PRINTED_B = np.array([
    [-1.99707501, -3.25782090, -18.0220389],
    [5.81558214, -1.77830584, 0.0],
    [-9.55174679, 22.6985133, 0.0],
    [7.16401532, 0.0, 0.0],
])
SPARSITY = PRINTED_A != 0.0


@dataclass(frozen=True)
class PolynomialCoefficients:
    A: np.ndarray
    B: np.ndarray

    @classmethod
    def printed(cls) -> "PolynomialCoefficients":
        return cls(PRINTED_A.copy(), PRINTED_B.copy())


@dataclass(frozen=True)
class GmonCircuitParams:
    """One qubit and its coupler; defaults are the first qubit of the device."""

    C: float = 86.2                         # fF
    L_j: float = 6.46                       # nH, at zero junction phase and zero flux
    L_g: float = 0.96                       # nH
    g_r: float = 2 * math.pi * 112.0e6      # rad/s
    omega_r: float = 2 * math.pi * 6.8e9    # rad/s
    M0_left: float = 43.6                   # pH
    M0_right: float = 40.2                  # pH
    beta_C0: float = 0.664
    omega_C0: float = 2 * math.pi * 14.6e9  # rad/s
    two_photon_factor: float = 0.959
    dac_to_flux: float = 2.04               # flux quanta per full-scale unit
    flux_offset: float = 0.0                # flux quanta

    def __post_init__(self):
        if not (self.C > 0 and self.L_j > 0 and self.L_g > 0):
            raise ValueError("C, L_j and L_g must be positive")
        if not 0.0 < self.beta_C0 < 1.0:
            raise ValueError("beta_C0 must lie in (0, 1)")
        if not 0.9 < self.two_photon_factor <= 1.0:
            raise ValueError("two_photon_factor must lie in (0.9, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Spectrum:
    f10: float
    f21: float


def junction_phase(phi, beta: float, tol: float = 1e-12):
    """Junction phase phi_j solving phi = phi_j + beta sin(phi_j).

    Bessel series phi + 2 sum_n (-1)^n J_n(n beta)/n sin(n phi), summed until
    the term bound drops below ``tol``.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"series diverges for beta = {beta}; need 0 <= beta < 1")
    phi = np.asarray(phi, dtype=float)
    out = phi.copy()
    if beta == 0.0:
        return out if out.ndim else float(out)
    n = 1
    while True:
        c = 2.0 * (-1) ** n * special.jv(n, n * beta) / n
        out = out + c * np.sin(n * phi)
        if abs(c) < tol:
            break
        n += 1
        if n > 10000:
            raise NumericalError("junction phase series did not converge")
    return out if out.ndim else float(out)


def _oscillator_functions(x: np.ndarray, n_levels: int) -> np.ndarray:
    """Hermite functions times e^{x^2/2} at points x, shape (n_levels, len(x))."""
    out = np.empty((n_levels, len(x)))
    out[0] = math.pi ** -0.25
    if n_levels > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n_levels - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


_QUAD_CACHE: dict = {}


def _quadrature(n_levels: int):
    if n_levels not in _QUAD_CACHE:
        n_points = max(4 * n_levels, 120)
        x, w = special.roots_hermite(n_points)
        _QUAD_CACHE[n_levels] = (x, w, _oscillator_functions(x, n_levels))
    return _QUAD_CACHE[n_levels]


def dimensionless_levels(beta: float, lam: float, n_levels: int = DEFAULT_LEVELS,
                         k: int = 3) -> np.ndarray:
    """Lowest ``k`` eigenvalues of H / (hbar w0)."""
    if not 2 <= n_levels <= MAX_LEVELS:
        raise ValueError(f"oscillator truncation must lie in 2..{MAX_LEVELS}")
    if lam <= 0:
        raise ValueError("lam must be positive")
    x, w, psi = _quadrature(n_levels)
    phi = 2.0 * math.sqrt(lam) * math.sqrt(2.0) * x   # phi = phi_zpf (a + a^dag)
    pj = junction_phase(phi, beta)
    ej = (1.0 + beta) / (8.0 * lam)
    # subtract the harmonic part analytically-exact: V - x^2/2 is small and smooth
    pot = ej * (-np.cos(pj) + 0.5 * beta * np.sin(pj) ** 2 + 1.0) - 0.5 * x ** 2
    V = (psi * (w * pot)) @ psi.T
    n = np.arange(n_levels)
    H = V + np.diag(n + 0.5)
    return eigh(H, eigvals_only=True, subset_by_index=[0, k - 1])


def dimensionless_transitions(beta: float, lam: float, n_levels: int = DEFAULT_LEVELS):
    """(w10 / w0, w21 / w0) from exact diagonalization."""
    e = dimensionless_levels(beta, lam, n_levels)
    return e[1] - e[0], e[2] - e[1]


def circuit_constants(C: float, L_j: float, L_g: float) -> tuple[float, float, float]:
    """(w0 [rad/s], beta, lam) for C in fF and inductances in nH."""
    L = (L_g + L_j) * NH
    c = C * FF
    w0 = 1.0 / math.sqrt(c * L)
    lam = math.sqrt(L / c) / (R_K / math.pi)
    return w0, L_g / L_j, lam


def perturbative_spectrum(w0, beta, lam, coeffs: PolynomialCoefficients | None = None):
    """(w10, w21, extrapolated) from the polynomial expansion in beta and lam."""
    coeffs = coeffs or PolynomialCoefficients.printed()
    beta = np.asarray(beta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    b_pow = np.stack([beta ** n for n in range(4)])
    l_pow = np.stack([lam ** (m + 1) for m in range(3)])
    corr_a = np.einsum("nm,n...,m...->...", coeffs.A, b_pow, l_pow)
    corr_b = np.einsum("nm,n...,m...->...", coeffs.B, b_pow, l_pow)
    extrapolated = bool(np.any((lam < LAMBDA_RANGE[0]) | (lam > LAMBDA_RANGE[1])
                               | (beta < BETA_RANGE[0]) | (beta > BETA_RANGE[1])))
    return w0 * (1.0 + corr_a), w0 * (1.0 + corr_b), extrapolated


def dispersive_shifts(w10: float, w21: float, g: float, w_mode: float,
                      two_photon: float = 1.0) -> tuple[float, float]:
    """(dw10, dw21) from a linear mode at ``w_mode`` coupled with strength ``g``.

    The two-photon (1-2) coupling carries the anharmonic correction
    (1 + eta / w10), optionally scaled by ``two_photon``.
    """
    eta = w21 - w10
    d = w10 - w_mode
    dw10 = 0.5 * (abs(d) - math.sqrt(4.0 * g * g + d * d))
    g2 = 4.0 * g * g * (1.0 + eta / w10) * two_photon
    dw20 = 0.5 * (abs(d + eta) - math.sqrt(g2 + (d + eta) ** 2))
    return dw10, dw20 - dw10


def coupler_state(params: GmonCircuitParams, flux_c: float) -> tuple[float, float]:
    """(beta_c, coupler mode frequency) at coupler flux ``flux_c`` (flux quanta)."""
    phi_c = junction_phase(2.0 * math.pi * flux_c, params.beta_C0)
    beta_c = params.beta_C0 * math.cos(phi_c)
    return beta_c, params.omega_C0 * math.sqrt(1.0 + beta_c)


def squid_inductance(L_j0: float, flux_q: float) -> float:
    """Symmetric DC-SQUID: L_j grows as 1 / |cos(pi flux)|."""
    c = abs(math.cos(math.pi * flux_q))
    if c < 1e-9:
        raise ValueError("junction critical current vanishes at half a flux quantum")
    return L_j0 / c


def circuit_spectrum(params: GmonCircuitParams, flux_q: float = 0.0, flux_c: float = 0.0,
                     n_levels: int = DEFAULT_LEVELS, side: str = "left",
                     include_shifts: bool = True) -> Spectrum:
    """Qubit transitions (Hz) at qubit and coupler flux biases in flux quanta.

    ``flux_offset`` is added to the qubit flux.  The coupler loads the
    geometric inductance, and both the readout resonator and the coupler
    mode push the levels dispersively.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    M0 = (params.M0_left if side == "left" else params.M0_right) * PH / NH
    L_j = squid_inductance(params.L_j, flux_q + params.flux_offset)
    beta_c, w_c = coupler_state(params, flux_c)
    L_g = params.L_g - M0 * beta_c / (1.0 + beta_c)
    if L_g <= 0:
        raise ValueError("coupler loading drives the geometric inductance negative")
    w0, beta, lam = circuit_constants(params.C, L_j, L_g)
    if beta >= 1.0:
        raise ValueError("L_g / L_j must stay below 1")
    r10, r21 = dimensionless_transitions(beta, lam, n_levels)
    w10, w21 = w0 * r10, w0 * r21
    if include_shifts:
        d10, d21 = dispersive_shifts(w10, w21, params.g_r, params.omega_r)
        g_c = 0.5 * math.sqrt(w10 * w_c) * math.sqrt(M0 / ((L_g + L_j) * (1.0 + beta_c)))
        c10, c21 = dispersive_shifts(w10, w21, g_c, w_c, params.two_photon_factor)
        w10, w21 = w10 + d10 + c10, w21 + d21 + c21
    return Spectrum(w10 / (2 * math.pi), w21 / (2 * math.pi))


def flux_from_dac(amplitude, dac_to_flux: float):
    return np.asarray(amplitude, dtype=float) * dac_to_flux


# ---------------------------------------------------------------------------
# Polynomial fit
# ---------------------------------------------------------------------------

@dataclass
class GridSpec:
    n_beta: int = 100
    n_lambda: int = 100
    beta_range: tuple = BETA_RANGE
    lambda_range: tuple = LAMBDA_RANGE
    n_levels: int = DEFAULT_LEVELS


@dataclass
class PolynomialFit:
    coeffs: PolynomialCoefficients
    max_residual: tuple            # (w10, w21) in units of w0
    rms_residual: tuple


def exact_grid(spec: GridSpec):
    """(beta, lam, w10/w0, w21/w0) arrays on the grid; lam = 0 is the harmonic limit."""
    betas = np.linspace(*spec.beta_range, spec.n_beta)
    lams = np.linspace(*spec.lambda_range, spec.n_lambda)
    B, L = np.meshgrid(betas, lams, indexing="ij")
    r10 = np.ones_like(B)
    r21 = np.ones_like(B)
    for idx in np.ndindex(B.shape):
        if L[idx] > 0:
            r10[idx], r21[idx] = dimensionless_transitions(B[idx], L[idx], spec.n_levels)
    return B, L, r10, r21


def _design(beta, lam, mask=SPARSITY):
    cols = [(n, m) for n in range(mask.shape[0]) for m in range(mask.shape[1]) if mask[n, m]]
    X = np.stack([beta ** n * lam ** (m + 1) for n, m in cols], axis=-1)
    return cols, X


def fit_polynomial_coefficients(spec: GridSpec | None = None) -> PolynomialFit:
    """Least-squares fit of exact transitions to the printed monomial set."""
    spec = spec or GridSpec()
    B, L, r10, r21 = exact_grid(spec)
    keep = L.reshape(-1) > 0
    beta, lam = B.reshape(-1)[keep], L.reshape(-1)[keep]
    cols, X = _design(beta, lam)
    if X.shape[0] < X.shape[1] or np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("grid too small: polynomial fit is rank deficient")
    out = []
    res_max, res_rms = [], []
    for r in (r10, r21):
        y = r.reshape(-1)[keep] - 1.0
        c, *_ = np.linalg.lstsq(X, y, rcond=None)
        res = X @ c - y
        res_max.append(float(np.max(np.abs(res))))
        res_rms.append(float(np.sqrt(np.mean(res ** 2))))
        M = np.zeros(SPARSITY.shape)
        for (n, m), v in zip(cols, c):
            M[n, m] = v
        out.append(M)
    return PolynomialFit(PolynomialCoefficients(*out), tuple(res_max), tuple(res_rms))


# ---------------------------------------------------------------------------
# Spectrum fit
# ---------------------------------------------------------------------------

@dataclass
class SpectrumFit:
    params: GmonCircuitParams
    residuals: np.ndarray          # Hz, (f10 residuals, f21 residuals)
    rms: float
    nfev: int


DEFAULT_FIT_FIELDS = ("C", "L_j", "L_g", "g_r")


def model_spectra(params: GmonCircuitParams, flux_q, flux_c, n_levels=DEFAULT_LEVELS):
    out = np.array([[s.f10, s.f21] for s in (
        circuit_spectrum(params, fq, fc, n_levels) for fq, fc in zip(flux_q, flux_c))])
    return out[:, 0], out[:, 1]


def fit_spectrum(flux_q, flux_c, f10, f21, initial: GmonCircuitParams | None = None,
                 fit_fields=DEFAULT_FIT_FIELDS, max_nfev: int = 200,
                 n_levels: int = DEFAULT_LEVELS) -> SpectrumFit:
    """Nonlinear least squares of measured (f10, f21) against the circuit model.

    Parameters in ``fit_fields`` are varied in log space starting from
    ``initial`` (design values by default); the rest stay fixed.
    """
    initial = initial or GmonCircuitParams(C=85.0, L_j=7.0, L_g=0.9, g_r=2 * math.pi * 110e6)
    flux_q, flux_c, f10, f21 = (np.asarray(a, dtype=float) for a in (flux_q, flux_c, f10, f21))
    names = [f.name for f in fields(GmonCircuitParams)]
    for name in fit_fields:
        if name not in names:
            raise ValueError(f"unknown parameter {name!r}")
    if 2 * len(flux_q) < 2 * len(fit_fields):
        raise ValueError("need at least twice as many data values as fitted parameters")
    x0 = np.log([getattr(initial, n) for n in fit_fields])
    data = np.concatenate([f10, f21])
    scale = 1e6

    def build(x):
        return replace(initial, **{n: float(v) for n, v in zip(fit_fields, np.exp(x))})

    def resid(x):
        try:
            m10, m21 = model_spectra(build(x), flux_q, flux_c, n_levels)
        except ValueError:
            return np.full(data.shape, 1e6)
        return (np.concatenate([m10, m21]) - data) / scale

    sol = least_squares(resid, x0, method="trf", x_scale=1.0, diff_step=1e-7,
                        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev)
    if sol.status <= 0:
        raise NumericalError(f"spectrum fit did not converge: {sol.message}")
    r = sol.fun * scale
    return SpectrumFit(build(sol.x), r, float(np.sqrt(np.mean(r ** 2))), int(sol.nfev))
