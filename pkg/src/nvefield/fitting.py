"""Peak observables from ODMR spectra and least-squares susceptibility fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, signal, stats

from .errors import NumericalError, PeaksUnresolvedError
from .spectrum import (
    SUSCEPTIBILITY_OMEGA,
    BroadeningParams,
    SampleParams,
    Spectrum,
    SpectrumModel,
)

DEFAULT_DETUNINGS = np.arange(0.0, 701.0, 50.0)
CONDITION_LIMIT = 1e6
TWO_SIGMA_2D = float(-2.0 * math.log(1.0 - (stats.norm.cdf(2) - stats.norm.cdf(-2))))


@dataclass(frozen=True)
class PeakSummary:
    """Observables of one resonant ODMR trace (MHz) at a drive detuning (GHz)."""

    pi_perp: float
    pi_perp_err: float = 0.0
    gamma_g: float | None = None
    gamma_g_err: float | None = None
    detuning: float = 0.0

    def __post_init__(self):
        if self.pi_perp < 0 or self.pi_perp_err < 0:
            raise ValueError("pi_perp and its error must be non-negative")
        if self.gamma_g is not None and not self.gamma_g > 0:
            raise ValueError("gamma_g must be positive")


@dataclass
class FitResult:
    chi_e_perp: float
    chi_e_par: float
    covariance: np.ndarray
    chi2_reduced: float
    n_obs: int
    systematic_spread: dict | None = None
    chi2: float = 0.0
    degenerate: bool = False
    condition_number: float = 1.0
    nfev: int = 0
    cost_history: list = field(default_factory=list, repr=False)

    @property
    def params(self) -> np.ndarray:
        return np.array([self.chi_e_perp, self.chi_e_par])

    @property
    def stat_err_2sigma(self) -> dict:
        """Fractional two-sigma (marginal) errors per parameter."""
        sd = np.sqrt(np.diag(self.covariance))
        return {"chi_e_perp": float(2 * sd[0] / self.chi_e_perp), "chi_e_par": float(2 * sd[1] / self.chi_e_par)}

    def mahalanobis2(self, point) -> float:
        d = np.asarray(point, dtype=float) - self.params
        return float(d @ np.linalg.solve(self.covariance, d))


@dataclass(frozen=True)
class Ellipse:
    center: np.ndarray
    semi_axes: np.ndarray  # along the eigenvector columns
    axes: np.ndarray  # eigenvectors as columns
    angle: float  # radians, major axis vs. the chi_e_perp direction
    delta_chi2: float
    fractional_2sigma: dict


# ---------------------------------------------------------------------------
# peak extraction


def robust_noise(y) -> float:
    """Gaussian sigma from the median absolute second difference."""
    d2 = np.diff(np.asarray(y, dtype=float), 2)
    return float(1.482602218505602 * np.median(np.abs(d2 - np.median(d2))) / math.sqrt(6.0))


def _parabolic(x, y, i):
    if i <= 0 or i >= len(y) - 1:
        return float(x[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    den = a - 2 * b + c
    off = 0.5 * (a - c) / den if den != 0 else 0.0
    return float(x[i] + off * (x[i + 1] - x[i - 1]) / 2)


def _side_peaks(spec: Spectrum, noise_sigma: float | None):
    y = spec.signal
    w = spec.mw_offset
    span = float(y.max() - y.min())
    sigma = robust_noise(y) if noise_sigma is None else noise_sigma
    floor = max(3.0 * sigma, 1e-9 * span, np.finfo(float).tiny)
    idx, props = signal.find_peaks(y, prominence=floor)
    pos = idx[w[idx] > 0]
    neg = idx[w[idx] < 0]
    if pos.size == 0 or neg.size == 0:
        raise PeaksUnresolvedError(f"need a peak on each side of zero above prominence {floor:.3g}")
    return int(neg[np.argmax(y[neg])]), int(pos[np.argmax(y[pos])])


def peak_positions(spec: Spectrum, noise_sigma: float | None = None):
    """Refined (omega_minus, omega_plus) of the highest peak on each side of zero."""
    i_neg, i_pos = _side_peaks(spec, noise_sigma)
    return _parabolic(spec.mw_offset, spec.signal, i_neg), _parabolic(spec.mw_offset, spec.signal, i_pos)


def extract_peak_splitting(spec: Spectrum, detuning: float = 0.0, noise_sigma: float | None = None) -> PeakSummary:
    """Half the separation of the two positive peaks."""
    lo, hi = peak_positions(spec, noise_sigma)
    return PeakSummary(pi_perp=0.5 * (hi - lo), detuning=detuning)


def peak_uncertainty_mc(spec: Spectrum, noise_sigma: float, trials: int = 200, rng_seed=0,
                        max_unresolved: float = 0.1) -> float:
    """Spread of the re-extracted upper peak position under added Gaussian noise."""
    if trials < 100:
        raise ValueError("trials must be at least 100")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    if noise_sigma == 0:
        return 0.0
    rng = np.random.default_rng(rng_seed)
    hits, bad = [], 0
    for _ in range(trials):
        noisy = Spectrum(spec.mw_offset, spec.signal + rng.normal(0.0, noise_sigma, spec.signal.size))
        try:
            hits.append(peak_positions(noisy, noise_sigma)[1])
        except PeaksUnresolvedError:
            bad += 1
    if bad > max_unresolved * trials:
        raise NumericalError(f"{bad}/{trials} noisy trials had unresolved peaks")
    return float(np.std(hits, ddof=1))


def _lorentz(w, amp, center, fwhm, offset):
    h = 0.5 * fwhm
    return amp * h * h / ((w - center) ** 2 + h * h) + offset


def _fit_side(spec: Spectrum, i_peak: int, side: str):
    w, y = spec.mw_offset, spec.signal
    widths, _, left, right = signal.peak_widths(y, [i_peak], rel_height=0.5)
    step = w[1] - w[0]
    half = max(widths[0] * step, 3 * step)
    lo = max(0, int(i_peak - 1.5 * half / step))
    hi = min(len(w), int(i_peak + 1.5 * half / step) + 1)
    if side == "left":
        hi = min(hi, int(np.searchsorted(w, 0.0)))
    else:
        lo = max(lo, int(np.searchsorted(w, 0.0)))
    ww, yy = w[lo:hi], y[lo:hi]
    base = float(min(yy.min(), 0.0))
    p0 = (y[i_peak] - base, w[i_peak], 2 * half, base)
    try:
        popt, _ = optimize.curve_fit(_lorentz, ww, yy, p0=p0, maxfev=5000)
    except (RuntimeError, optimize.OptimizeWarning, ValueError) as exc:
        raise NumericalError(f"Lorentzian fit of the {side} peak did not converge: {exc}") from exc
    if not np.all(np.isfinite(popt)) or popt[2] == 0:
        raise NumericalError(f"Lorentzian fit of the {side} peak did not converge")
    return abs(float(popt[2]))


def extract_linewidth(spec: Spectrum, detuning: float = 0.0, noise_sigma: float | None = None) -> PeakSummary:
    """Mean Lorentzian FWHM of the two positive peaks; error is their difference."""
    i_neg, i_pos = _side_peaks(spec, noise_sigma)
    left = _fit_side(spec, i_neg, "left")
    right = _fit_side(spec, i_pos, "right")
    lo = _parabolic(spec.mw_offset, spec.signal, i_neg)
    hi = _parabolic(spec.mw_offset, spec.signal, i_pos)
    return PeakSummary(pi_perp=0.5 * (hi - lo), gamma_g=0.5 * (left + right), gamma_g_err=abs(left - right),
                       detuning=detuning)


# ---------------------------------------------------------------------------
# model splittings


class SplittingModel:
    """Pi_perp(detuning; chi_e_perp, chi_e_par) from resonant spectra only."""

    def __init__(self, params: SampleParams | None = None, b: BroadeningParams | None = None,
                 omega=None, base: SpectrumModel | None = None):
        self.base = base or SpectrumModel(params or SampleParams())
        self.b = b or BroadeningParams()
        self.omega = SUSCEPTIBILITY_OMEGA if omega is None else np.asarray(omega, dtype=float)
        # positive half only: resonant spectra are exactly mirror symmetric
        self._half = self.omega[self.omega >= 0]
        self._full = np.concatenate([-self._half[:0:-1], self._half])
        self._cache = {}

    def splitting(self, detuning: float, chi_perp: float, chi_par: float) -> float:
        key = (float(detuning), float(chi_perp), float(chi_par))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = self.base.with_params(chi_e_perp=chi_perp, chi_e_par=chi_par)
        dx = m.resonant_x_distribution(detuning)
        half = m.spectrum_from_x(dx, self._half, self.b.kappa_ih_res, self.b.kappa_h_res)
        y = np.concatenate([half[:0:-1], half])
        try:
            val = extract_peak_splitting(Spectrum(self._full, y), detuning, noise_sigma=0.0).pi_perp
        except PeaksUnresolvedError:
            val = 0.0
        if len(self._cache) > 200000:
            self._cache.clear()
        self._cache[key] = val
        return val

    def __call__(self, detunings, chi_perp: float, chi_par: float) -> np.ndarray:
        return np.array([self.splitting(d, chi_perp, chi_par) for d in np.atleast_1d(detunings)])


def synthesize_splittings(detunings, chi_perp: float, chi_par: float, sigma, rng_seed=None,
                          model: SplittingModel | None = None) -> list[PeakSummary]:
    """Model splittings plus optional Gaussian noise of standard deviation sigma."""
    model = model or SplittingModel()
    det = np.asarray(detunings, dtype=float)
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), det.shape)
    pi = model(det, chi_perp, chi_par)
    if rng_seed is not None:
        pi = pi + np.random.default_rng(rng_seed).normal(0.0, 1.0, det.size) * sig
    return [PeakSummary(max(float(p), 0.0), float(s), detuning=float(d)) for p, s, d in zip(pi, sig, det)]


# ---------------------------------------------------------------------------
# fitting


def _unpack(data):
    det = np.array([d.detuning for d in data], dtype=float)
    obs = np.array([d.pi_perp for d in data], dtype=float)
    err = np.array([d.pi_perp_err for d in data], dtype=float)
    return det, obs, err


def fit_susceptibilities(
    data,
    params: SampleParams | None = None,
    b: BroadeningParams | None = None,
    model: SplittingModel | None = None,
    start_perp=np.linspace(0.8, 2.0, 5),
    start_par=np.linspace(0.3, 1.1, 5),
    max_nfev: int = 60,
) -> FitResult:
    """Least-squares (chi_e_perp, chi_e_par) from splittings with Gaussian errors."""
    data = list(data)
    if len(data) < 3:
        raise ValueError("need at least three observations")
    det, obs, err = _unpack(data)
    if np.any(err <= 0):
        raise ValueError("every observation needs a positive error")
    model = model or SplittingModel(params, b)
    history = []

    def resid(p):
        r = (obs - model(det, p[0], p[1])) / err
        history.append(float(r @ r))
        return r

    starts = [(a, c) for a in start_perp for c in start_par]
    costs = [float(np.sum(resid(np.array(s)) ** 2)) for s in starts]
    x0 = np.array(starts[int(np.argmin(costs))])
    history.clear()
    res = optimize.least_squares(resid, x0, method="trf", bounds=([1e-3, 1e-3], [np.inf, np.inf]),
                                 diff_step=1e-3, x_scale="jac", max_nfev=max_nfev)
    if res.status <= 0 and res.status != 0:
        raise NumericalError(f"least squares failed: {res.message}")
    if res.status == 0:
        raise NumericalError(f"least squares did not converge within {max_nfev} evaluations")
    J = res.jac
    jtj = J.T @ J
    cond = float(np.linalg.cond(jtj))
    degenerate = not np.isfinite(cond) or cond > CONDITION_LIMIT
    if degenerate:
        warnings.warn(f"fit is degenerate along one direction (condition number {cond:.3g})", stacklevel=2)
        cov = np.linalg.pinv(jtj)
    else:
        cov = np.linalg.inv(jtj)
    cov = 0.5 * (cov + cov.T)
    chi2 = float(2 * res.cost)
    dof = max(len(data) - 2, 1)
    return FitResult(float(res.x[0]), float(res.x[1]), cov, chi2 / dof, len(data), None, chi2,
                     degenerate, cond, int(res.nfev), history)


def confidence_region(fit: FitResult, delta_chi2: float = TWO_SIGMA_2D) -> Ellipse:
    """Linearized joint region {p : (p - p_hat)^T C^-1 (p - p_hat) <= delta_chi2}."""
    vals, vecs = np.linalg.eigh(fit.covariance)
    if np.any(vals <= 0):
        raise NumericalError("covariance is singular; the confidence region is unbounded")
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    angle = float(math.atan2(vecs[1, 0], vecs[0, 0]))
    return Ellipse(fit.params, np.sqrt(delta_chi2 * vals), vecs, angle, delta_chi2, fit.stat_err_2sigma)


def systematic_scan(data, grid, params: SampleParams | None = None, b: BroadeningParams | None = None,
                    central: FitResult | None = None, **fit_kwargs):
    """Refit under alternative (rho_c ppm, kappa_ih MHz) assumptions.

    Returns (spread, fits, failures): spread holds the maximum fractional
    deviation of each parameter from the central fit.
    """
    params = params or SampleParams()
    b = b or BroadeningParams()
    if central is None:
        central = fit_susceptibilities(data, params, b, **fit_kwargs)
    fits, failures = [], []
    for rho, kih in grid:
        try:
            p = replace(params, rho_c=float(rho))
            bb = replace(b, kappa_ih_res=float(kih))
            fits.append(((rho, kih), fit_susceptibilities(data, p, bb, **fit_kwargs)))
        except (NumericalError, ValueError) as exc:
            failures.append(((rho, kih), str(exc)))
    spread = {"chi_e_perp": 0.0, "chi_e_par": 0.0}
    for _, f in fits:
        spread["chi_e_perp"] = max(spread["chi_e_perp"], abs(f.chi_e_perp / central.chi_e_perp - 1))
        spread["chi_e_par"] = max(spread["chi_e_par"], abs(f.chi_e_par / central.chi_e_par - 1))
    central.systematic_spread = spread
    return spread, fits, failures


# ---------------------------------------------------------------------------
# closed-form estimator


def analytic_susceptibilities(elbow_detuning: float, slope: float, e0_freq: float, chi_g_perp: float = 17.0):
    """(chi_e_perp, chi_e_par) in MHz/(V/cm) from the elbow and asymptotic slope of Pi_perp.

    elbow_detuning in GHz, slope dimensionless (MHz of splitting per MHz of
    detuning), e0_freq = chi_g_perp * E0 in MHz, chi_g_perp in Hz/(V/cm).
    """
    ratio = elbow_detuning * 1e3 / e0_freq  # dimensionless
    s = slope * ratio
    if 1.0 < s <= 1.0 + 1e-12:
        s = 1.0  # rounding at the right-angle limit
    if not 0 < s <= 1:
        raise ValueError(f"sin(alpha) = {s:.4g} lies outside (0, 1]")
    cos_a = math.sqrt(max(1.0 - s * s, 0.0))
    amplitude = ratio * chi_g_perp * 1e-6  # MHz/(V/cm)
    return s * amplitude, cos_a * amplitude


@dataclass(frozen=True)
class TwoSegmentFit:
    elbow: float  # GHz
    slope_low: float  # MHz/GHz
    slope_high: float  # MHz/GHz
    intercept: float  # MHz at zero detuning


def two_segment_fit(detunings, pi_perp) -> TwoSegmentFit:
    """Continuous piecewise-linear fit with one free breakpoint (least squares)."""
    x = np.asarray(detunings, dtype=float)
    y = np.asarray(pi_perp, dtype=float)

    def solve(k):
        A = np.column_stack([np.ones_like(x), x, np.maximum(x - k, 0.0)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(np.sum((A @ coef - y) ** 2)), coef

    xs = np.sort(x)
    grid = np.linspace(xs[1], xs[-2], 600)
    k0 = grid[int(np.argmin([solve(k)[0] for k in grid]))]
    step = grid[1] - grid[0]
    r = optimize.minimize_scalar(lambda k: solve(k)[0], bounds=(k0 - step, k0 + step), method="bounded")
    k = float(r.x) if r.fun <= solve(k0)[0] else float(k0)
    c = solve(k)[1]
    return TwoSegmentFit(k, float(c[1]), float(c[1] + c[2]), float(c[0]))
