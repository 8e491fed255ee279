"""Shot-noise-limited DC electric-field sensitivity of resonant ensemble electrometry.

Linewidths are in MHz, susceptibilities in Hz/(V/cm) unless a name says
otherwise, densities in ppm of lattice sites, sensitivities in V/cm/sqrt(Hz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import optimize, special

OFF_RESONANT_GROUPS = 5.0 / 3.0  # three tilted groups in a (111)-cut sample
TETRA_PAR = -1.0 / 3.0  # cos of the angle between two NV axes
TETRA_PERP = 2.0 * math.sqrt(2.0) / 3.0


@dataclass(frozen=True)
class ProtocolParams:
    p_pi: float = 0.77
    p_f: float = 0.39
    c0: float = 0.21
    chi_eff: float = 6.97  # Hz/(V/cm)
    chi_e_par: float = 0.7  # MHz/(V/cm)
    kappa0_g: float = 0.2  # MHz
    kappaE_g: float = 3.7  # MHz at the reference density
    kappa0_e: float = 10.0  # GHz
    kappaE_e: float = 1e6  # MHz at the reference density
    kappa_ref: float = 2e6  # MHz
    r0_reference: float | None = None  # counts/s; None: back-computed from the reference count rate
    reference_count_rate: float = 2.4e15  # counts/s at the reference density and volume
    reference_density: float = 8.0  # ppm
    illumination_volume: float = 0.1  # mm^3
    reference_volume: float = 0.1  # mm^3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not v > 0:
                raise ValueError(f"{f.name} must be positive")
        if not self.c0 < 1:
            raise ValueError("c0 must lie in (0, 1)")
        if not (self.p_pi < 1 and self.p_f < 1):
            raise ValueError("lineshape factors must lie in (0, 1)")

    @property
    def r_reference(self) -> float:
        return resonant_enhancement(self.reference_density, self)

    @property
    def r0(self) -> float:
        """Off-resonant single-group rate at the reference density and volume."""
        if self.r0_reference is not None:
            return self.r0_reference
        return self.reference_count_rate / (self.r_reference + OFF_RESONANT_GROUPS)


@dataclass(frozen=True)
class ConventionalProtocol:
    """Off-resonant ensemble readout of the ground-state Stark shift."""

    p: float = 0.77
    chi: float = 17.0  # Hz/(V/cm)
    contrast: float = 0.02
    count_rate_per_ppm: float = 5e14  # counts/s at 1 ppm in the reference volume


@dataclass(frozen=True)
class SensitivityBreakdown:
    rho_nv_ppm: float
    eta_pi: float
    eta_f: float
    eta_total: float
    gamma_g: float  # MHz
    gamma_e: float  # MHz
    r_enh: float
    c_r: float
    count_rate: float

    def as_row(self):
        return [self.rho_nv_ppm, self.eta_pi, self.eta_f, self.eta_total, self.gamma_g, self.gamma_e,
                self.r_enh, self.c_r, self.count_rate]


ROW_HEADER = ["rho_nv_ppm", "eta_pi", "eta_f", "eta_total", "gamma_g_mhz", "gamma_e_mhz", "r", "c_r", "count_rate"]


def linewidth_model(rho_nv_ppm, kappa0, kappaE, reference_density=8.0):
    """Intrinsic width plus a field-induced width growing as density^(2/3)."""
    rho = np.asarray(rho_nv_ppm, dtype=float)
    out = kappa0 + kappaE * (rho / reference_density) ** (2.0 / 3.0)
    return out if out.ndim else float(out)


def optical_linewidth(rho_nv_ppm, params: ProtocolParams = ProtocolParams()):
    """Ensemble optical linewidth Gamma_e in MHz."""
    return linewidth_model(rho_nv_ppm, params.kappa0_e * 1e3, params.kappaE_e, params.reference_density)


def resonant_enhancement(rho_nv_ppm, params: ProtocolParams = ProtocolParams()):
    return params.kappa_ref / optical_linewidth(rho_nv_ppm, params)


def resonant_fraction(r):
    return r / (r + OFF_RESONANT_GROUPS)


def count_rate_and_contrast(rho_nv_ppm, params: ProtocolParams = ProtocolParams()):
    """(total count rate, resonant photon fraction C_r)."""
    r = resonant_enhancement(rho_nv_ppm, params)
    r0 = params.r0 * (np.asarray(rho_nv_ppm) / params.reference_density) * (
        params.illumination_volume / params.reference_volume
    )
    rate = r0 * (r + OFF_RESONANT_GROUPS)
    return (rate if np.ndim(rate) else float(rate)), resonant_fraction(r)


def sensitivity_breakdown(rho_nv_ppm: float, params: ProtocolParams = ProtocolParams()) -> SensitivityBreakdown:
    rho = float(rho_nv_ppm)
    g_g = linewidth_model(rho, params.kappa0_g, params.kappaE_g, params.reference_density)
    g_e = optical_linewidth(rho, params)
    r = params.kappa_ref / g_e
    rate, c_r = count_rate_and_contrast(rho, params)
    if not rate > 0:
        raise ValueError("count rate must be positive")
    sq = math.sqrt(rate)
    eta_pi = params.p_pi * g_g * 1e6 / (params.chi_eff * params.c0 * c_r * sq)
    eta_f = params.p_f * g_e * 1e6 / (params.chi_e_par * 1e6 * c_r * sq)
    eta = 1.0 / (1.0 / eta_pi + 1.0 / eta_f)
    return SensitivityBreakdown(rho, eta_pi, eta_f, eta, g_g, g_e, r, c_r, rate)


def conventional_sensitivity(rho_nv_ppm: float, params: ProtocolParams = ProtocolParams(),
                             conv: ConventionalProtocol = ConventionalProtocol()) -> float:
    """Off-resonant ground-state protocol: no resonant-fraction factor."""
    g_g = linewidth_model(rho_nv_ppm, params.kappa0_g, params.kappaE_g, params.reference_density)
    rate = conv.count_rate_per_ppm * rho_nv_ppm * params.illumination_volume / params.reference_volume
    return conv.p * g_g * 1e6 / (conv.chi * conv.contrast * math.sqrt(rate))


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class DensitySweep:
    rows: list
    conventional: np.ndarray
    slope_low: float
    slope_high: float
    slope_conventional_high: float

    @property
    def densities(self) -> np.ndarray:
        return np.array([r.rho_nv_ppm for r in self.rows])

    @property
    def eta(self) -> np.ndarray:
        return np.array([r.eta_total for r in self.rows])


def density_sweep(rho_min: float, rho_max: float, n_points: int, params: ProtocolParams = ProtocolParams(),
                  conv: ConventionalProtocol = ConventionalProtocol()) -> DensitySweep:
    """Log-spaced sweep with OLS log-log slopes over the lowest and highest decade."""
    if not 0 < rho_min < rho_max or n_points < 4:
        raise ValueError("need 0 < rho_min < rho_max and at least four points")
    rho = np.geomspace(rho_min, rho_max, n_points)
    rows = [sensitivity_breakdown(x, params) for x in rho]
    eta = np.array([r.eta_total for r in rows])
    cv = np.array([conventional_sensitivity(x, params, conv) for x in rho])
    lo = rho <= rho_min * 10 * (1 + 1e-12)
    hi = rho >= rho_max / 10 * (1 - 1e-12)
    return DensitySweep(rows, cv, loglog_slope(rho[lo], eta[lo]), loglog_slope(rho[hi], eta[hi]),
                        loglog_slope(rho[hi], cv[hi]))


def optimal_density(params: ProtocolParams = ProtocolParams(), bounds=(1e-3, 100.0), channel: str = "total"):
    """Density minimizing the chosen sensitivity channel on a log scale."""
    attr = {"total": "eta_total", "f": "eta_f", "pi": "eta_pi"}[channel]

    def obj(logr):
        return math.log(getattr(sensitivity_breakdown(math.exp(logr), params), attr))

    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    grid = np.linspace(lo, hi, 200)
    i = int(np.argmin([obj(g) for g in grid]))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(obj, bounds=(a, b), method="bounded")
    return float(math.exp(res.x)), float(math.exp(res.fun))


def required_bias_field(gamma_e: float, chi_e_perp: float = 1.4, chi_e_par: float = 0.7) -> float:
    """Bias (V/cm) along one NV axis that lifts it Gamma_e/2 above the three tilted groups.

    The target group shifts by chi_par*E. A tilted group sees E_par = -E/3 and
    E_perp = (2 sqrt2/3) E, so its lowest branch sits at
    -(chi_par/3 + chi_perp 2 sqrt2/3) E. gamma_e in MHz, susceptibilities in
    MHz/(V/cm).
    """
    gap_per_field = chi_e_par * (1.0 - TETRA_PAR) + chi_e_perp * TETRA_PERP
    return 0.5 * gamma_e / gap_per_field


def perpendicular_suppression(delta_e_perp, e0: float, chi_e_perp: float = 1.0):
    """Ensemble-average lower-branch shift from a small transverse field.

    Azimuthal mean of |E0 + dE| over a uniformly oriented in-plane E0, minus E0,
    times chi_e_perp. Uses the complete elliptic integral of the second kind.
    """
    d = np.abs(np.asarray(delta_e_perp, dtype=float))
    s = e0 + d
    m = np.where(s > 0, 4.0 * e0 * d / np.where(s > 0, s, 1.0) ** 2, 0.0)
    out = chi_e_perp * ((2.0 / math.pi) * s * special.ellipe(m) - e0)
    return out if out.ndim else float(out)


def microwave_free_sensitivity(gamma_e_thermal: float = 2.0, params: ProtocolParams = ProtocolParams(),
                               rho_nv_ppm: float | None = None, bounds=(1e-3, 100.0)):
    """Fluorescence-channel sensitivity with a thermal intrinsic optical width (THz).

    The thermal width replaces kappa0_e, so it also sets the resonant
    enhancement. If rho_nv_ppm is None the density is optimized for this
    channel. Returns (eta_f, density).
    """
    # the count-rate calibration stays tied to the cryogenic reference
    p = replace(params, kappa0_e=gamma_e_thermal * 1e3, r0_reference=params.r0)
    if rho_nv_ppm is None:
        rho, _ = optimal_density(p, bounds, channel="f")
    else:
        rho = float(rho_nv_ppm)
    return sensitivity_breakdown(rho, p).eta_f, rho


def effective_susceptibility(splitting_model=None, chi_e_par: float | None = None,
                             detunings=np.arange(0.0, 1201.0, 10.0), tolerance: float = 0.1):
    """Operating detuning and chi_eff (Hz/(V/cm)) from a model Pi_perp curve.

    The operating point is the smallest detuning whose local slope lies within
    `tolerance` of the slope at the largest detuning. A field dE along the NV
    axis moves the detuning by chi_e_par dE, so chi_eff = dPi/d(detuning) * chi_e_par.
    """
    from .fitting import SplittingModel

    model = splitting_model or SplittingModel()
    p = model.base.params
    chi_par = p.chi_e_par if chi_e_par is None else chi_e_par
    d = np.asarray(detunings, dtype=float)
    pi = model(d, p.chi_e_perp, chi_par)
    slope = np.gradient(pi, d)  # MHz per GHz
    asym = slope[-1]
    ok = np.abs(slope / asym - 1.0) <= tolerance
    # first index after which the slope stays within tolerance
    bad = np.nonzero(~ok)[0]
    i = int(bad[-1] + 1) if bad.size else 0
    i = min(i, d.size - 1)
    chi_eff = slope[i] * 1e-3 * chi_par * 1e6  # (MHz/MHz) * Hz/(V/cm)
    return float(d[i]), float(chi_eff)
