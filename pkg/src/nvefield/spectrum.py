"""Resonant and off-resonant ODMR spectra of an NV ensemble in random internal fields.

Conventions: detunings and branch shifts in GHz, positive meaning below the
zero-phonon line; microwave offsets in MHz from the zero-field splitting;
fields in V/cm. Excited-state susceptibilities are MHz/(V/cm), ground-state
ones Hz/(V/cm).

Every spectrum is assembled in two steps. First the ensemble is reduced to a
distribution D(x) over the ground-state transverse splitting x = chi_g_perp*E_perp
for the configurations selected by a resonance indicator. Then D(x) is
contracted with a precomputed table of primitive lineshapes.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .constants import ChargeDensity, as_density
from .field import FieldDistribution, FieldVector, calibrate, cdf_field_magnitude

GHZ_PER_MHZ = 1e-3


def symmetric_grid(half_width: float, step: float) -> np.ndarray:
    """Offsets -W..W whose negative half mirrors the positive half bit-exactly."""
    half = np.arange(0, int(round(half_width / step)) + 1) * step
    return np.concatenate([-half[:0:-1], half])


SUSCEPTIBILITY_OMEGA = symmetric_grid(15.0, 0.03)
PRESET_OMEGA = symmetric_grid(60.0, 0.06)
RESONANT_FLOOR = 1e-12
FINE_STRUCTURE_MIN_PPM = 0.01


@dataclass(frozen=True)
class SampleParams:
    """Physical parameters of one sample and measurement configuration."""

    rho_c: ChargeDensity = ChargeDensity(15.0)
    chi_g_perp: float = 17.0  # Hz/(V/cm)
    chi_g_par: float = 0.35  # Hz/(V/cm)
    chi_e_perp: float = 1.43  # MHz/(V/cm)
    chi_e_par: float = 0.68  # MHz/(V/cm)
    delta_zfs: float = 2.879  # GHz
    hyperfine_shifts: tuple = (-2.16, 0.0, 2.16)  # MHz
    gamma_e_single: float = 18.0  # MHz
    epsilon_c: float = 1e4
    epsilon_r_enh: float = 1e5
    rho_eff_ratio: float | None = None  # None: calibrate against Monte Carlo

    def __post_init__(self):
        object.__setattr__(self, "rho_c", as_density(self.rho_c))
        object.__setattr__(self, "hyperfine_shifts", tuple(float(b) for b in self.hyperfine_shifts))
        for name in ("chi_g_perp", "chi_g_par", "chi_e_perp", "chi_e_par", "delta_zfs", "gamma_e_single"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rho_c.value_ppm <= 0:
            raise ValueError("rho_c must be positive")
        if self.epsilon_c < 0 or self.epsilon_r_enh < 0:
            raise ValueError("contrast factors must be non-negative")
        if sorted(self.hyperfine_shifts) != sorted(-b for b in self.hyperfine_shifts):
            raise ValueError("hyperfine_shifts must be symmetric about zero")
        if self.gamma_e_single * GHZ_PER_MHZ >= self.delta_zfs:
            raise ValueError("gamma_e_single must be smaller than delta_zfs")
        if self.rho_eff_ratio is not None and not self.rho_eff_ratio > 0:
            raise ValueError("rho_eff_ratio must be positive")
        if self.rho_c.value_ppm < FINE_STRUCTURE_MIN_PPM:
            warnings.warn(
                "charge density below ~10 ppb: excited-state fine structure is no longer "
                "negligible against field-induced splittings",
                stacklevel=3,
            )

    @property
    def cone_amplitude(self) -> float:
        """sqrt(chi_par^2 + chi_perp^2) in GHz/(V/cm)."""
        return math.hypot(self.chi_e_par, self.chi_e_perp) * GHZ_PER_MHZ

    @property
    def cone_angle(self) -> float:
        return math.atan2(self.chi_e_perp, self.chi_e_par)

    def distribution(self) -> FieldDistribution:
        ratio = self.rho_eff_ratio
        if ratio is None:
            ratio = calibrate(self.rho_c).ratio
        return FieldDistribution(self.rho_c.scaled(ratio), self.rho_c)


@dataclass(frozen=True)
class BroadeningParams:
    """Lorentzian FWHMs (MHz) for resonant and off-resonant lineshapes."""

    kappa_ih_res: float = 1.7
    kappa_h_res: float = 1.0
    kappa_ih_offres: float = 1.7
    kappa_h_offres: float = 1.0

    def __post_init__(self):
        vals = (self.kappa_ih_res, self.kappa_h_res, self.kappa_ih_offres, self.kappa_h_offres)
        if any(v < 0 for v in vals):
            raise ValueError("broadening widths must be non-negative")
        if self.kappa_ih_res + self.kappa_h_res <= 0 or self.kappa_ih_offres + self.kappa_h_offres <= 0:
            raise ValueError("each lineshape needs at least one nonzero width")


@dataclass(frozen=True)
class Preset:
    broadening: BroadeningParams
    epsilon_c: float


PRESETS = {
    "5K": Preset(BroadeningParams(4.0, 2.0, 27.0, 20.0), 1e4),
    "40K": Preset(BroadeningParams(4.0, 2.0, 16.0, 16.0), 4e3),
    "55K": Preset(BroadeningParams(4.0, 2.0, 15.0, 12.0), 1.7e3),
    "100K": Preset(BroadeningParams(4.0, 2.0, 8.0, 9.0), 1.7e3),
}


@dataclass(frozen=True)
class Spectrum:
    """ODMR trace: offset from the zero-field splitting (MHz) and signed contrast."""

    mw_offset: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.mw_offset, dtype=float)
        s = np.asarray(self.signal, dtype=float)
        if w.ndim != 1 or w.shape != s.shape:
            raise ValueError("mw_offset and signal must be 1-D arrays of equal length")
        if np.any(np.diff(w) <= 0):
            raise ValueError("mw_offset must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise ValueError("signal must be finite")
        object.__setattr__(self, "mw_offset", w)
        object.__setattr__(self, "signal", s)

    def __add__(self, other: "Spectrum") -> "Spectrum":
        _same_grid(self, other)
        return Spectrum(self.mw_offset, self.signal + other.signal)

    def __sub__(self, other: "Spectrum") -> "Spectrum":
        _same_grid(self, other)
        return Spectrum(self.mw_offset, self.signal - other.signal)

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(self.mw_offset, factor * self.signal)

    def integral(self) -> float:
        return float(np.trapezoid(self.signal, self.mw_offset))


def _same_grid(a: Spectrum, b: Spectrum):
    if a.mw_offset.shape != b.mw_offset.shape or np.any(a.mw_offset != b.mw_offset):
        raise ValueError("spectra are on different grids")


@dataclass(frozen=True)
class ConfigFractions:
    f_resonant: float
    f_offresonant: float


# ---------------------------------------------------------------------------
# branch geometry


def excited_branch_shifts(fv: FieldVector, params: SampleParams):
    """(upper, lower) branch shifts in GHz."""
    par = params.chi_e_par * GHZ_PER_MHZ * fv.e_parallel
    perp = params.chi_e_perp * GHZ_PER_MHZ * fv.e_perp
    return par - perp, par + perp


def resonance_indicators(fv: FieldVector, detuning: float, params: SampleParams):
    """(d_r, d_or): branches within gamma_e/2 of the drive, and branches the drive sits above."""
    half = 0.5 * params.gamma_e_single * GHZ_PER_MHZ
    up, lo = excited_branch_shifts(fv, params)
    d_r = (np.abs(detuning - up) <= half).astype(int) + (np.abs(detuning - lo) <= half).astype(int)
    d_or = (detuning - up > half).astype(int) + (detuning - lo > half).astype(int)
    return d_r, d_or


def _below_intervals(c, alpha):
    """u = cos(theta) intervals where each branch's normalized shift lies below c.

    Returns array (..., 4, 2): two intervals for the lower branch, two for the upper.
    """
    c = np.asarray(c, dtype=float)
    cc = np.clip(c, -1.0, 1.0)
    psi = np.arccos(cc)
    out = np.zeros(c.shape + (4, 2))
    # lower branch: |theta - alpha| > psi
    a1 = alpha - psi
    out[..., 0, 0] = np.where(a1 > 0, np.cos(np.maximum(a1, 0.0)), 1.0)
    out[..., 0, 1] = 1.0
    b1 = alpha + psi
    out[..., 1, 0] = -1.0
    out[..., 1, 1] = np.where(b1 < np.pi, np.cos(np.minimum(b1, np.pi)), -1.0)
    # upper branch: theta in (psi - alpha, 2 pi - psi - alpha)
    t_lo = np.maximum(0.0, psi - alpha)
    t_hi = np.minimum(np.pi, 2 * np.pi - psi - alpha)
    ok = t_lo < t_hi
    out[..., 2, 0] = np.where(ok, np.cos(t_hi), 0.0)
    out[..., 2, 1] = np.where(ok, np.cos(t_lo), 0.0)
    # second slot of the upper branch stays empty
    full = c >= 1.0
    empty = c <= -1.0
    out[full] = np.array([[-1.0, 1.0], [0.0, 0.0], [-1.0, 1.0], [0.0, 0.0]])
    out[empty] = 0.0
    return out


@lru_cache(maxsize=16)
def _gl(n):
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _tilde_from_tail(q):
    """Normalized field with upper-tail probability q."""
    return (4 * np.pi / (3 * -np.log1p(-q))) ** (2 / 3)


def _tilde_from_cdf(p):
    """Normalized field with lower-tail probability p; exact for tiny p."""
    return (4 * np.pi / (3 * -np.log(p))) ** (2 / 3)


def _tail_prob(e_tilde):
    return 1.0 - cdf_field_magnitude(e_tilde)


# ---------------------------------------------------------------------------
# grids and lineshape tables


@dataclass(frozen=True)
class Grids:
    """Discretization controls. Halving every step is the convergence check."""

    x_step: float = 0.025
    x_uniform_max: float = 40.0
    w_step: float = 0.025
    w_uniform_max: float = 120.0
    geometric_ratio: float = 1.03
    outer: float = 1e7
    n_shell: int = 1500
    n_energy: int = 800
    n_detuning_nodes: int = 4

    def refined(self) -> "Grids":
        return Grids(
            self.x_step / 2, self.x_uniform_max, self.w_step / 2, self.w_uniform_max,
            1 + (self.geometric_ratio - 1) / 2, self.outer,
            2 * self.n_shell, 2 * self.n_energy, 2 * self.n_detuning_nodes,
        )


def _nodes(step, umax, ratio, outer):
    uni = np.arange(0.0, umax + 0.5 * step, step)
    n_geo = int(math.ceil(math.log(outer / uni[-1]) / math.log(ratio)))
    geo = uni[-1] * ratio ** np.arange(1, n_geo + 1)
    return np.concatenate([uni, geo])


@lru_cache(maxsize=8)
def _x_nodes(g: Grids):
    return _nodes(g.x_step, g.x_uniform_max, g.geometric_ratio, g.outer)


@lru_cache(maxsize=8)
def _x_edges(g: Grids):
    x = _x_nodes(g)
    return np.concatenate([[0.0], 0.5 * (x[1:] + x[:-1]), [np.inf]])


@lru_cache(maxsize=8)
def _w_edges(g: Grids):
    return _nodes(g.w_step, g.w_uniform_max, g.geometric_ratio, g.outer)


@lru_cache(maxsize=8)
def _w_centers(g: Grids):
    e = _w_edges(g)
    return 0.5 * (e[1:] + e[:-1])


def _lorentz_cdf_pos(u, center, hwhm):
    """Lorentzian CDF minus its value at u = 0, for u >= 0."""
    hwhm = max(hwhm, 1e-12)
    return (np.arctan2(u - center, hwhm) - np.arctan2(-center, hwhm)) / np.pi


def _ih_cumulative(w, x, kappa_ih, shifts):
    """Mass of the inhomogeneous lineshape on (x, w] for the positive-omega side."""
    u = np.sqrt(np.maximum(w * w - x * x, 0.0))
    h = 0.5 * kappa_ih
    total = np.zeros(np.broadcast(w, x).shape)
    for b in shifts:
        total = total + _lorentz_cdf_pos(u, abs(b), h)
    return total


@lru_cache(maxsize=16)
def _ih_table(g: Grids, kappa_ih: float, shifts: tuple):
    """Cell masses T[i, k] of Lambda_IH(.; x_i) over omega' cells, positive side only."""
    x = _x_nodes(g)
    edges = _w_edges(g)
    cum = _ih_cumulative(edges[None, :], x[:, None], kappa_ih, shifts)
    return np.diff(cum, axis=1)


_KERNELS: dict = {}
_KERNEL_LOCK = threading.Lock()


def _homogeneous_kernel(omega_abs, centers, kappa_h, edges):
    if kappa_h > 0:
        h = 0.5 * kappa_h
        d1 = omega_abs[:, None] - centers[None, :]
        d2 = omega_abs[:, None] + centers[None, :]
        return (h / np.pi) * (1.0 / (d1 * d1 + h * h) + 1.0 / (d2 * d2 + h * h))
    # no homogeneous width: linear interpolation of the cell densities
    widths = np.diff(edges)
    k = np.zeros((omega_abs.size, centers.size))
    idx = np.interp(omega_abs, centers, np.arange(centers.size))
    i0 = np.clip(np.floor(idx).astype(int), 0, centers.size - 2)
    f = idx - i0
    rows = np.arange(omega_abs.size)
    k[rows, i0] += (1 - f) / widths[i0]
    k[rows, i0 + 1] += f / widths[i0 + 1]
    return k


def lambda_ih(omega, e_perp, kappa_ih: float, params: SampleParams):
    """Closed-form inhomogeneous lineshape; zero for |omega| <= chi_g_perp * e_perp."""
    w = np.abs(np.asarray(omega, dtype=float))
    x = params.chi_g_perp * 1e-6 * float(e_perp)
    h = 0.5 * kappa_ih
    out = np.zeros_like(w)
    m = w > x
    s = np.sqrt(w[m] ** 2 - x * x)
    for b in params.hyperfine_shifts:
        out[m] += h * w[m] / (np.pi * s * ((abs(b) - s) ** 2 + h * h))
    return out if out.ndim else float(out)


def _cic(values, weights, nodes, n_out):
    """Cloud-in-cell deposit onto a monotone (possibly nonuniform) node set."""
    idx = np.interp(values, nodes, np.arange(nodes.size))
    i0 = np.clip(np.floor(idx).astype(int), 0, nodes.size - 2)
    f = idx - i0
    out = np.bincount(i0, weights * (1 - f), minlength=n_out)
    out += np.bincount(i0 + 1, weights * f, minlength=n_out)
    return out


# ---------------------------------------------------------------------------
# model


class SpectrumModel:
    """Spectrum synthesis for fixed sample parameters and discretization.

    The field distribution is resolved once; lineshape tables are shared
    across instances through module-level caches keyed by the broadening.
    """

    def __init__(self, params: SampleParams | None = None, grids: Grids | None = None,
                 distribution: FieldDistribution | None = None):
        self.params = params or SampleParams()
        self.grids = grids or Grids()
        self.dist = distribution or self.params.distribution()

    def with_params(self, **changes) -> "SpectrumModel":
        p = replace(self.params, **changes)
        same_field = p.rho_c == self.params.rho_c and p.rho_eff_ratio == self.params.rho_eff_ratio
        return SpectrumModel(p, self.grids, self.dist if same_field else None)

    # -- field-space reductions -------------------------------------------

    @property
    def _xscale(self):
        return self.params.chi_g_perp * 1e-6  # MHz per V/cm

    def _shell_points(self, nu):
        """Quadrature points on {branch shift == nu}: (E, theta, weight per GHz)."""
        p = self.params
        A, alpha = p.cone_amplitude, p.cone_angle
        eref = self.dist.e_ref
        e_min = abs(nu) / A
        q_b = _tail_prob(e_min / eref) if e_min > 0 else 1.0
        if q_b <= 0:
            return np.empty(0), np.empty(0), np.empty(0)
        t, wt = _gl(self.grids.n_shell)
        q = q_b * (1.0 - t * t)
        E = _tilde_from_tail(q) * eref
        c = np.clip(nu / (E * A), -1.0, 1.0)
        psi = np.arccos(c)
        s_psi = np.sqrt(1.0 - c * c)
        base = 2.0 * q_b * t * wt / (E * A)
        Es, ths, ws = [], [], []
        for theta in (alpha + psi, alpha - psi, psi - alpha, 2 * np.pi - alpha - psi):
            ok = (theta >= 0) & (theta <= np.pi) & (s_psi > 0)
            w = np.where(ok, base * np.sin(np.clip(theta, 0, np.pi)) / np.where(s_psi > 0, s_psi, 1.0), 0.0)
            Es.append(E)
            ths.append(np.clip(theta, 0, np.pi))
            ws.append(w)
        return np.concatenate(Es), np.concatenate(ths), np.concatenate(ws)

    def resonant_x_distribution(self, detuning: float) -> np.ndarray:
        """Weights on the x nodes for configurations within gamma_e/2 of the drive."""
        g = self.grids
        gam = self.params.gamma_e_single * GHZ_PER_MHZ
        tn, tw = _gl(g.n_detuning_nodes)
        xs, ws = [], []
        for tt, w0 in zip(tn, tw):
            nu = detuning - 0.5 * gam + gam * tt
            E, th, w = self._shell_points(nu)
            xs.append(self._xscale * E * np.sin(th))
            ws.append(w * w0 * gam)
        nodes = _x_nodes(g)
        return _cic(np.concatenate(xs), np.concatenate(ws), nodes, nodes.size)

    def _below_nodes(self, y):
        """Energy nodes with per-branch u-intervals where the shift lies below y."""
        p = self.params
        A, alpha = p.cone_amplitude, p.cone_angle
        eref = self.dist.e_ref
        n = self.grids.n_energy
        e_b = abs(y) / A
        q_b = _tail_prob(e_b / eref) if e_b > 0 else 1.0
        t, wt = _gl(n)
        # above the breakpoint: the shell set varies as a square root near E_b
        q = q_b * (1.0 - t * t)
        E_hi = _tilde_from_tail(q) * eref
        w_hi = 2.0 * q_b * t * wt
        parts_E, parts_w = [E_hi], [w_hi]
        if y > 0 and q_b < 1.0:
            # below the breakpoint every orientation is below y for both branches
            pl = (1.0 - q_b) * t
            E_lo = _tilde_from_cdf(pl) * eref
            parts_E.append(E_lo)
            parts_w.append((1.0 - q_b) * wt)
        E = np.concatenate(parts_E)
        w = np.concatenate(parts_w)
        iv = _below_intervals(y / (E * A), alpha)
        if y > 0 and q_b < 1.0:
            iv[n:] = np.array([[-1.0, 1.0], [0.0, 0.0], [-1.0, 1.0], [0.0, 0.0]])
        return E, w, iv

    def cumulative_branch_measure(self, y: float) -> float:
        """Sum over branches of P(E) sin(theta) measure with branch shift below y (max 4)."""
        E, w, iv = self._below_nodes(y)
        lengths = np.clip(iv[..., 1] - iv[..., 0], 0.0, None).sum(axis=-1)
        return float(np.sum(w * lengths))

    def offresonant_x_distribution(self, detuning: float) -> np.ndarray:
        y = detuning - 0.5 * self.params.gamma_e_single * GHZ_PER_MHZ
        E, w, iv = self._below_nodes(y)
        return self._interval_deposit(E, w, iv)

    def ensemble_x_distribution(self) -> np.ndarray:
        """Unconditioned distribution (each configuration counted once)."""
        t, wt = _gl(2 * self.grids.n_energy)
        E = _tilde_from_tail(1.0 - t) * self.dist.e_ref
        iv = np.zeros(E.shape + (1, 2))
        iv[..., 0, 0], iv[..., 0, 1] = -1.0, 1.0
        return self._interval_deposit(E, wt, iv)

    def _interval_deposit(self, E, w, iv):
        # G(x): u-measure of the set with X*sqrt(1-u^2) <= x, i.e. |u| >= k(x)
        edges = _x_edges(self.grids)
        out = np.zeros(edges.size - 1)
        for s in range(0, E.size, 128):
            X = self._xscale * E[s : s + 128]
            r = np.minimum(edges[None, :] / X[:, None], 1.0)
            k = np.sqrt(1.0 - r * r)[:, :, None]
            ua = iv[s : s + 128, None, :, 0]
            ub = iv[s : s + 128, None, :, 1]
            G = np.clip(ub - np.maximum(ua, k), 0.0, None) + np.clip(np.minimum(ub, -k) - ua, 0.0, None)
            out += w[s : s + 128] @ np.diff(G.sum(axis=-1), axis=1)
        return out

    # -- spectra ------------------------------------------------------------

    def _kernel(self, omega_abs, kappa_h):
        key = (self.grids, kappa_h, omega_abs.tobytes())
        k = _KERNELS.get(key)
        if k is None:
            k = _homogeneous_kernel(omega_abs, _w_centers(self.grids), kappa_h, _w_edges(self.grids))
            with _KERNEL_LOCK:
                if len(_KERNELS) > 16:
                    _KERNELS.clear()
                _KERNELS[key] = k
        return k

    def spectrum_from_x(self, dx, omega, kappa_ih, kappa_h) -> np.ndarray:
        """Contract an x-distribution with the primitive lineshape table."""
        omega = np.asarray(omega, dtype=float)
        table = _ih_table(self.grids, float(kappa_ih), self.params.hyperfine_shifts)
        nz = np.nonzero(dx)[0]
        if nz.size == 0:
            return np.zeros_like(omega)
        sl = slice(nz[0], nz[-1] + 1)
        m = dx[sl] @ table[sl]
        return self._kernel(np.abs(omega), float(kappa_h)) @ m

    def resonant_spectrum(self, detuning, b: BroadeningParams | None = None, omega=None) -> Spectrum:
        b = b or BroadeningParams()
        omega = SUSCEPTIBILITY_OMEGA if omega is None else np.asarray(omega, dtype=float)
        dx = self.resonant_x_distribution(detuning)
        if dx.sum() < RESONANT_FLOOR:
            warnings.warn(f"resonant measure at {detuning} GHz is below {RESONANT_FLOOR:g}", stacklevel=2)
        return Spectrum(omega, self.spectrum_from_x(dx, omega, b.kappa_ih_res, b.kappa_h_res))

    def offresonant_spectrum(self, detuning, b: BroadeningParams | None = None, omega=None) -> Spectrum:
        b = b or BroadeningParams()
        omega = SUSCEPTIBILITY_OMEGA if omega is None else np.asarray(omega, dtype=float)
        dx = self.offresonant_x_distribution(detuning)
        return Spectrum(omega, self.spectrum_from_x(dx, omega, b.kappa_ih_offres, b.kappa_h_offres))

    def ensemble_spectrum(self, b: BroadeningParams | None = None, omega=None) -> Spectrum:
        """Unconditioned ensemble lineshape with the off-resonant widths."""
        b = b or BroadeningParams()
        omega = SUSCEPTIBILITY_OMEGA if omega is None else np.asarray(omega, dtype=float)
        dx = self.ensemble_x_distribution()
        return Spectrum(omega, self.spectrum_from_x(dx, omega, b.kappa_ih_offres, b.kappa_h_offres))

    def total_spectrum(self, detuning, b: BroadeningParams | None = None, omega=None) -> Spectrum:
        sr = self.resonant_spectrum(detuning, b, omega)
        so = self.offresonant_spectrum(detuning, b, omega)
        return sr.scaled(self.params.epsilon_c) - so

    def primitive_lineshape(self, omega, e_perp, kappa_ih, kappa_h) -> np.ndarray:
        """Single-configuration lineshape at transverse field e_perp (V/cm)."""
        nodes = _x_nodes(self.grids)
        dx = _cic(np.array([self._xscale * e_perp]), np.array([1.0]), nodes, nodes.size)
        return self.spectrum_from_x(dx, omega, kappa_ih, kappa_h)

    # -- fractions and fluorescence ----------------------------------------

    def config_fractions(self, detuning) -> ConfigFractions:
        half = 0.5 * self.params.gamma_e_single * GHZ_PER_MHZ
        lo = self.cumulative_branch_measure(detuning - half)
        hi = self.cumulative_branch_measure(detuning + half)
        return ConfigFractions(max(hi - lo, 0.0) / 2.0, lo / 2.0)

    def fluorescence(self, detuning) -> float:
        """Relative fluorescence, normalized so the far-below-drive plateau is 1."""
        f = self.config_fractions(detuning)
        return (self.params.epsilon_r_enh * f.f_resonant + f.f_offresonant) / 2.0

    def resonant_enhancement(self, detuning) -> float:
        """Resonant share of fluorescence relative to the off-resonant plateau."""
        return self.params.epsilon_r_enh * self.config_fractions(detuning).f_resonant / 2.0

    def external_field_response(self, delta_e_par, detuning, b=None, omega=None):
        """Spectrum and fluorescence change for an applied field along the NV axis (V/cm)."""
        eff = detuning - self.params.chi_e_par * GHZ_PER_MHZ * delta_e_par
        spec = self.total_spectrum(eff, b, omega)
        return spec, self.fluorescence(eff) - self.fluorescence(detuning)


# ---------------------------------------------------------------------------
# functional front end


@lru_cache(maxsize=8)
def _model(params: SampleParams) -> SpectrumModel:
    return SpectrumModel(params)


def model_for(params: SampleParams | None = None) -> SpectrumModel:
    return _model(params or SampleParams())


def primitive_lineshape(omega, e_perp, b: BroadeningParams | None = None,
                        params: SampleParams | None = None, resonant: bool = True):
    b = b or BroadeningParams()
    kih, kh = (b.kappa_ih_res, b.kappa_h_res) if resonant else (b.kappa_ih_offres, b.kappa_h_offres)
    m = SpectrumModel(params or SampleParams(), distribution=_dummy_distribution())
    return m.primitive_lineshape(omega, e_perp, kih, kh)


def _dummy_distribution():
    rho = ChargeDensity(1.0)
    return FieldDistribution(rho, rho)


def resonant_spectrum(detuning, params=None, b=None, omega=None) -> Spectrum:
    return model_for(params).resonant_spectrum(detuning, b, omega)


def offresonant_spectrum(detuning, params=None, b=None, omega=None) -> Spectrum:
    return model_for(params).offresonant_spectrum(detuning, b, omega)


def total_spectrum(detuning, params=None, b=None, omega=None) -> Spectrum:
    return model_for(params).total_spectrum(detuning, b, omega)


def config_fractions(detuning, params=None) -> ConfigFractions:
    return model_for(params).config_fractions(detuning)


def fluorescence(detuning, params=None) -> float:
    return model_for(params).fluorescence(detuning)


def external_field_response(delta_e_par, detuning, params=None, b=None, omega=None):
    return model_for(params).external_field_response(delta_e_par, detuning, b, omega)


__all__ = [
    "SampleParams", "BroadeningParams", "Preset", "PRESETS", "Spectrum", "ConfigFractions",
    "Grids", "SpectrumModel", "excited_branch_shifts", "resonance_indicators", "lambda_ih",
    "primitive_lineshape", "resonant_spectrum", "offresonant_spectrum", "total_spectrum",
    "config_fractions", "fluorescence", "external_field_response", "model_for", "symmetric_grid",
]
