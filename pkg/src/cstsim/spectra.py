"""SAR/ODMR spectra versus magnetic field and temperature.

Each Delta m = +-2 level pair is treated as an independent pseudospin-1/2
in the GS and the ES. Its splittings come from the spin-3/2 Hamiltonians
at every field, the drive is the same acoustic wave for both states, and
the ODMR signals of the configured pairs are summed.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .levels import HamiltonianParams, ZfsTemperatureModel, d_e_of_temperature, level_path, pair_frequency
from .threestate import ThreeStateRates, odmr_signal_analytic, odmr_signal_numeric
from .twostate import DrivePair

TWO_PI = 2.0 * np.pi

#: Level pairs driven by the acoustic wave, labelled by field projection.
DEFAULT_TRANSITIONS = ((-1.5, 0.5), (1.5, -0.5))

#: Per-temperature model parameters that reproduce the measured GS spectra.
#: Rates are ordinary frequencies in MHz; ``rabi_ratio`` is Omega_R^e / Omega_R^g.
FIT_TABLE = {
    175: dict(rabi_ratio=-4.6e2, pump_p=0.38, decay_gamma=86.0, w_g=7.7, gamma_g=0.04e-3, gamma_e=0.4),
    225: dict(rabi_ratio=-4.9e2, pump_p=0.65, decay_gamma=260.0, w_g=10.7, gamma_g=0.12e-3, gamma_e=1.2),
    255: dict(rabi_ratio=-3.5e2, pump_p=0.76, decay_gamma=240.0, w_g=9.3, gamma_g=0.21e-3, gamma_e=2.1),
    300: dict(rabi_ratio=-1.2e2, pump_p=1.0, decay_gamma=250.0, w_g=10.0, gamma_g=0.46e-3, gamma_e=4.6),
}

BROADENING_MODES = ("additive", "convolution")
MODELS = ("analytic", "numeric")

# 7-point Gauss-Hermite rule for the Gaussian average over GS splittings.
_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(7)


def fit_table_rates(temperature, *, gamma_m1=None, gamma_m2=None, eta=0.05, gamma_m=0.0):
    """:class:`ThreeStateRates` for a row of :data:`FIT_TABLE`, in rad/us.

    The MS rates are not part of the table; by default they are set to
    1e-3 of the ES decay rate, which the closed-form signal ignores anyway.
    """
    row = FIT_TABLE[int(temperature)]
    gam = TWO_PI * row["decay_gamma"]
    return ThreeStateRates(
        pump_p=TWO_PI * row["pump_p"],
        decay_gamma=gam,
        gamma_m1=1e-3 * gam if gamma_m1 is None else gamma_m1,
        gamma_m2=1e-3 * gam if gamma_m2 is None else gamma_m2,
        eta=eta,
        gamma_g=TWO_PI * row["gamma_g"],
        gamma_e=TWO_PI * row["gamma_e"],
        gamma_m=gamma_m,
        w_g=TWO_PI * row["w_g"],
    )


@dataclass(frozen=True)
class SpectrumConfig:
    """Everything needed to compute one field-swept spectrum.

    Frequencies: ``f_drive`` in MHz; ``rabi_g`` and all rates in rad/us.
    """

    temperature: float
    f_drive: float
    b_grid: tuple
    rates: ThreeStateRates
    rabi_g: float = 1.0
    rabi_ratio: float = -4.6e2
    b_axis: tuple = (0.0, 1.0, 0.0)
    transitions: tuple = DEFAULT_TRANSITIONS
    zfs: ZfsTemperatureModel = field(default_factory=ZfsTemperatureModel)
    g_factor: float = 2.0
    broadening_mode: str = "additive"
    model: str = "analytic"

    def __post_init__(self):
        grid = tuple(float(b) for b in self.b_grid)
        if len(grid) == 0:
            raise ValueError("b_grid is empty")
        if any(b1 <= b0 for b0, b1 in zip(grid, grid[1:])):
            raise ValueError("b_grid must be strictly increasing")
        if grid[0] < 0:
            raise ValueError("b_grid holds field magnitudes and must be non-negative")
        object.__setattr__(self, "b_grid", grid)
        object.__setattr__(self, "b_axis", tuple(float(v) for v in self.b_axis))
        object.__setattr__(self, "transitions", tuple((float(a), float(b)) for a, b in self.transitions))
        if not self.f_drive > 0:
            raise ValueError("f_drive must be positive")
        if self.broadening_mode not in BROADENING_MODES:
            raise ValueError(f"broadening_mode must be one of {BROADENING_MODES}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        for a, b in self.transitions:
            if a == b or abs(a) not in (0.5, 1.5) or abs(b) not in (0.5, 1.5):
                raise ValueError(f"invalid level pair ({a}, {b})")

    def replace(self, **kw):
        return replace(self, **kw)

    def as_dict(self):
        out = asdict(self)
        out["b_grid"] = list(self.b_grid)
        return out


@dataclass(frozen=True)
class Spectrum:
    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        dx = np.diff(x)
        if x.size > 1 and not (np.all(dx > 0) or np.all(dx < 0)):
            raise ValueError("x must be strictly monotone")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def _gs_params(cfg):
    return HamiltonianParams(cfg.zfs.d_g, cfg.g_factor)


def _es_params(cfg):
    return HamiltonianParams(d_e_of_temperature(cfg.zfs, cfg.temperature), cfg.g_factor)


def splitting_table(cfg, fields=None):
    """Splittings ``(Omega_z^g, Omega_z^e)`` in rad/us on a field grid.

    Returns an array of shape ``(n_transitions, n_fields, 2)``.
    """
    fields = np.asarray(cfg.b_grid if fields is None else fields, dtype=float)
    gs = level_path(_gs_params(cfg), cfg.b_axis, fields)
    es = level_path(_es_params(cfg), cfg.b_axis, fields)
    out = np.empty((len(cfg.transitions), fields.size, 2))
    for k, pair in enumerate(cfg.transitions):
        out[k, :, 0] = [pair_frequency(ls, pair) for ls in gs]
        out[k, :, 1] = [pair_frequency(ls, pair) for ls in es]
    return TWO_PI * out


def pair_splittings(cfg, b):
    """Per-transition ``(Omega_z^g, Omega_z^e)`` in rad/us at field ``b`` (mT)."""
    table = splitting_table(cfg, [b])
    return [tuple(float(v) for v in table[k, 0]) for k in range(table.shape[0])]


def _signal(cfg, rates, d):
    if cfg.model == "analytic":
        return odmr_signal_analytic(rates, d)
    return odmr_signal_numeric(rates, d)


def _point(cfg, om_g, om_e):
    omega = TWO_PI * cfg.f_drive
    rg = cfg.rabi_g
    re = cfg.rabi_ratio * rg
    if rg == 0.0 and re == 0.0:
        return 0.0
    if cfg.broadening_mode == "additive":
        return _signal(cfg, cfg.rates, DrivePair(om_g, om_e, rg, re, omega))
    sigma = cfg.rates.w_g
    rates = cfg.rates.replace(w_g=0.0)
    total = 0.0
    for x, w in zip(_GH_NODES, _GH_WEIGHTS):
        shifted = om_g + np.sqrt(2.0) * sigma * x
        total += w * _signal(cfg, rates, DrivePair(shifted, om_e, rg, re, omega))
    return total / np.sqrt(np.pi)


def transition_signals(cfg):
    """ODMR signal of every configured transition on the field grid.

    Returns an array of shape ``(n_transitions, n_fields)``.
    """
    table = splitting_table(cfg)
    out = np.empty(table.shape[:2])
    for k in range(table.shape[0]):
        for i in range(table.shape[1]):
            out[k, i] = _point(cfg, table[k, i, 0], table[k, i, 1])
    return out


def spectrum_vs_b(cfg):
    """Relative PL change versus field: the sum over configured transitions."""
    sig = transition_signals(cfg)
    y = np.zeros(sig.shape[1])
    for row in sig:
        y = y + row
    meta = {"x_unit": "mT", "y": "dPL_over_PL", "config": cfg.as_dict()}
    return Spectrum(np.array(cfg.b_grid), y, meta)


def worker_count():
    """Thread cap from ``CSTSIM_THREADS`` (default 1)."""
    try:
        n = int(os.environ.get("CSTSIM_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def spectrum_vs_t(cfg, t_grid, b_window, rates_by_t=None, ratio_by_t=None):
    """One field-swept spectrum per temperature, restricted to ``b_window``.

    ``rates_by_t`` and ``ratio_by_t`` map temperature to per-row
    :class:`ThreeStateRates` and Rabi ratio; missing entries fall back to
    the values in ``cfg``. Results keep the order of ``t_grid``.
    """
    lo, hi = b_window
    grid = tuple(b for b in cfg.b_grid if lo <= b <= hi)
    if not grid:
        raise ValueError("b_window contains no grid points")
    rates_by_t = rates_by_t or {}
    ratio_by_t = ratio_by_t or {}
    cfgs = [
        cfg.replace(
            temperature=t,
            b_grid=grid,
            rates=rates_by_t.get(t, cfg.rates),
            rabi_ratio=ratio_by_t.get(t, cfg.rabi_ratio),
        )
        for t in t_grid
    ]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(spectrum_vs_b, cfgs))


def resonance_areas(s, windows):
    """Integral of ``|y|`` over each field window (trapezoidal rule).

    Window edges are linearly interpolated onto the spectrum.
    """
    x, y = s.x, s.y
    if x[0] > x[-1]:
        x, y = x[::-1], y[::-1]
    spans = sorted((min(w), max(w)) for w in windows)
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        if b0 < a1:
            warnings.warn(f"windows ({a0}, {a1}) and ({b0}, {b1}) overlap", stacklevel=2)
    areas = []
    for w in windows:
        lo, hi = min(w), max(w)
        if lo < x[0] or hi > x[-1]:
            raise ValueError(f"window ({lo}, {hi}) outside the spectrum range")
        inside = (x > lo) & (x < hi)
        xs = np.concatenate(([lo], x[inside], [hi]))
        ys = np.abs(np.concatenate(([np.interp(lo, x, y)], y[inside], [np.interp(hi, x, y)])))
        areas.append(float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))))
    return areas
