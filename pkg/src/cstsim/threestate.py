"""Optically detected spin trapping with ground, excited and metastable states.

Each electronic state carries a pseudospin-1/2 density matrix. The
excited state (ES) decays to the metastable state (MS) at a rate that
depends on its spin through the selectivity ``eta``, which both polarises
the spins under pumping and makes the photoluminescence
``I_PL = Gamma * N_e`` spin dependent.

State vector ordering used throughout::

    x = (n_g, n_e, n_m, s_g[xyz], s_e[xyz], s_m[xyz])

Rates are in 1/us and angular frequencies in rad/us.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ._linalg import SingularSystemError, cross_matrix, rk4_linear, solve
from .twostate import STABILITY_LIMIT, DrivePair, StepSizeError, effective_fields

# Stand-in for an exactly vanishing MS spin relaxation rate.
GAMMA_M_FLOOR = 1e-9

_ETA_WARN = 0.2


class DegenerateNetworkError(ValueError):
    """No population transfer path is open between the electronic states."""


@dataclass(frozen=True)
class ThreeStateRates:
    pump_p: float
    decay_gamma: float
    gamma_m1: float
    gamma_m2: float
    eta: float
    gamma_g: float
    gamma_e: float
    gamma_m: float = 0.0
    w_g: float = 0.0

    def __post_init__(self):
        for name in ("pump_p", "decay_gamma", "gamma_m1", "gamma_m2", "gamma_g", "gamma_e", "gamma_m", "w_g"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a non-negative number, got {v}")
        if not np.isfinite(self.eta):
            raise ValueError("eta must be finite")
        if abs(self.eta) > _ETA_WARN:
            warnings.warn(
                f"|eta| = {abs(self.eta):.3g} exceeds {_ETA_WARN}; the model assumes eta << 1",
                stacklevel=3,
            )

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class ThreeStateState:
    n_g: float
    n_e: float
    n_m: float
    s_g: np.ndarray
    s_e: np.ndarray
    s_m: np.ndarray

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(
            n_g=float(x[0]),
            n_e=float(x[1]),
            n_m=float(x[2]),
            s_g=x[3:6].copy(),
            s_e=x[6:9].copy(),
            s_m=x[9:12].copy(),
        )

    def as_vector(self):
        return np.concatenate(([self.n_g, self.n_e, self.n_m], self.s_g, self.s_e, self.s_m))


def _zero_drive(d):
    return d.replace(omega_r_g=0.0, omega_r_e=0.0)


def generator(r, d, *, eta_feedback=True):
    """Matrix ``M`` of the homogeneous 12-dimensional system ``dx/dt = M x``.

    With ``eta_feedback=False`` the spin-dependent term ``2 eta S_e^z`` is
    dropped from the population equations, which leaves the populations
    at their eta = 0 values and makes the spins exactly linear in eta.
    The MS has no Hamiltonian.
    """
    p, gam, m1, m2, eta = r.pump_p, r.decay_gamma, r.gamma_m1, r.gamma_m2, r.eta
    w_g, w_e = effective_fields(d)
    eye = np.eye(3)
    m = np.zeros((12, 12))
    ng, ne, nm = 0, 1, 2
    sg, se, sm = slice(3, 6), slice(6, 9), slice(9, 12)
    sez = 8

    m[ne, ne] = -gam - m1
    m[ne, ng] = p
    m[ng, ne] = gam
    m[ng, ng] = -p
    m[ng, nm] = m2
    m[nm, ne] = m1
    m[nm, nm] = -m2
    if eta_feedback:
        m[ne, sez] = -2.0 * eta * m1
        m[nm, sez] = 2.0 * eta * m1

    m[se, se] = cross_matrix(w_e) - (r.gamma_e + gam + m1) * eye
    m[se, sg] = p * eye
    m[sez, ne] += -0.5 * eta * m1

    m[sg, sg] = cross_matrix(w_g) - (r.gamma_g + p) * eye
    m[sg, se] = gam * eye
    m[sg, sm] = m2 * eye

    m[sm, sm] = -(r.gamma_m + m2) * eye
    m[sm, se] = m1 * eye
    m[11, ne] += 0.5 * eta * m1
    return m


def _check_network(r):
    if r.pump_p == 0 and r.decay_gamma == 0 and r.gamma_m1 == 0 and r.gamma_m2 == 0:
        raise DegenerateNetworkError("all population transfer rates vanish")


def _system(r, d, *, far_off=True, eta_feedback=True):
    """Steady-state matrix and right-hand side, normalisation included."""
    _check_network(r)
    if r.gamma_m == 0.0:
        r = r.replace(gamma_m=GAMMA_M_FLOOR)
    m = generator(r, d, eta_feedback=eta_feedback)
    rhs = np.zeros(12)
    # normalisation replaces the (redundant) GS population equation
    m[0, :] = 0.0
    m[0, :3] = 1.0
    rhs[0] = 1.0
    pinned = []
    if far_off:
        pinned += [9, 10]
    if r.gamma_m1 == 0 and r.gamma_m2 == 0:
        # the MS is disconnected and stays empty
        pinned += [2, 9, 10, 11]
    for i in pinned:
        m[i, :] = 0.0
        m[i, i] = 1.0
        rhs[i] = 0.0
    return m, rhs


def _steady(r, d, **kw):
    m, rhs = _system(r, d, **kw)
    return ThreeStateState.from_vector(solve(m, rhs))


def populations_steady(r):
    """Steady-state occupancies ``(n_g, n_e, n_m)`` without drive, total 1.

    For ``eta = 0`` the closed form is used; otherwise the populations
    follow from the full zero-drive solve including the spin-dependent
    ES -> MS rate.
    """
    _check_network(r)
    p, gam, m1, m2 = r.pump_p, r.decay_gamma, r.gamma_m1, r.gamma_m2
    if r.eta == 0.0:
        if m1 == 0.0:
            n_e = p / (gam + p)
            return gam / (gam + p), n_e, 0.0
        den = m1 * (m2 + p) + m2 * (gam + p)
        if den == 0.0:
            raise DegenerateNetworkError("population balance is degenerate")
        n_e = m2 * p / den
        n_m = m1 * n_e / m2 if m2 > 0 else 1.0 - n_e
        return 1.0 - n_e - n_m, n_e, n_m
    st = _steady(r, DrivePair(0.0, 0.0, 0.0, 0.0, 0.0))
    return st.n_g, st.n_e, st.n_m


def excited_population0(r):
    """ES population at eta = 0, the closed form used for spin generation."""
    return populations_steady(r.replace(eta=0.0))[1]


def spins_steady(r, d, *, far_off=True, eta_feedback=True):
    """Steady state of the coupled 12-dimensional population/spin system.

    Parameters
    ----------
    r : ThreeStateRates
    d : DrivePair
    far_off : bool
        Clamp the transverse MS spin to zero (MS far off resonance).
    eta_feedback : bool
        Keep the ``2 eta S_e^z`` term in the population equations. Without
        it the result is the first-order-in-eta solution.

    Raises
    ------
    SingularSystemError
    DegenerateNetworkError
    """
    return _steady(r, d, far_off=far_off, eta_feedback=eta_feedback)


def zero_drive_polarizations(r):
    """Closed-form ``(S_e^z, S_g^z, S_m^z)`` at zero drive, first order in eta."""
    p, gam, m1, m2 = r.pump_p, r.decay_gamma, r.gamma_m1, r.gamma_m2
    gg, ge, gm = r.gamma_g, r.gamma_e, r.gamma_m
    n_e0 = excited_population0(r)
    den = (
        gg * gm * (gam + ge + m1)
        + gg * m2 * (gam + ge + m1)
        + gm * p * (ge + m1)
        + ge * m2 * p
    )
    if den == 0.0:
        raise SingularSystemError("zero-drive spin balance is singular")
    k = 0.5 * r.eta * n_e0 * m1 / den
    vec = np.array([
        -(gg * m2 + gm * p + gg * gm),
        ge * m2 - gm * gam,
        gg * gam + ge * p + gg * ge,
    ])
    return k * vec


def opposite_orientation(r):
    """True when the MS feeds the GS more spin than the ES does."""
    gm = r.gamma_m if r.gamma_m > 0 else GAMMA_M_FLOOR
    return r.gamma_m2 / gm > r.decay_gamma / r.gamma_e


def pl_intensity(state, r):
    """Photoluminescence rate ``Gamma * n_e``."""
    return r.decay_gamma * state.n_e


def odmr_signal_numeric(r, d, **kw):
    """Relative PL change on switching the drive on, from full steady states.

    The drive-induced change is solved for directly,
    ``M_on dx = -(M_on - M_off) x_off``, so that weak signals do not
    suffer from cancellation.
    """
    m_on, rhs = _system(r, d, **kw)
    m_off, _ = _system(r, _zero_drive(d), **kw)
    x_off = solve(m_off, rhs)
    dx = solve(m_on, -(m_on - m_off) @ x_off)
    if x_off[1] == 0.0:
        raise ValueError("no photoluminescence without drive (P = 0?)")
    # I_PL = Gamma n_e, so the ratio reduces to the ES population change
    return dx[1] / x_off[1]


def odmr_signal_analytic(r, d, scale=1.0):
    """Closed-form ODMR signal, quadratic in the Rabi amplitudes.

    Derived for ``gamma_m = 0`` and vanishing MS rates, so ``gamma_m1``,
    ``gamma_m2`` and ``gamma_m`` do not enter. ``w_g`` is an additive
    inhomogeneous width of the GS resonance. The overall positive
    normalisation is arbitrary; ``scale`` multiplies the result (see
    :func:`analytic_scale`).
    """
    p, gam, ge, gg, wg = r.pump_p, r.decay_gamma, r.gamma_e, r.gamma_g, r.w_g
    dg, de = d.detuning_g, d.detuning_e
    rg, re = d.omega_r_g, d.omega_r_e
    ge_tot = gam + ge
    gw = gg + wg
    a = ge_tot * gw + ge * p
    den = (gg * ge_tot + ge * p) ** 2 * (
        de**2 * (dg**2 + (gw + p) ** 2)
        + 2.0 * de * dg * gam * p
        + dg**2 * ge_tot**2
        + a**2
    )
    bracket = (
        ge * p * rg**2 * (de**2 * (gw + p) + ge_tot * a)
        + p * rg * re * (ge * (gg + p) - gam * gg) * (-de * dg + a)
        - gg * re**2 * (gg + p) * (dg**2 * ge_tot + (gw + p) * a)
    )
    if den == 0.0:
        raise ZeroDivisionError("analytic ODMR signal undefined for these rates")
    return scale * r.eta**2 * bracket / den


def analytic_scale(r, d_cal):
    """Factor that maps :func:`odmr_signal_analytic` onto the numeric signal.

    Both sides are evaluated at the calibration drive ``d_cal`` with
    ``w_g = 0``; the numeric model has no inhomogeneous broadening.
    """
    r0 = r.replace(w_g=0.0)
    ana = odmr_signal_analytic(r0, d_cal)
    if ana == 0.0:
        raise ZeroDivisionError("analytic signal vanishes at the calibration point")
    return odmr_signal_numeric(r0, d_cal) / ana


def gs_width(r, splitting_gap):
    """GS resonance width for an ES-GS splitting gap (rad/us).

    Returns
    -------
    (width, width_far, width_cst)
        The width at ``splitting_gap``, its limit for a large gap, and its
        value at zero gap where pump broadening is suppressed.
    """
    p, gam, m1, ge = r.pump_p, r.decay_gamma, r.gamma_m1, r.gamma_e
    k = gam + m1 + ge
    if not k > 0:
        raise ValueError("Gamma + Gamma_m1 + gamma_e must be positive")
    width = r.gamma_g + p * (1.0 - gam * k / (splitting_gap**2 + k**2)) + r.w_g
    width_far = r.gamma_g + p + r.w_g
    width_cst = r.gamma_g + (m1 + ge) / k * p + r.w_g
    return width, width_far, width_cst


def time_evolution(r, d, s0, t_end, dt, *, eta_feedback=True):
    """Fixed-step RK4 run of the 12-dimensional system from ``s0``.

    Returns times and an array of state vectors (one row per step). The
    MS carries no Hamiltonian here, so its transverse spin simply decays.
    """
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    w_g, w_e = effective_fields(d)
    fastest = max(
        np.linalg.norm(w_g),
        np.linalg.norm(w_e),
        r.pump_p + r.decay_gamma + r.gamma_m1 + r.gamma_m2
        + max(r.gamma_g, r.gamma_e, r.gamma_m),
    )
    if dt * fastest >= STABILITY_LIMIT:
        raise StepSizeError(f"dt={dt} too large for the fastest rate {fastest:.3g}")
    m = generator(r, d, eta_feedback=eta_feedback)
    return rk4_linear(m, np.zeros(12), s0.as_vector(), t_end, dt)
