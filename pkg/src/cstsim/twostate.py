"""Pseudospin-1/2 ground/excited-state model of coherent spin trapping.

A spin pair in the ground state (GS) and one in the excited state (ES)
are driven by the same oscillating field. Optical pumping ``P`` and
decay ``Gamma`` move the centre between GS and ES without touching the
spin. In the frame rotating with the drive each state sees a static
effective field

    W_g,e = (Omega_z^{g,e} - omega) z + Omega_R^{g,e} x

and the spin relaxes at ``gamma`` while pumping builds polarisation
``Sigma`` along z in the GS.

All angular frequencies and rates are in rad/us (equivalently 1/us).
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import cross_matrix, rk4_linear, solve

# RK4 step acceptance: dt * fastest rate must stay below this.
STABILITY_LIMIT = 0.1


class UndefinedCSTError(ValueError):
    """Coherent spin trapping is undefined for the given drive pair."""


class StepSizeError(ValueError):
    """Time step too large for the fixed-step integrator."""


@dataclass(frozen=True)
class DrivePair:
    """Splittings, signed Rabi amplitudes and drive frequency, rad/us."""

    omega_z_g: float
    omega_z_e: float
    omega_r_g: float
    omega_r_e: float
    omega: float

    def __post_init__(self):
        vals = (self.omega_z_g, self.omega_z_e, self.omega_r_g, self.omega_r_e, self.omega)
        if not all(np.isfinite(vals)):
            raise ValueError("DrivePair entries must be finite")

    @property
    def detuning_g(self):
        return self.omega_z_g - self.omega

    @property
    def detuning_e(self):
        return self.omega_z_e - self.omega

    def replace(self, **kw):
        vals = dict(
            omega_z_g=self.omega_z_g,
            omega_z_e=self.omega_z_e,
            omega_r_g=self.omega_r_g,
            omega_r_e=self.omega_r_e,
            omega=self.omega,
        )
        vals.update(kw)
        return DrivePair(**vals)


@dataclass(frozen=True)
class TwoStateRates:
    pump_p: float
    decay_gamma: float
    spin_gamma: float
    pump_sigma: float

    def __post_init__(self):
        for name in ("pump_p", "decay_gamma", "spin_gamma", "pump_sigma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a non-negative number, got {v}")


@dataclass(frozen=True)
class SpinState:
    s_g: np.ndarray
    s_e: np.ndarray
    n_g: float
    n_e: float

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(s_g=x[2:5].copy(), s_e=x[5:8].copy(), n_g=float(x[0]), n_e=float(x[1]))

    def as_vector(self):
        return np.concatenate(([self.n_g, self.n_e], self.s_g, self.s_e))


@dataclass(frozen=True)
class Trajectory:
    """Time samples of the (n_g, n_e, s_g, s_e) state vector."""

    t: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        return SpinState.from_vector(self.states[i])

    @property
    def final(self):
        return self[-1]


def effective_fields(d):
    """Rotating-frame effective fields (GS, ES) as 3-vectors (x, y, z)."""
    w_g = np.array([d.omega_r_g, 0.0, d.omega_z_g - d.omega])
    w_e = np.array([d.omega_r_e, 0.0, d.omega_z_e - d.omega])
    return w_g, w_e


def generator(d, r):
    """Linear system ``dx/dt = M x + c`` for x = (n_g, n_e, s_g, s_e)."""
    w_g, w_e = effective_fields(d)
    p, gam, rel = r.pump_p, r.decay_gamma, r.spin_gamma
    m = np.zeros((8, 8))
    m[0, 0], m[0, 1] = -p, gam
    m[1, 0], m[1, 1] = p, -gam
    eye = np.eye(3)
    m[2:5, 2:5] = cross_matrix(w_g) - (p + rel) * eye
    m[2:5, 5:8] = gam * eye
    m[5:8, 5:8] = cross_matrix(w_e) - (gam + rel) * eye
    m[5:8, 2:5] = p * eye
    c = np.zeros(8)
    c[4] = r.pump_sigma
    return m, c


def steady_state(d, r):
    """Steady state of the driven GS/ES spin system.

    Occupancies are normalised to ``n_g + n_e = 1``.

    Raises
    ------
    ValueError
        If ``spin_gamma`` is zero or both optical rates vanish.
    SingularSystemError
        If the spin system is numerically singular.
    """
    if not r.spin_gamma > 0:
        raise ValueError("spin_gamma must be positive for a steady state")
    total = r.pump_p + r.decay_gamma
    if not total > 0:
        raise ValueError("pump_p + decay_gamma must be positive")
    m, c = generator(d, r)
    spins = solve(m[2:, 2:], -c[2:])
    n_g = r.decay_gamma / total
    n_e = r.pump_p / total
    return SpinState(s_g=spins[:3], s_e=spins[3:], n_g=n_g, n_e=n_e)


def sr_signal(d, r):
    """Normalised spin-resonance signal ``R = 1 - gamma (S_gz + S_ez) / Sigma``."""
    if not r.pump_sigma > 0:
        raise ValueError("pump_sigma must be positive")
    st = steady_state(d, r)
    return 1.0 - r.spin_gamma * (st.s_g[2] + st.s_e[2]) / r.pump_sigma


def _saturation(r, omega_r):
    p, gam = r.pump_p, r.decay_gamma
    return p * gam / (gam + p) * omega_r**2 / r.spin_gamma


def sr_lorentzian_gs(d, r):
    """Isolated GS resonance, valid for Gamma ~ P >> gamma."""
    x = _saturation(r, d.omega_r_g)
    return x / (d.detuning_g**2 + r.pump_p**2 + x)


def sr_lorentzian_es(d, r):
    """Isolated ES resonance, valid for Gamma ~ P >> gamma.

    The saturation term uses the ES Rabi amplitude.
    """
    x = _saturation(r, d.omega_r_e)
    return x / (d.detuning_e**2 + r.decay_gamma**2 + x)


def sr_overlap(d, r):
    """Signal for overlapping GS and ES resonances, leading order in gamma."""
    p, gam = r.pump_p, r.decay_gamma
    dg, de = d.detuning_g, d.detuning_e
    mis = (dg * d.omega_r_e - de * d.omega_r_g) ** 2
    den = (gam * dg + p * de) ** 2 + dg**2 * de**2 + mis
    if den == 0.0:
        return 0.0
    return gam * p / (r.spin_gamma * (gam + p)) * mis / den


def cst_frequency(d):
    """Drive frequency at which the GS and ES effective fields are collinear."""
    diff = d.omega_r_e - d.omega_r_g
    if diff == 0.0:
        raise UndefinedCSTError("CST needs distinct GS and ES Rabi amplitudes")
    return (d.omega_z_g * d.omega_r_e - d.omega_z_e * d.omega_r_g) / diff


def cst_angle(d):
    """Small-angle tilt of the trapped spin from z, ``dOmega_R / dOmega_z``."""
    gap = d.omega_z_e - d.omega_z_g
    if gap == 0.0:
        raise ZeroDivisionError("CST angle undefined for equal GS and ES splittings")
    return (d.omega_r_e - d.omega_r_g) / gap


def cst_depth(d):
    """Residual signal at the trapping frequency, ``1 - cos^2`` of the trap tilt."""
    dz = d.omega_z_e - d.omega_z_g
    dr = d.omega_r_e - d.omega_r_g
    den = dz**2 + dr**2
    if den == 0.0:
        return 0.0
    return dr**2 / den


def dephasing_rate(d, r):
    """Spin dephasing rate from random switching between GS and ES fields."""
    total = r.pump_p + r.decay_gamma
    if not total > 0:
        raise ValueError("pump_p + decay_gamma must be positive")
    return ((d.omega_z_e - d.omega_z_g) ** 2 + (d.omega_r_e - d.omega_r_g) ** 2) / total


def fastest_rate(d, r):
    w_g, w_e = effective_fields(d)
    return max(
        np.linalg.norm(w_g),
        np.linalg.norm(w_e),
        r.pump_p + r.decay_gamma + r.spin_gamma,
    )


def time_evolution(d, r, s0, t_end, dt):
    """Integrate the rotating-frame dynamics from ``s0`` with fixed-step RK4.

    Returns
    -------
    Trajectory
        Every step, the initial state included.

    Raises
    ------
    StepSizeError
        If ``dt`` times the fastest rate or precession frequency is not
        below 0.1.
    """
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    if not t_end >= 0:
        raise ValueError("t_end must be non-negative")
    if dt * fastest_rate(d, r) >= STABILITY_LIMIT:
        raise StepSizeError(
            f"dt={dt} too large: dt * max rate = {dt * fastest_rate(d, r):.3g} >= {STABILITY_LIMIT}"
        )
    m, c = generator(d, r)
    t, states = rk4_linear(m, c, s0.as_vector(), t_end, dt)
    return Trajectory(t, states)
