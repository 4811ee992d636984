"""Sums of Fano-like resonances and their least-squares fit.

A single line is

    f(B) = (A w^2 + Q (B - B0) w) / ((B - B0)^2 + w^2)

with symmetric amplitude ``A``, antisymmetric amplitude ``Q``, centre
``B0`` and width ``w`` (mT). Fits use a damped Gauss-Newton
(Levenberg-Marquardt) iteration with an analytic Jacobian; widths are
fitted as ``log(w)`` so they stay positive.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

LAMBDA_START = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e16
MAX_ITER = 200
RTOL = 1e-10
# Two centres closer than this make the Jacobian singular.
MIN_CENTER_SEPARATION = 1e-6


class FitError(RuntimeError):
    pass


class SingularJacobianError(FitError):
    pass


class FitConvergenceError(FitError):
    """Raised when the iteration budget runs out; ``result`` is the best fit."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class SeedError(ValueError):
    pass


@dataclass(frozen=True)
class FanoResonance:
    a: float
    q: float
    b0: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")


@dataclass
class FitResult:
    resonances: list
    baseline: float
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool = True
    fit_baseline: bool = False
    history: list = field(default_factory=list, repr=False)

    @property
    def param_names(self):
        names = []
        for j in range(len(self.resonances)):
            names += [f"a{j}", f"q{j}", f"b0{j}", f"width{j}"]
        if self.fit_baseline:
            names.append("baseline")
        return names

    def stderr(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def fano_eval(lines, baseline, b):
    """Baseline plus the sum of Fano lines at field(s) ``b``."""
    b = np.asarray(b, dtype=float)
    y = np.full(b.shape, float(baseline))
    for ln in lines:
        x = b - ln.b0
        y = y + (ln.a * ln.width**2 + ln.q * x * ln.width) / (x * x + ln.width**2)
    return y


def _pack(lines, baseline, fit_baseline):
    p = []
    for ln in lines:
        p += [ln.a, ln.q, ln.b0, np.log(ln.width)]
    if fit_baseline:
        p.append(baseline)
    return np.array(p, dtype=float)


def _unpack(p, n_lines, fit_baseline, baseline=0.0):
    lines = [
        FanoResonance(p[4 * j], p[4 * j + 1], p[4 * j + 2], float(np.exp(p[4 * j + 3])))
        for j in range(n_lines)
    ]
    return lines, (p[-1] if fit_baseline else baseline)


def fano_jacobian(lines, b, fit_baseline=False, log_width=True):
    """Derivatives of :func:`fano_eval` by (A, Q, B0, w or log w) per line.

    Returns an ``(n_points, 4 * n_lines [+ 1])`` array; the last column is
    the baseline when ``fit_baseline`` is set.
    """
    b = np.asarray(b, dtype=float)
    cols = []
    for ln in lines:
        w = ln.width
        x = b - ln.b0
        den = x * x + w * w
        num = ln.a * w * w + ln.q * x * w
        d_a = w * w / den
        d_q = x * w / den
        d_x = (ln.q * w * den - num * 2.0 * x) / den**2
        d_w = ((2.0 * ln.a * w + ln.q * x) * den - num * 2.0 * w) / den**2
        cols += [d_a, d_q, -d_x, w * d_w if log_width else d_w]
    if fit_baseline:
        cols.append(np.ones_like(b))
    return np.column_stack(cols)


def _check_centers(lines):
    centers = sorted(ln.b0 for ln in lines)
    for c0, c1 in zip(centers, centers[1:]):
        if c1 - c0 < MIN_CENTER_SEPARATION:
            raise SingularJacobianError(f"line centres collapsed near {c0:.6g} mT")


def _xy(spec):
    if hasattr(spec, "x"):
        return np.asarray(spec.x, dtype=float), np.asarray(spec.y, dtype=float)
    x, y = spec
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _covariance(lines, x, resid, fit_baseline, free):
    jac = fano_jacobian(lines, x, fit_baseline, log_width=False)[:, free]
    dof = max(x.size - jac.shape[1], 1)
    s2 = float(resid @ resid) / dof
    jtj = jac.T @ jac
    try:
        sub = s2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        sub = s2 * np.linalg.pinv(jtj)
    cov = np.zeros((free.size, free.size))
    cov[np.ix_(free, free)] = 0.5 * (sub + sub.T)
    return cov


def fit(spec, seeds, fit_baseline=False, *, baseline=0.0, free_q=None, max_iter=MAX_ITER, rtol=RTOL):
    """Least-squares fit of a sum of Fano lines.

    Parameters
    ----------
    spec : Spectrum or (x, y)
        Data to fit, x in mT.
    seeds : list of FanoResonance
        Starting lines; their order is kept in the result.
    fit_baseline : bool
        Fit a constant offset. When off, ``baseline`` is held fixed.
    free_q : sequence of bool, optional
        Per line, whether ``Q`` is fitted; a line with ``False`` keeps
        its seed ``Q`` (normally 0). All free by default.

    Returns
    -------
    FitResult
        ``covariance`` is over (A, Q, B0, width) per line [+ baseline],
        scaled by the residual variance. Rows and columns of held
        parameters are zero.

    Raises
    ------
    SingularJacobianError
        If two line centres come within 1e-6 mT.
    FitConvergenceError
        If the iteration limit is reached; carries the best result.
    """
    x, y = _xy(spec)
    n = len(seeds)
    if n == 0:
        raise ValueError("at least one seed line is required")
    if x.size < 4 * n + 1:
        raise ValueError(f"need at least {4 * n + 1} points for {n} lines, got {x.size}")
    if any(not s.width > 0 for s in seeds):
        raise ValueError("seed widths must be positive")
    if free_q is None:
        free_q = [True] * n
    if len(free_q) != n:
        raise ValueError("free_q needs one entry per seed line")
    free = np.ones(4 * n + int(fit_baseline), dtype=bool)
    free[1 : 4 * n : 4] = np.asarray(free_q, dtype=bool)
    n_free = int(free.sum())
    if x.size < n_free + 1:
        raise ValueError(f"need at least {n_free + 1} points for {n_free} free parameters, got {x.size}")

    p = _pack(seeds, baseline, fit_baseline)
    lines, base = _unpack(p, n, fit_baseline, baseline)
    _check_centers(lines)
    resid = y - fano_eval(lines, base, x)
    cost = float(resid @ resid)
    history = [cost]
    lam = LAMBDA_START
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        jac = fano_jacobian(lines, x, fit_baseline)[:, free]
        jtj = jac.T @ jac
        grad = jac.T @ resid
        diag = np.diag(jtj).copy()
        diag[diag == 0.0] = 1.0
        accepted = False
        while lam <= LAMBDA_MAX:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= LAMBDA_UP
                continue
            p_new = p.copy()
            p_new[free] += step
            lines_new, base_new = _unpack(p_new, n, fit_baseline, baseline)
            resid_new = y - fano_eval(lines_new, base_new, x)
            cost_new = float(resid_new @ resid_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= LAMBDA_UP
        if not accepted:
            # no downhill step at any damping: stationary point
            converged = True
            break
        _check_centers(lines_new)
        change = (cost - cost_new) / cost if cost > 0 else 0.0
        p, lines, base, resid, cost = p_new, lines_new, base_new, resid_new, cost_new
        history.append(cost)
        lam = max(lam / LAMBDA_DOWN, 1e-300)
        if change < rtol or cost == 0.0:
            converged = True
            break

    cov = _covariance(lines, x, resid, fit_baseline, free)
    result = FitResult(
        resonances=lines,
        baseline=float(base),
        covariance=cov,
        residual_norm=float(np.sqrt(cost)),
        iterations=it,
        converged=converged,
        fit_baseline=fit_baseline,
        history=history,
    )
    if not converged:
        raise FitConvergenceError(f"no convergence after {max_iter} iterations", result)
    return result


def seed_guess(spec, n_lines):
    """Starting lines from the most prominent extrema of ``y - median(y)``.

    Centres are the extremum positions, amplitudes the extremum heights
    above the median, and widths the half-width at half prominence. Lines
    are returned sorted by centre with ``q = 0``.
    """
    if n_lines < 1:
        raise ValueError("n_lines must be at least 1")
    x, y = _xy(spec)
    if x.size > 1 and x[0] > x[-1]:
        x, y = x[::-1], y[::-1]
    base = float(np.median(y))
    dev = y - base
    found = []
    for sign in (1.0, -1.0):
        idx, props = find_peaks(sign * dev, prominence=0.0)
        for i, prom in zip(idx, props["prominences"]):
            if prom > 0:
                found.append((float(prom), int(i), sign))
    if len(found) < n_lines:
        raise SeedError(f"found {len(found)} extrema, need {n_lines}")
    found.sort(key=lambda f: (-f[0], f[1]))
    step = float(np.min(np.diff(x))) if x.size > 1 else 1.0
    lines = []
    for prom, i, sign in found[:n_lines]:
        level = abs(dev[i]) - 0.5 * prom
        lo = i
        while lo > 0 and sign * dev[lo - 1] > level:
            lo -= 1
        hi = i
        while hi < x.size - 1 and sign * dev[hi + 1] > level:
            hi += 1
        width = max(0.5 * (x[hi] - x[lo]), step)
        lines.append(FanoResonance(float(dev[i]), 0.0, float(x[i]), float(width)))
    return sorted(lines, key=lambda ln: ln.b0)


@dataclass(frozen=True)
class AmplitudeRow:
    temperature: float
    a_norm: tuple
    q_norm: tuple


def amplitude_track(fits, normalizer_line, temperatures=None):
    """Symmetric and antisymmetric amplitudes normalised by a reference line's A.

    Parameters
    ----------
    fits : list of FitResult
        Fits with a consistent line ordering.
    normalizer_line : int
        Index of the reference line.
    temperatures : sequence, optional
        Temperature of each fit; defaults to the fit index.
    """
    if temperatures is None:
        temperatures = list(range(len(fits)))
    if len(temperatures) != len(fits):
        raise ValueError("one temperature per fit is required")
    rows = []
    n = None
    for t, res in zip(temperatures, fits):
        if n is None:
            n = len(res.resonances)
        elif len(res.resonances) != n:
            raise ValueError("inconsistent number of lines across fits")
        ref = res.resonances[normalizer_line].a
        if abs(ref) < 1e-12:
            raise ZeroDivisionError(f"reference amplitude {ref:.3g} too small to normalise")
        rows.append(
            AmplitudeRow(
                float(t),
                tuple(ln.a / ref for ln in res.resonances),
                tuple(ln.q / ref for ln in res.resonances),
            )
        )
    return rows
