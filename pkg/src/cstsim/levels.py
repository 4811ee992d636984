"""Spin-3/2 level structure in a uniaxial crystal field.

Energies are E/h in MHz and magnetic fields are in mT throughout. The
Hamiltonian is

    H = d (Sz^2 - 5/4) + g * mu_B/h * (B . S)

with the basis ordered as m = +3/2, +1/2, -1/2, -3/2 along the crystal
axis z.

Levels are labelled by their spin projection along the magnetic field,
obtained by following every eigenvector continuously down from the
strong-field limit where the projection is a good quantum number.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import sqrt

import numpy as np

#: Bohr magneton over Planck's constant, MHz/mT.
MU_B = 13.996

#: Spin projections of the S_z eigenbasis, in matrix order.
SPIN_PROJECTIONS = (1.5, 0.5, -0.5, -1.5)

# Jacobi convergence: off-diagonal magnitudes below this fraction of max|H|.
_JACOBI_RTOL = 1e-12
_JACOBI_MAX_SWEEPS = 60

# Two overlaps closer than this cannot be told apart during continuation.
_AMBIGUITY = 1e-6
# Below this overlap a continuation step is considered too coarse.
_MIN_OVERLAP = 0.6

_ROOT_GRID_STEP = 0.01  # mT
_ROOT_TOL = 1e-4  # mT


class LabelingError(RuntimeError):
    """Spin labels cannot be assigned unambiguously (degenerate crossing)."""


@dataclass(frozen=True)
class SpinMatrices:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


@lru_cache(maxsize=1)
def _spin_matrices():
    s_plus = np.zeros((4, 4))
    for i, m in enumerate(SPIN_PROJECTIONS[1:], start=1):
        s_plus[i - 1, i] = sqrt(3.75 - m * (m + 1.0))
    sx = (s_plus + s_plus.T) / 2.0 + 0j
    sy = (s_plus - s_plus.T) / 2j
    sz = np.diag(SPIN_PROJECTIONS).astype(complex)
    for mat in (sx, sy, sz):
        mat.setflags(write=False)
    return SpinMatrices(sx, sy, sz)


def spin_matrices():
    """Spin-3/2 operators in the S_z eigenbasis (hbar = 1)."""
    return _spin_matrices()


@dataclass(frozen=True)
class HamiltonianParams:
    """Half zero-field splitting ``d`` (MHz), g-factor, field ``b`` (mT)."""

    d: float
    g_factor: float = 2.0
    b: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.g_factor > 0:
            raise ValueError(f"g_factor must be positive, got {self.g_factor}")
        b = tuple(float(v) for v in self.b)
        if len(b) != 3:
            raise ValueError("b must be a 3-vector")
        object.__setattr__(self, "b", b)

    def with_field(self, b):
        return HamiltonianParams(self.d, self.g_factor, tuple(b))


@dataclass(frozen=True)
class ZfsTemperatureModel:
    """Linear temperature model of the zero-field splittings (MHz, K).

    ``slope`` is the increase of 2D of the excited state per kelvin of
    cooling below ``t_ref``.
    """

    two_d_g: float = 70.0
    two_d_e_ref: float = 430.0
    slope: float = 2.1
    t_ref: float = 300.0

    @property
    def d_g(self):
        return self.two_d_g / 2.0


def d_e_of_temperature(m, t):
    """Half zero-field splitting of the excited state at temperature ``t`` (K)."""
    if not 0.0 < t < 600.0:
        raise ValueError(f"temperature {t} K outside (0, 600) K")
    return (m.two_d_e_ref + m.slope * (m.t_ref - t)) / 2.0


@dataclass(frozen=True)
class LevelSet:
    """Eigenlevels in ascending order with their spin-projection labels.

    ``vectors[:, k]`` is the eigenvector of ``energies[k]``.
    """

    energies: np.ndarray
    labels: tuple
    vectors: np.ndarray = field(repr=False)

    def energy(self, label):
        return float(self.energies[self.labels.index(label)])


@dataclass(frozen=True)
class Transition:
    from_label: float
    to_label: float
    delta_m: int
    frequency: float

    @property
    def pair(self):
        return (self.from_label, self.to_label)


def build_hamiltonian(p):
    """4x4 Hermitian Hamiltonian in MHz for parameters ``p``."""
    s = spin_matrices()
    zeeman = p.g_factor * MU_B
    bx, by, bz = p.b
    h = p.d * (s.sz @ s.sz - 1.25 * np.eye(4))
    h = h + zeeman * (bx * s.sx + by * s.sy + bz * s.sz)
    return h


def jacobi_eigh(h):
    """Eigen-decomposition of a small Hermitian matrix by cyclic Jacobi sweeps.

    Works on plain Python complex numbers so that the result does not
    depend on the BLAS in use.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    v : ndarray
        Unitary matrix with the eigenvectors as columns.
    """
    n = len(h)
    a = [[complex(h[i][j]) for j in range(n)] for i in range(n)]
    v = [[1.0 + 0j if i == j else 0j for j in range(n)] for i in range(n)]
    scale = max(abs(x) for row in a for x in row)
    tol = _JACOBI_RTOL * scale

    for _ in range(_JACOBI_MAX_SWEEPS):
        off = max((abs(a[p][q]) for p in range(n) for q in range(p + 1, n)), default=0.0)
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                ph = apq / mag
                tau = (a[q][q].real - a[p][p].real) / (2.0 * mag)
                t = 1.0 / (abs(tau) + sqrt(1.0 + tau * tau))
                if tau < 0.0:
                    t = -t
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                sp = s * ph
                sc = s * ph.conjugate()
                # columns: p' = c p - s e^{-i phi} q,  q' = s e^{i phi} p + c q
                for rows in (a, v):
                    for i in range(n):
                        xp, xq = rows[i][p], rows[i][q]
                        rows[i][p] = c * xp - sc * xq
                        rows[i][q] = sp * xp + c * xq
                # rows: the conjugate transform
                ap, aq = a[p], a[q]
                for j in range(n):
                    xp, xq = ap[j], aq[j]
                    ap[j] = c * xp - sp * xq
                    aq[j] = sc * xp + c * xq
                a[p][q] = a[q][p] = 0j
                a[p][p] = complex(a[p][p].real, 0.0)
                a[q][q] = complex(a[q][q].real, 0.0)
    else:
        raise np.linalg.LinAlgError("Jacobi sweeps did not converge")

    w = np.array([a[i][i].real for i in range(n)])
    order = np.argsort(w, kind="stable")
    vec = np.array(v)[:, order]
    return w[order], vec


def _zeeman_basis(axis):
    """Eigenvectors of (axis . S) ordered as SPIN_PROJECTIONS."""
    s = spin_matrices()
    op = axis[0] * s.sx + axis[1] * s.sy + axis[2] * s.sz
    w, v = jacobi_eigh(op)
    # ascending w is -3/2 .. +3/2; reverse to match SPIN_PROJECTIONS
    return v[:, ::-1]


def _assign(prev_vectors, prev_labels, vectors):
    """Map new eigenvectors onto previous labels by maximum overlap.

    Returns the new labels, or None when the step is too coarse to decide.
    """
    ov = np.abs(prev_vectors.conj().T @ vectors) ** 2
    labels = []
    for k in range(ov.shape[1]):
        col = np.sort(ov[:, k])
        if col[-1] < _MIN_OVERLAP or col[-1] - col[-2] < _AMBIGUITY:
            return None
        labels.append(prev_labels[int(np.argmax(ov[:, k]))])
    if len(set(labels)) != len(labels):
        return None
    return tuple(labels)


def _unit(axis):
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("field axis must be non-zero")
    return axis / norm


def _start_field(p, b_max):
    # Strong-field start: 10x the largest field, and far above the
    # zero-field splitting so that every projection is well defined.
    floor = 20.0 * abs(p.d) / (p.g_factor * MU_B)
    return max(10.0 * b_max, floor, 1.0)


def _negligible_field(p, b):
    # Zeeman energy below rounding of the zero-field terms counts as B = 0
    return p.g_factor * MU_B * b <= 1e-12 * max(abs(p.d), 1.0)


def _continue(p, axis, b_from, b_to, vectors, labels):
    """Follow eigenvectors from ``b_from`` to ``b_to`` along ``axis``."""
    span = b_to - b_from
    done = 0.0
    step = 1.0
    while done < 1.0:
        frac = min(1.0, done + step)
        b = b_from + frac * span
        w, v = jacobi_eigh(build_hamiltonian(p.with_field(b * axis)))
        new = _assign(vectors, labels, v)
        if new is None:
            if step * abs(span) < 1e-9:
                raise LabelingError(
                    f"ambiguous spin labels near B = {b:.9g} mT (degenerate crossing)"
                )
            step /= 2.0
            continue
        vectors, labels, done = v, new, frac
        step = min(1.0 - done, 2.0 * step) if done < 1.0 else step
    return w, vectors, labels


def level_path(p, axis, fields):
    """Labelled eigenlevels for a sequence of field magnitudes along ``axis``.

    The field component of ``p`` is ignored. Labels are obtained by a
    single continuation from the strong-field limit down through the
    fields in descending order, so tracking is consistent along the whole
    path.

    Returns a list of :class:`LevelSet` in the order of ``fields``.
    """
    axis = _unit(axis)
    fields = np.asarray(fields, dtype=float)
    if fields.size == 0:
        return []
    if np.any(fields < 0):
        raise ValueError("field magnitudes must be non-negative")

    out = [None] * fields.size
    order = np.argsort(-fields, kind="stable")
    b_start = _start_field(p, fields.max())
    vectors = _zeeman_basis(axis)
    labels = SPIN_PROJECTIONS
    # align the reference basis with the true eigenvectors at the start field
    w, vectors, labels = _continue(p, axis, b_start, b_start, vectors, labels)
    b_prev = b_start
    for idx in order:
        b = fields[idx]
        if _negligible_field(p, b):
            out[idx] = _zero_field_levels(p)
            continue
        w, vectors, labels = _continue(p, axis, b_prev, b, vectors, labels)
        b_prev = b
        out[idx] = _level_set(w, labels, vectors)
    return out


def _level_set(w, labels, vectors):
    w = np.array(w, dtype=float)
    vectors = np.array(vectors)
    w.setflags(write=False)
    vectors.setflags(write=False)
    return LevelSet(w, tuple(labels), vectors)


def _zero_field_levels(p):
    # No field axis: the S_z eigenbasis is exact and labels are m_z.
    w, v = jacobi_eigh(build_hamiltonian(p.with_field((0.0, 0.0, 0.0))))
    labels = _assign(np.eye(4, dtype=complex), SPIN_PROJECTIONS, v)
    if labels is None:
        raise LabelingError("cannot label zero-field levels")
    return _level_set(w, labels, v)


def eigenlevels(p):
    """Labelled eigenlevels of the Hamiltonian defined by ``p``.

    Raises
    ------
    LabelingError
        If continuation from the strong-field limit meets a degenerate
        crossing that cannot be resolved.
    """
    b = np.asarray(p.b, dtype=float)
    mag = float(np.linalg.norm(b))
    if _negligible_field(p, mag):
        return _zero_field_levels(p)
    return level_path(p, b / mag, [mag])[0]


def transitions_of(levels, delta_m_filter=None):
    """All level pairs of a :class:`LevelSet` as :class:`Transition` records.

    ``from_label`` is the lower-energy level of the pair. With
    ``delta_m_filter`` only pairs with ``|delta_m|`` equal to it are kept.
    """
    out = []
    for i in range(4):
        for j in range(i + 1, 4):
            lo, hi = levels.labels[i], levels.labels[j]
            dm = int(round(hi - lo))
            if delta_m_filter is not None and abs(dm) != abs(delta_m_filter):
                continue
            freq = float(levels.energies[j] - levels.energies[i])
            out.append(Transition(lo, hi, dm, freq))
    return out


def transitions(p, delta_m_filter=None):
    """Transitions between the labelled eigenlevels of ``p``."""
    return transitions_of(eigenlevels(p), delta_m_filter)


def pair_frequency(levels, pair):
    """|E(a) - E(b)| for a label pair ``(a, b)``."""
    a, b = pair
    return abs(levels.energy(a) - levels.energy(b))


def _pair_key(a, b):
    return (a, b) if a < b else (b, a)


def resonance_fields(f_drive, p_template, axis, b_range, delta_m):
    """Fields where a transition of the requested |delta_m| matches ``f_drive``.

    The range is scanned on a 0.01 mT grid; sign changes of
    ``|E_i - E_j| - f_drive`` are refined by bisection to 1e-4 mT.

    Returns
    -------
    list of (float, Transition)
        Resonance field (mT) and the transition evaluated there, sorted by
        field.
    """
    if not f_drive > 0:
        raise ValueError("f_drive must be positive")
    lo, hi = (float(v) for v in b_range)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("b_range must be finite")
    if hi < lo:
        lo, hi = hi, lo
    if lo < 0:
        raise ValueError("b_range must be non-negative field magnitudes")
    axis = _unit(axis)
    if hi == lo:
        return []

    n = int(np.floor((hi - lo) / _ROOT_GRID_STEP + 1e-9))
    grid = lo + _ROOT_GRID_STEP * np.arange(n + 1)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    levels = level_path(p_template, axis, grid)

    pairs = sorted(
        {
            _pair_key(levels[0].labels[i], levels[0].labels[j])
            for i in range(4)
            for j in range(i + 1, 4)
            if abs(int(round(levels[0].labels[i] - levels[0].labels[j]))) == abs(delta_m)
        }
    )
    roots = []
    for pair in pairs:
        g = np.array([pair_frequency(ls, pair) for ls in levels]) - f_drive
        for k in range(len(grid) - 1):
            if g[k] == 0.0:
                roots.append((grid[k], pair, levels[k]))
            elif g[k] * g[k + 1] < 0.0:
                b, ls = _bisect(p_template, axis, pair, f_drive, grid[k], grid[k + 1], levels[k], levels[k + 1])
                roots.append((b, pair, ls))
        if g[-1] == 0.0:
            roots.append((grid[-1], pair, levels[-1]))

    out = []
    for b, pair, ls in sorted(roots, key=lambda r: (r[0], r[1])):
        tr = next(t for t in transitions_of(ls) if _pair_key(*t.pair) == pair)
        out.append((float(b), tr))
    return out


def _bisect(p, axis, pair, f_drive, b_lo, b_hi, ls_lo, ls_hi):
    g_lo = pair_frequency(ls_lo, pair) - f_drive
    while b_hi - b_lo > _ROOT_TOL:
        b_mid = 0.5 * (b_lo + b_hi)
        w, v, labels = _continue(p, axis, b_lo, b_mid, ls_lo.vectors, ls_lo.labels)
        ls_mid = _level_set(w, labels, v)
        g_mid = pair_frequency(ls_mid, pair) - f_drive
        if g_mid == 0.0:
            return b_mid, ls_mid
        if (g_mid < 0.0) == (g_lo < 0.0):
            b_lo, ls_lo, g_lo = b_mid, ls_mid, g_mid
        else:
            b_hi, ls_hi = b_mid, ls_mid
    # final secant step inside the bracket
    g_hi = pair_frequency(ls_hi, pair) - f_drive
    b_root = b_lo - g_lo * (b_hi - b_lo) / (g_hi - g_lo)
    w, v, labels = _continue(p, axis, b_lo, b_root, ls_lo.vectors, ls_lo.labels)
    return b_root, _level_set(w, labels, v)
