"""Small dense linear algebra helpers shared by the rate-equation models."""

import numpy as np

# Systems with a condition number above this are treated as singular.
COND_LIMIT = 1e14


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a steady-state linear system cannot be solved reliably."""


def solve(a, b):
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    Parameters
    ----------
    a : (n, n) array_like
        Real coefficient matrix.
    b : (n,) array_like
        Right-hand side.

    Returns
    -------
    x : (n,) ndarray

    Raises
    ------
    SingularSystemError
        If the condition number exceeds ``COND_LIMIT`` or a zero pivot
        is met.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError("expected a square matrix and a matching vector")
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise SingularSystemError("non-finite entries in linear system")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(f"linear system is singular (cond={cond:.3g})")

    for k in range(n - 1):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if a[piv, k] == 0.0:
            raise SingularSystemError("zero pivot in elimination")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        b[k + 1:] -= factors * b[k]

    if a[n - 1, n - 1] == 0.0:
        raise SingularSystemError("zero pivot in elimination")
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def cross_matrix(v):
    """Matrix ``C`` with ``C @ s == np.cross(v, s)``."""
    vx, vy, vz = v
    return np.array([[0.0, -vz, vy], [vz, 0.0, -vx], [-vy, vx, 0.0]])


def rk4_linear(m, c, x0, t_end, dt):
    """Integrate ``dx/dt = m @ x + c`` with fixed-step classical RK4.

    Returns the sample times and the states (one row per step, the
    initial state included). The last step is shortened to land on
    ``t_end`` exactly.
    """
    m = np.asarray(m, dtype=float)
    c = np.asarray(c, dtype=float)
    x = np.array(x0, dtype=float)
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, x.size))
    times[0] = 0.0
    states[0] = x
    t = 0.0
    for i in range(1, n_steps + 1):
        h = min(dt, t_end - t)
        k1 = m @ x + c
        k2 = m @ (x + 0.5 * h * k1) + c
        k3 = m @ (x + 0.5 * h * k2) + c
        k4 = m @ (x + h * k3) + c
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_end if i == n_steps else t + h
        times[i] = t
        states[i] = x
    return times, states
