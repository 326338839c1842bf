"""Fixed-step RK4 integration, trapezoid quadrature and small SPD solves.

Everything here is deterministic and operates on plain numpy arrays; the
problem sizes are tiny (state dimension <= ~10), so no sparse or adaptive
machinery is needed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonFiniteState, NotPositiveDefinite

DEFAULT_PIVOT_FLOOR = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform time grid: node j sits at t0 + j*h, j = 0..count-1."""

    t0: float
    h: float
    count: int

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {self.count}")

    @property
    def span(self):
        return self.h * (self.count - 1)

    @property
    def t_end(self):
        return self.t0 + self.span

    def times(self):
        return self.t0 + self.h * np.arange(self.count)

    @classmethod
    def from_span(cls, t0, span, h):
        """Grid covering [t0, t0+span]; span must be an integer multiple of h."""
        steps = int(round(span / h))
        if steps < 1 or abs(steps * h - span) > 1e-9 * max(span, h):
            raise ValueError(f"span {span} is not an integer multiple of step {h}")
        return cls(t0, h, steps + 1)


def integrate_rk4(field, init, grid):
    """Classical fixed-step RK4 of ``d state/dt = field(t, state)`` on ``grid``.

    Returns an array of shape (grid.count, len(init)) with row 0 equal to
    ``init``.  Raises NonFiniteState at the first node whose value is not
    finite.
    """
    x = np.asarray(init, dtype=float)
    out = np.empty((grid.count, x.size))
    out[0] = x
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(0)
    h = grid.h
    t = grid.t0
    for j in range(1, grid.count):
        k1 = field(t, x)
        k2 = field(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = field(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(j)
        out[j] = x
        t = grid.t0 + j * h
    return out


def trapezoid(samples, grid):
    """Composite trapezoid rule for one sample per grid node."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != grid.count:
        raise LengthMismatch(
            f"got {samples.shape[0]} samples for a {grid.count}-node grid"
        )
    return float(np.trapezoid(samples, dx=grid.h, axis=0)) if samples.ndim == 1 else \
        np.trapezoid(samples, dx=grid.h, axis=0)


def cumulative_trapezoid(samples, grid):
    """Running trapezoid integral; node j holds the integral over [t0, t_j]."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != grid.count:
        raise LengthMismatch(
            f"got {samples.shape[0]} samples for a {grid.count}-node grid"
        )
    out = np.zeros_like(samples)
    out[1:] = np.cumsum(0.5 * grid.h * (samples[1:] + samples[:-1]), axis=0)
    return out


def cholesky_pivots(Q):
    """Lower Cholesky factor of Q together with the smallest squared pivot.

    The factorization is run to completion without pivoting; a non-positive
    diagonal entry stops it and is reported as the smallest pivot.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    L = np.zeros_like(Q)
    smallest = np.inf
    for i in range(n):
        d = Q[i, i] - L[i, :i] @ L[i, :i]
        smallest = min(smallest, d)
        if d <= 0:
            return None, smallest
        L[i, i] = np.sqrt(d)
        for j in range(i + 1, n):
            L[j, i] = (Q[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
    return L, smallest


def spd_solve(Q, rhs, pivot_floor=DEFAULT_PIVOT_FLOOR):
    """Solve Q x = rhs for symmetric positive definite Q via Cholesky.

    Returns (x, smallest_pivot).  Raises NotPositiveDefinite when any pivot
    falls at or below pivot_floor * trace(Q)/n, which is the numerical
    signature of a degenerate observability Gram matrix.
    """
    Q = np.asarray(Q, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise LengthMismatch(f"Q must be square, got shape {Q.shape}")
    if rhs.shape[0] != n:
        raise LengthMismatch(f"rhs length {rhs.shape[0]} does not match Q size {n}")
    sym_err = np.max(np.abs(Q - Q.T))
    scale = max(np.max(np.abs(Q)), 1e-300)
    if sym_err > 1e-12 * scale:
        raise ValueError(f"Q is not symmetric (relative asymmetry {sym_err / scale:.3e})")
    floor = pivot_floor * np.trace(Q) / n
    L, smallest = cholesky_pivots(Q)
    if L is None or smallest <= floor:
        raise NotPositiveDefinite(smallest)
    y = np.linalg.solve(L, rhs)
    x = np.linalg.solve(L.T, y)
    return x, smallest
