"""Window computations: transition quantities, Gram matrix and reconstruction.

Given a recorded output/input window of duration r, the four coupled linear
ODEs

    Phi' = A(y, u) Phi        Phi(0) = I
    theta' = A(y, u) theta + b(y, u)   theta(0) = 0
    q' = Phi' C(y)            q(0) = 0
    xi' = f(y, u) + C'(y) theta        xi(0) = 0

are integrated jointly along the window.  With p(t) = y(t) - y(0) - xi(t),
the Gram matrix Q = int q q' dt and right-hand side v = int q p dt give the
window-initial unmeasured state as x0 = Q^{-1} v, and the reconstruction
operator maps the window to the state at its end: Phi(r) x0 + theta(r).

Between grid nodes, y is interpolated linearly (it is a continuous state)
while u holds the value of the left node (inputs may be discontinuous).
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    KappaVanished,
    NonFiniteState,
    WrongOutputDimension,
)
from .numerics import DEFAULT_PIVOT_FLOOR, Grid, cholesky_pivots, spd_solve, trapezoid

DEFAULT_REL_THRESHOLD = 1e-8


@dataclass(frozen=True)
class IoWindow:
    """Sampled (y, u) history over [0, r] in window-local time."""

    grid: Grid
    y_samples: np.ndarray  # (count, k)
    u_samples: np.ndarray  # (count, m), m >= 1 (zero column for inputless plants)

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y_samples, dtype=float))
        u = np.atleast_2d(np.asarray(self.u_samples, dtype=float))
        if y.shape[0] != self.grid.count or u.shape[0] != self.grid.count:
            raise DimensionMismatch(
                f"window samples ({y.shape[0]}, {u.shape[0]}) do not match "
                f"grid with {self.grid.count} nodes"
            )
        object.__setattr__(self, "y_samples", y)
        object.__setattr__(self, "u_samples", u)

    @property
    def r(self):
        return self.grid.span


@dataclass(frozen=True)
class WindowComputation:
    grid: Grid
    phi: np.ndarray  # (count, n, n)
    theta: np.ndarray  # (count, n)
    q: np.ndarray  # (count, n, k)
    xi: np.ndarray  # (count, k)
    p: np.ndarray  # (count, k)


@dataclass(frozen=True)
class GramSummary:
    Q: np.ndarray
    v: np.ndarray
    smallest_pivot: float
    condition_estimate: float


@dataclass(frozen=True)
class Degenerate:
    null_direction: np.ndarray


@dataclass(frozen=True)
class StronglyObservableOnWindow:
    smallest_eigenvalue: float


def compute_window(spec, window):
    """Integrate the window ODEs for Phi, theta, q, xi and assemble p."""
    n, k = spec.n, spec.k
    grid = window.grid
    y_s = window.y_samples
    u_s = window.u_samples
    count = grid.count
    h = grid.h

    phi = np.empty((count, n, n))
    theta = np.empty((count, n))
    q = np.empty((count, n, k))
    xi = np.empty((count, k))
    phi[0] = np.eye(n)
    theta[0] = 0.0
    q[0] = 0.0
    xi[0] = 0.0

    def packed_rhs(y, u, P, th, Qm, _xi):
        A = np.asarray(spec.eval_A(y, u), dtype=float)
        b = np.asarray(spec.eval_b(y, u), dtype=float)
        C = np.asarray(spec.eval_C(y), dtype=float).reshape(n, k)
        f = np.atleast_1d(np.asarray(spec.eval_f(y, u), dtype=float))
        return A @ P, A @ th + b, P.T @ C, f + C.T @ th

    for j in range(count - 1):
        y0, y1 = y_s[j], y_s[j + 1]
        ym = 0.5 * (y0 + y1)
        u = u_s[j]  # hold over [t_j, t_{j+1})
        P, th, Qm, x = phi[j], theta[j], q[j], xi[j]

        k1 = packed_rhs(y0, u, P, th, Qm, x)
        k2 = packed_rhs(ym, u, P + 0.5 * h * k1[0], th + 0.5 * h * k1[1],
                        Qm + 0.5 * h * k1[2], x + 0.5 * h * k1[3])
        k3 = packed_rhs(ym, u, P + 0.5 * h * k2[0], th + 0.5 * h * k2[1],
                        Qm + 0.5 * h * k2[2], x + 0.5 * h * k2[3])
        k4 = packed_rhs(y1, u, P + h * k3[0], th + h * k3[1],
                        Qm + h * k3[2], x + h * k3[3])

        phi[j + 1] = P + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        theta[j + 1] = th + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        q[j + 1] = Qm + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        xi[j + 1] = x + (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        if not (np.all(np.isfinite(phi[j + 1])) and np.all(np.isfinite(theta[j + 1]))
                and np.all(np.isfinite(q[j + 1])) and np.all(np.isfinite(xi[j + 1]))):
            raise NonFiniteState(j + 1)

    p = y_s - y_s[0] - xi
    return WindowComputation(grid=grid, phi=phi, theta=theta, q=q, xi=xi, p=p)


def gram(wc, grid=None):
    """Gram matrix Q = int q q' dt and right-hand side v = int q p dt."""
    grid = grid or wc.grid
    q = wc.q  # (count, n, k)
    p = wc.p  # (count, k)
    qq = np.einsum("tik,tjk->tij", q, q)
    Q = trapezoid(qq.reshape(grid.count, -1), grid).reshape(q.shape[1], q.shape[1])
    Q = 0.5 * (Q + Q.T)  # enforce exact symmetry
    qp = np.einsum("tik,tk->ti", q, p)
    v = np.asarray(trapezoid(qp, grid))
    _, smallest = cholesky_pivots(Q)
    eigvals = np.linalg.eigvalsh(Q)
    lo, hi = eigvals[0], eigvals[-1]
    cond = np.inf if lo <= 0 else hi / lo
    return GramSummary(Q=Q, v=v, smallest_pivot=float(smallest),
                       condition_estimate=float(cond))


def reconstruct_initial(gs, pivot_floor=DEFAULT_PIVOT_FLOOR):
    """Window-initial unmeasured state Q^{-1} v (raises NotPositiveDefinite)."""
    x0_hat, _ = spd_solve(gs.Q, gs.v, pivot_floor)
    return x0_hat


def apply_P(spec, window, pivot_floor=DEFAULT_PIVOT_FLOOR):
    """Reconstruction operator: unmeasured state at the end of the window.

    For a noiseless window of a strongly observable plant this equals the true
    state at the window end, up to integration error.
    """
    wc = compute_window(spec, window)
    gs = gram(wc)
    x0_hat = reconstruct_initial(gs, pivot_floor)
    return wc.phi[-1] @ x0_hat + wc.theta[-1]


def observability_certificate(gs, rel_threshold=DEFAULT_REL_THRESHOLD):
    """Strong-distinguishability verdict from the Gram spectrum.

    Returns StronglyObservableOnWindow when the smallest eigenvalue clears
    rel_threshold * trace(Q)/n, otherwise Degenerate carrying the approximate
    null direction (eigenvector of the smallest eigenvalue).
    """
    n = gs.Q.shape[0]
    eigvals, eigvecs = np.linalg.eigh(gs.Q)
    tr = np.trace(gs.Q)
    if tr > 0 and eigvals[0] > rel_threshold * tr / n:
        return StronglyObservableOnWindow(smallest_eigenvalue=float(eigvals[0]))
    null = eigvecs[:, 0]
    if tr <= 0:
        null = np.zeros(n)
        null[0] = 1.0
    return Degenerate(null_direction=null)


def determinant_condition(spec, window, wc, node_indices):
    """Determinant of the stacked rows C'(t_i) Phi(t_i) (single-output plants).

    A nonzero value certifies that the window's generating input strongly
    distinguishes the generating state.
    """
    if spec.k != 1:
        raise WrongOutputDimension(f"determinant condition requires k = 1, got k = {spec.k}")
    n = spec.n
    if len(node_indices) != n:
        raise DimensionMismatch(f"need exactly {n} node indices, got {len(node_indices)}")
    rows = np.empty((n, n))
    for i, j in enumerate(node_indices):
        C = np.asarray(spec.eval_C(window.y_samples[j]), dtype=float).reshape(n, 1)
        rows[i] = C[:, 0] @ wc.phi[j]
    return float(np.linalg.det(rows))


@dataclass(frozen=True)
class Example26Spec:
    """Planar system with diagonal drift used to build indistinguishing inputs.

        x1' = a1(y) x1,  x2' = a2(y) x2,  y' = u + c1(y) x1 + c2(y) x2

    ``kappa`` is d/dy ln(c1(y)/c2(y)); the construction requires it to stay
    away from zero along the constructed output trajectory.
    """

    a1: Callable
    a2: Callable
    c1: Callable
    c2: Callable
    kappa: Callable

    def to_system_spec(self):
        from .model import SystemSpec

        def eval_A(y, u):
            yv = float(np.atleast_1d(y)[0])
            return np.diag([self.a1(yv), self.a2(yv)])

        def eval_C(y):
            yv = float(np.atleast_1d(y)[0])
            return np.array([[self.c1(yv)], [self.c2(yv)]])

        return SystemSpec(
            n=2, k=1, m=1,
            eval_A=eval_A,
            eval_b=lambda y, u: np.zeros(2),
            eval_C=eval_C,
            eval_f=lambda y, u: np.atleast_1d(np.asarray(u, dtype=float))[:1],
        )


def indistinguishing_input(ex, x0, y0, grid, kappa_tol=1e-9):
    """Construct the input under which the state (x0, y0) is not distinguished.

    Integrates y' = (a2(y) - a1(y)) / kappa(y) from y0 and evaluates

        u(t) = (a2 - a1)/kappa - c2(y) exp(int a2) (x20 + x10 c1(y0)/c2(y0))

    on the grid.  Returns (u_samples, y_samples).  The window recorded by
    driving the true plant with this input has a singular Gram matrix.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = float(y0)
    if abs(ex.kappa(y0)) <= kappa_tol:
        raise KappaVanished(f"kappa({y0}) = {ex.kappa(y0):.3e}")

    from .numerics import integrate_rk4

    def field(t, s):
        y, _ = s
        kap = ex.kappa(y)
        if abs(kap) <= kappa_tol:
            raise KappaVanished(f"kappa vanished at y = {y:.6g}")
        return np.array([(ex.a2(y) - ex.a1(y)) / kap, ex.a2(y)])

    traj = integrate_rk4(field, np.array([y0, 0.0]), grid)
    y = traj[:, 0]
    int_a2 = traj[:, 1]
    mix = x0[1] + x0[0] * ex.c1(y0) / ex.c2(y0)
    kap = np.array([ex.kappa(v) for v in y])
    if np.any(np.abs(kap) <= kappa_tol):
        raise KappaVanished("kappa crossed zero along the constructed trajectory")
    drift = np.array([(ex.a2(v) - ex.a1(v)) for v in y]) / kap
    c2_along = np.array([ex.c2(v) for v in y])
    u = drift - c2_along * np.exp(int_a2) * mix
    return u.reshape(-1, 1), y.reshape(-1, 1)


def indistinguishable_partner(ex, x0, y0, xi1):
    """The state sharing the output of (x0, y0) under the constructed input.

    Any first component xi1 works; the second is pinned by the construction.
    """
    x0 = np.asarray(x0, dtype=float)
    ratio = ex.c1(float(y0)) / ex.c2(float(y0))
    return np.array([xi1, x0[1] + ratio * (x0[0] - xi1)])
