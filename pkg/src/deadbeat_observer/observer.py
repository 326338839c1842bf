"""Hybrid dead-beat observer runtime.

Between resets the estimate flows along the model dynamics; every r seconds
the buffered output/input window is fed to the reconstruction operator and
the estimate jumps to the exact state at the window's end (up to integration
error).  Two variants:

  * full: internal output copy w drives the flow; measured y enters only
    through the jump w <- y at resets.
  * reduced: the flow is driven directly by the measured output (requires
    the product-domain hypothesis on the model).

A degenerate reset window (singular Gram matrix) is either skipped, keeping
the flowed estimate and retrying one window later ("hold"), or raised as
GramDegenerate ("fail").
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainViolation, GramDegenerate, NonFiniteState, NotPositiveDefinite
from .numerics import DEFAULT_PIVOT_FLOOR, Grid
from .window import DEFAULT_REL_THRESHOLD, IoWindow, apply_P

FULL = "full"
REDUCED = "reduced"
HOLD = "hold"
FAIL = "fail"


@dataclass(frozen=True)
class ObserverConfig:
    r: float
    h: float
    mode: str = REDUCED
    rel_threshold: float = DEFAULT_REL_THRESHOLD
    pivot_floor: float = DEFAULT_PIVOT_FLOOR
    on_degenerate: str = HOLD

    def __post_init__(self):
        if self.mode not in (FULL, REDUCED):
            raise ValueError(f"mode must be '{FULL}' or '{REDUCED}', got {self.mode!r}")
        if self.on_degenerate not in (HOLD, FAIL):
            raise ValueError(f"on_degenerate must be '{HOLD}' or '{FAIL}'")
        M = self.steps_per_window
        if M < 2 or abs(M * self.h - self.r) > 1e-9 * max(self.r, self.h):
            raise ValueError(
                f"window length r={self.r} must be an integer multiple (>= 2) of h={self.h}"
            )

    @property
    def steps_per_window(self):
        return int(round(self.r / self.h))


@dataclass(frozen=True)
class ObserverSnapshot:
    t: float
    z: np.ndarray
    w: np.ndarray  # unused in reduced mode
    next_reset: float
    history: tuple  # ((y, u) per node, most recent last), spans at most r
    degenerate_events: int = 0
    last_reset_applied: bool = False


@dataclass(frozen=True)
class EstimateTrace:
    grid: Grid
    z: np.ndarray  # (count, n)
    w: np.ndarray  # (count, k); mirrors measurements in reduced mode
    reset_flags: np.ndarray  # (count,), 1 at nodes where the jump map fired
    degenerate_flags: np.ndarray  # (count,), 1 at skipped (degenerate) resets
    degenerate_events: int


def observer_init(spec, config, z0, w0=None, t0=0.0, y0=None, u0=None):
    """Snapshot at t0; the initial measurement seeds the window buffer.

    ``y0``/``u0`` are the measurement and input at t0 (required when the
    snapshot will be stepped, so that the first reset window spans exactly
    [t0, t0 + r]).  In full mode ``w0`` may differ from the measured output.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    if w0 is None:
        if config.mode == FULL:
            raise ValueError("full mode requires an initial output estimate w0")
        w0 = np.atleast_1d(np.asarray(y0, dtype=float)) if y0 is not None \
            else np.zeros(spec.k)
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    y_ref = np.atleast_1d(np.asarray(y0, dtype=float)) if y0 is not None else w0
    if not spec.in_domain(z0, y_ref):
        raise DomainViolation(f"initial estimate (z0={z0}, y={y_ref}) outside the model domain")
    history = ()
    if y0 is not None:
        u0 = np.atleast_1d(np.asarray(u0, dtype=float)) if u0 is not None \
            else np.zeros(max(spec.m, 1))
        history = ((np.atleast_1d(np.asarray(y0, dtype=float)), u0),)
    return ObserverSnapshot(t=t0, z=z0, w=w0, next_reset=t0 + config.r,
                            history=history)


def _flow_step(spec, config, z, w, y_prev, y_new, u):
    """One RK4 step of the mode's flow field over [t, t+h]."""
    h = config.h
    n, k = spec.n, spec.k

    if config.mode == FULL:
        def rhs(state):
            zc, wc = state[:n], state[n:]
            A = np.asarray(spec.eval_A(wc, u), dtype=float)
            b = np.asarray(spec.eval_b(wc, u), dtype=float)
            C = np.asarray(spec.eval_C(wc), dtype=float).reshape(n, k)
            f = np.atleast_1d(np.asarray(spec.eval_f(wc, u), dtype=float))
            return np.concatenate([A @ zc + b, f + C.T @ zc])

        s = np.concatenate([z, w])
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return s[:n], s[n:]

    # reduced: flow driven by the measured output, interpolated linearly
    ym = 0.5 * (y_prev + y_new)

    def rhs(zc, yc):
        A = np.asarray(spec.eval_A(yc, u), dtype=float)
        b = np.asarray(spec.eval_b(yc, u), dtype=float)
        return A @ zc + b

    k1 = rhs(z, y_prev)
    k2 = rhs(z + 0.5 * h * k1, ym)
    k3 = rhs(z + 0.5 * h * k2, ym)
    k4 = rhs(z + h * k3, y_new)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), w


def observer_step(spec, config, snap, y_meas, u):
    """Advance one step of size h; ``y_meas`` is the measurement at t + h.

    ``u`` is the input held over [t, t+h).  When the new time reaches the
    reset clock, the buffered window is fed to the reconstruction operator.
    """
    if not snap.history:
        raise ValueError("snapshot has no buffered measurement at its own time; "
                         "initialize with y0")
    y_meas = np.atleast_1d(np.asarray(y_meas, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y_prev = snap.history[-1][0]

    z, w = _flow_step(spec, config, snap.z, snap.w, y_prev, y_meas, u)
    if not np.all(np.isfinite(z)) or not np.all(np.isfinite(w)):
        raise NonFiniteState(None, f"observer flow diverged at t = {snap.t + config.h:.6g}")
    t_new = snap.t + config.h

    M = config.steps_per_window
    history = list(snap.history[-M:])
    history[-1] = (y_prev, u)  # u holds from the node we just left
    history.append((y_meas, u))

    degenerate_events = snap.degenerate_events
    next_reset = snap.next_reset
    reset_applied = False
    if t_new >= next_reset - 1e-9 * config.h:
        if len(history) == M + 1:
            win = IoWindow(
                grid=Grid(0.0, config.h, M + 1),
                y_samples=np.vstack([e[0] for e in history]),
                u_samples=np.vstack([e[1] for e in history]),
            )
            try:
                z = apply_P(spec, win, config.pivot_floor)
                if config.mode == FULL:
                    w = y_meas.copy()
                reset_applied = True
            except NotPositiveDefinite as exc:
                if config.on_degenerate == FAIL:
                    raise GramDegenerate(
                        f"degenerate reset window at t = {t_new:.6g}: {exc}"
                    ) from exc
                degenerate_events += 1
        else:
            # not enough buffered history (clock started mid-stream): skip
            degenerate_events += 1
        next_reset = next_reset + config.r

    y_check = y_meas if config.mode == REDUCED else w
    if not spec.in_domain(z, y_check):
        raise DomainViolation(
            f"observer state left the model domain at t = {t_new:.6g} (z={z})"
        )
    return replace(snap, t=t_new, z=z, w=w, next_reset=next_reset,
                   history=tuple(history), degenerate_events=degenerate_events,
                   last_reset_applied=reset_applied)


def run_observer(spec, config, trace, z0, w0=None):
    """Replay a recorded trace through the observer; fully deterministic."""
    grid = trace.grid
    if abs(grid.h - config.h) > 1e-12 * max(grid.h, config.h):
        raise ValueError(
            f"trace step {grid.h} does not match observer step {config.h}"
        )
    snap = observer_init(spec, config, z0, w0, t0=grid.t0,
                         y0=trace.y_meas[0], u0=trace.u[0])
    count = grid.count
    z = np.empty((count, spec.n))
    w = np.empty((count, spec.k))
    reset_flags = np.zeros(count, dtype=int)
    degen_flags = np.zeros(count, dtype=int)
    z[0] = snap.z
    w[0] = snap.w if config.mode == FULL else trace.y_meas[0]
    for j in range(1, count):
        before = snap.degenerate_events
        snap = observer_step(spec, config, snap, trace.y_meas[j], trace.u[j - 1])
        z[j] = snap.z
        w[j] = snap.w if config.mode == FULL else trace.y_meas[j]
        reset_flags[j] = int(snap.last_reset_applied)
        degen_flags[j] = int(snap.degenerate_events > before)
    return EstimateTrace(grid=grid, z=z, w=w, reset_flags=reset_flags,
                         degenerate_flags=degen_flags,
                         degenerate_events=snap.degenerate_events)
