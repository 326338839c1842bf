"""Ground-truth plant simulation and deterministic sensor corruption."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainExit, NonFiniteState
from .model import InputSignal
from .numerics import Grid


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    h: float
    x0: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        object.__setattr__(self, "y0", np.atleast_1d(np.asarray(self.y0, dtype=float)))


@dataclass(frozen=True)
class SensorModel:
    """Clean sensor (amplitude 0) or additive sinusoid a*sin(f*t) per channel."""

    amplitude: float = 0.0
    frequency: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")
        if self.amplitude > 0 and self.frequency <= 0:
            raise ValueError("noise frequency must be > 0")

    @classmethod
    def clean(cls):
        return cls(0.0, 1.0)


@dataclass(frozen=True)
class Trace:
    grid: Grid
    x_true: np.ndarray  # (count, n)
    y_true: np.ndarray  # (count, k)
    y_meas: np.ndarray  # (count, k)
    u: np.ndarray  # (count, m)


def simulate_plant(spec, input_signal, cfg):
    """Fixed-step RK4 of the coupled (x, y) dynamics over [0, t_end].

    Domain membership is checked at every node; leaving the open model domain
    raises DomainExit with the offending node index.
    """
    if input_signal is None:
        input_signal = InputSignal.zero(spec.m)
    grid = Grid.from_span(0.0, cfg.t_end, cfg.h)
    n, k = spec.n, spec.k
    if not spec.in_domain(cfg.x0, cfg.y0):
        raise DomainExit(0, "initial condition outside the model domain")

    def field(t, s):
        x, y = s[:n], s[n:]
        u = input_signal(t)
        A = np.asarray(spec.eval_A(y, u), dtype=float)
        b = np.asarray(spec.eval_b(y, u), dtype=float)
        C = np.asarray(spec.eval_C(y), dtype=float).reshape(n, k)
        f = np.atleast_1d(np.asarray(spec.eval_f(y, u), dtype=float))
        return np.concatenate([A @ x + b, f + C.T @ x])

    s = np.concatenate([cfg.x0, cfg.y0])
    count = grid.count
    out = np.empty((count, n + k))
    out[0] = s
    h = cfg.h
    for j in range(1, count):
        t = grid.t0 + (j - 1) * h
        k1 = field(t, s)
        k2 = field(t + 0.5 * h, s + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, s + 0.5 * h * k2)
        k4 = field(t + h, s + h * k3)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(s)):
            raise NonFiniteState(j)
        if not spec.in_domain(s[:n], s[n:]):
            raise DomainExit(j)
        out[j] = s

    times = grid.times()
    u_samples = np.vstack([np.atleast_1d(input_signal(t)) for t in times])
    x_true = out[:, :n]
    y_true = out[:, n:]
    return Trace(grid=grid, x_true=x_true, y_true=y_true,
                 y_meas=y_true.copy(), u=u_samples)


def corrupt(trace, sensor):
    """Additive sinusoidal measurement noise; ground truth is untouched."""
    if sensor.amplitude == 0.0:
        return replace(trace, y_meas=trace.y_true.copy())
    t = trace.grid.times()
    noise = sensor.amplitude * np.sin(sensor.frequency * t)
    y_meas = trace.y_true + noise[:, None]
    return replace(trace, y_meas=y_meas)
