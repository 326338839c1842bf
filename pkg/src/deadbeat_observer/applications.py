"""Worked applications: batch reactor and sinusoid frequency estimation.

The reactor (reactions A -> B -> C with first-order Arrhenius kinetics and a
constant-temperature jacket) measures only the temperature; the observer
reconstructs both concentrations.  The frequency application treats
y(t) = A sin(w t + phi) as the output of a plant whose constant unmeasured
state is -w^2, so one reset window yields the frequency exactly (for clean
signals) or approximately (under additive sinusoidal noise).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    HypothesisFails,
    InvalidParams,
    NonNegativeZ2,
    SingularDenominator,
)
from .model import SystemSpec
from .numerics import Grid, cumulative_trapezoid, trapezoid
from .plant import SensorModel, SimConfig, corrupt, simulate_plant
from .window import IoWindow


# ---------------------------------------------------------------------------
# Batch reactor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReactorParams:
    k1: float  # pre-exponential rate of A -> B (1/s)
    k2: float  # pre-exponential rate of B -> C (1/s)
    E1: float  # activation temperature of A -> B (K)
    E2: float  # activation temperature of B -> C (K)
    J1: float  # adiabatic temperature rise per unit of reaction 1
    J2: float  # adiabatic temperature rise per unit of reaction 2
    h_coef: float  # jacket heat-transfer coefficient (1/s)
    Ts: float  # jacket temperature (K)
    c1_bar: float  # upper bound on c_A
    c2_bar: float  # upper bound on c_B
    Tmin: float  # lower temperature bound (K)
    Tmax: float  # upper temperature bound (K)
    a_margin: float  # claimed observability margin (K/s)

    def validate(self):
        vals = [self.k1, self.k2, self.E1, self.E2, self.J1, self.J2,
                self.h_coef, self.Ts, self.c1_bar, self.c2_bar,
                self.Tmin, self.Tmax, self.a_margin]
        if any(v <= 0 for v in vals):
            raise InvalidParams("all reactor parameters must be positive")
        if not (0 < self.Tmin <= self.Ts):
            raise InvalidParams("need 0 < Tmin <= Ts")
        heat = (self.J1 * self.k1 * self.c1_bar
                + self.J2 * self.k2 * self.c2_bar) / self.h_coef + self.Ts
        if heat > self.Tmax + 1e-12:
            raise InvalidParams(
                f"temperature bound violated: (J1 k1 c1 + J2 k2 c2)/h + Ts = "
                f"{heat:.6g} > Tmax = {self.Tmax:.6g}"
            )
        if self.E1 >= self.E2:
            if (self.k1 / self.k2) * self.c1_bar >= self.c2_bar:
                raise InvalidParams("need (k1/k2) c1_bar < c2_bar when E1 >= E2")
        else:
            lhs = (self.k1 / self.k2) * np.exp((self.E2 - self.E1) / self.Tmin) * self.c1_bar
            if lhs >= self.c2_bar:
                raise InvalidParams(
                    "need (k1/k2) exp((E2-E1)/Tmin) c1_bar < c2_bar when E1 < E2"
                )
        return self


def canonical_reactor_params():
    """The parameter set all reactor regression values are pinned against.

    E1 < E2 with (J1 + J2) k2 < J1 k1, so the observability margin hypothesis
    holds automatically; the domain-bound inequalities are satisfied with
    room to spare.
    """
    return ReactorParams(
        k1=0.8, k2=0.3, E1=300.0, E2=400.0, J1=30.0, J2=10.0,
        h_coef=1.0, Ts=310.0, c1_bar=1.0, c2_bar=4.0,
        Tmin=300.0, Tmax=350.0, a_margin=150.0,
    ).validate()


def reactor_spec(p):
    """SystemSpec for the reactor: x = (c_A, c_B), y = T, no input."""
    p.validate()
    k1, k2, E1, E2 = p.k1, p.k2, p.E1, p.E2

    def rate1(T):
        return k1 * np.exp(-E1 / T)

    def rate2(T):
        return k2 * np.exp(-E2 / T)

    def eval_A(y, u):
        T = float(np.atleast_1d(y)[0])
        r1, r2 = rate1(T), rate2(T)
        return np.array([[-r1, 0.0], [r1, -r2]])

    def eval_C(y):
        T = float(np.atleast_1d(y)[0])
        return np.array([[p.J1 * rate1(T)], [p.J2 * rate2(T)]])

    def eval_f(y, u):
        T = float(np.atleast_1d(y)[0])
        return np.array([p.h_coef * (p.Ts - T)])

    def in_domain(x, y):
        T = float(np.atleast_1d(y)[0])
        return (0.0 < x[0] < p.c1_bar and 0.0 < x[1] < p.c2_bar
                and p.Tmin < T < p.Tmax)

    return SystemSpec(
        n=2, k=1, m=1,
        eval_A=eval_A,
        eval_b=lambda y, u: np.zeros(2),
        eval_C=eval_C,
        eval_f=eval_f,
        in_domain=in_domain,
        in_output_domain=lambda y: p.Tmin < float(np.atleast_1d(y)[0]) < p.Tmax,
    )


@dataclass(frozen=True)
class HypothesisHolds:
    margin: float
    gated_points: int


@dataclass(frozen=True)
class HypothesisFailsAt:
    worst_T: float
    worst_value: float


def _margin_expression(p, T):
    """Drift of the temperature along a hypothetical indistinguishable trajectory."""
    bracket = (p.J1 + p.J2) * p.k2 - p.J1 * p.k1 * np.exp((p.E2 - p.E1) / T)
    return T * T / ((p.E2 - p.E1) * p.J1) * np.exp(-p.E2 / T) * bracket


def check_hypothesis(p, which="A1", T_grid=None):
    """Observability-margin hypothesis check over a temperature grid.

    For equal activation temperatures the condition is algebraic:
    (J1 + J2) k2 != J1 k1.  Otherwise the signed drift expression is scanned
    over temperatures where the gating inequality fires; "A1" requires it
    <= -a on that set, "A2" requires it >= a.  The returned margin is the
    worst |drift| over the gated set (over the whole grid when no point is
    gated, in which case no indistinguishable trajectory exists at all).
    """
    if which not in ("A1", "A2"):
        raise ValueError(f"which must be 'A1' or 'A2', got {which!r}")
    if p.E1 == p.E2:
        gap = abs((p.J1 + p.J2) * p.k2 - p.J1 * p.k1)
        ref = max((p.J1 + p.J2) * p.k2, p.J1 * p.k1)
        if gap <= 1e-12 * ref:
            return HypothesisFailsAt(worst_T=p.Tmin, worst_value=0.0)
        return HypothesisHolds(margin=gap, gated_points=0)
    if T_grid is None:
        T_grid = np.linspace(p.Tmin, p.Tmax, 10001)[1:-1]
    T_grid = np.asarray(T_grid, dtype=float)
    drift = _margin_expression(p, T_grid)
    gated = drift / p.h_coef + T_grid > p.Ts
    active = T_grid[gated] if np.any(gated) else T_grid
    vals = drift[gated] if np.any(gated) else drift
    if which == "A1":
        worst = np.argmax(vals)
        if vals[worst] > -p.a_margin and np.any(gated):
            return HypothesisFailsAt(worst_T=float(active[worst]),
                                     worst_value=float(vals[worst]))
        return HypothesisHolds(margin=float(-np.max(vals)),
                               gated_points=int(np.count_nonzero(gated)))
    worst = np.argmin(vals)
    if vals[worst] < p.a_margin and np.any(gated):
        return HypothesisFailsAt(worst_T=float(active[worst]),
                                 worst_value=float(vals[worst]))
    return HypothesisHolds(margin=float(np.min(vals)),
                           gated_points=int(np.count_nonzero(gated)))


DEFAULT_EQUAL_E_WINDOW = 1.0  # any r > 0 works when E1 = E2; a documented default


def min_window_reactor(p, which="A1", default_r=DEFAULT_EQUAL_E_WINDOW):
    """Smallest window length guaranteeing strong observability."""
    result = check_hypothesis(p, which)
    if isinstance(result, HypothesisFailsAt):
        raise HypothesisFails(
            f"hypothesis {which} fails at T = {result.worst_T:.6g} "
            f"(value {result.worst_value:.6g})"
        )
    if p.E1 == p.E2:
        return default_r
    a = min(p.a_margin, result.margin)
    return (p.Tmax - p.Tmin) / a


@dataclass(frozen=True)
class ReactorGains:
    G: np.ndarray  # least-squares coefficients (window-initial concentrations)
    phi1: np.ndarray
    phi2: np.ndarray
    Phi_r: np.ndarray  # transition matrix over the window
    state_estimate: np.ndarray  # Phi_r @ G: concentrations at the window end


def reactor_gains(T_window, p, grid, den_tol=1e-12):
    """Closed-form reduced-order reconstruction from a temperature window.

    Builds the two kernel functions phi1, phi2 by nested quadrature, solves
    the 2x2 least-squares system for the window-initial concentrations and
    maps them forward with the explicit lower-triangular transition matrix.
    """
    T = np.asarray(T_window, dtype=float).reshape(-1)
    if T.shape[0] != grid.count:
        raise ValueError(f"{T.shape[0]} temperature samples for a {grid.count}-node grid")
    if np.any(T <= p.Tmin) or np.any(T >= p.Tmax):
        raise InvalidParams("temperature window leaves (Tmin, Tmax)")
    r1 = p.k1 * np.exp(-p.E1 / T)
    r2 = p.k2 * np.exp(-p.E2 / T)
    K1 = cumulative_trapezoid(r1, grid)
    K2 = cumulative_trapezoid(r2, grid)
    # I(t) = int_0^t exp(-E1/T(tau) - (K2(t) - K2(tau)) - K1(tau)) dtau
    inner = cumulative_trapezoid(np.exp(-p.E1 / T + K2 - K1), grid)
    I = np.exp(-K2) * inner
    phi1 = (p.J1 + p.J2) * (1.0 - np.exp(-K1)) - p.J2 * p.k1 * I
    phi2 = p.J2 * (1.0 - np.exp(-K2))
    psi = T - T[0] - cumulative_trapezoid(p.h_coef * (p.Ts - T), grid)

    s11 = trapezoid(phi1 * phi1, grid)
    s22 = trapezoid(phi2 * phi2, grid)
    s12 = trapezoid(phi1 * phi2, grid)
    b1 = trapezoid(psi * phi1, grid)
    b2 = trapezoid(psi * phi2, grid)
    den = s11 * s22 - s12 * s12
    if den <= den_tol * max(s11 * s22, 1e-300):
        raise SingularDenominator(
            f"kernel Gram determinant {den:.3e} is numerically singular"
        )
    G = np.array([(s22 * b1 - s12 * b2) / den, (s11 * b2 - s12 * b1) / den])
    Phi_r = np.array([
        [np.exp(-K1[-1]), 0.0],
        [p.k1 * I[-1], np.exp(-K2[-1])],
    ])
    return ReactorGains(G=G, phi1=phi1, phi2=phi2, Phi_r=Phi_r,
                        state_estimate=Phi_r @ G)


def optimal_stop(z, T, p):
    """Signed rate balance; its zero crossing marks the peak of c_B."""
    return (p.k1 * np.exp(-p.E1 / T) * z[0]
            - p.k2 * np.exp(-p.E2 / T) * z[1])


# ---------------------------------------------------------------------------
# Frequency estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyScenario:
    amplitude: float = 2.0  # signal amplitude
    omega: float = 3.0  # true frequency (rad/s)
    phase: float = 0.0  # phase (rad)
    noise_amplitude: float = 0.0
    noise_frequency: float = 10.0  # rad/s
    r: float = 1.0  # window length (s)
    h: float = None  # grid step; defaults to r/2000

    def __post_init__(self):
        if self.amplitude <= 0 or self.omega <= 0 or self.r <= 0:
            raise ValueError("amplitude, omega and r must be positive")
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")
        if self.h is None:
            object.__setattr__(self, "h", self.r / 2000.0)

    def sensor(self):
        return SensorModel(self.noise_amplitude, self.noise_frequency)

    def initial_state(self):
        """Plant initial condition generating A sin(w t + phase)."""
        x0 = np.array([self.amplitude * self.omega * np.cos(self.phase),
                       -self.omega ** 2])
        y0 = np.array([self.amplitude * np.sin(self.phase)])
        return x0, y0


def freq_spec(relaxed_domain=False):
    """Plant casting frequency estimation as state reconstruction.

        y' = x1,  x1' = x2 y,  x2' = 0   with x2 = -omega^2.

    The default domain excludes x2 >= 0 so that the frequency readout is
    well defined; ``relaxed_domain`` drops that restriction.
    """

    def eval_A(y, u):
        return np.array([[0.0, float(np.atleast_1d(y)[0])], [0.0, 0.0]])

    def in_domain(x, y):
        yv = float(np.atleast_1d(y)[0])
        if yv * yv + x[0] * x[0] <= 0.0:
            return False
        return True if relaxed_domain else x[1] < 0.0

    return SystemSpec(
        n=2, k=1, m=1,
        eval_A=eval_A,
        eval_b=lambda y, u: np.zeros(2),
        eval_C=lambda y: np.array([[1.0], [0.0]]),
        eval_f=lambda y, u: np.zeros(1),
        in_domain=in_domain,
    )


def freq_closed_form(window, den_tol=1e-12):
    """Closed-form window reconstruction (z1, z2) for the frequency plant.

    phi(t) is the double integral of the output; the two quotients realize
    the generic Gram least-squares solution for this particular plant.
    """
    grid = window.grid
    y = window.y_samples[:, 0]
    t = grid.times() - grid.t0
    r = grid.span
    Y = cumulative_trapezoid(y, grid)
    phi = cumulative_trapezoid(Y, grid)
    I_pp = trapezoid(phi * phi, grid)
    I_tp = trapezoid(t * phi, grid)
    I_yt = trapezoid((y - y[0]) * t, grid)
    I_yp = trapezoid((y - y[0]) * phi, grid)
    den = r ** 3 * I_pp - 3.0 * I_tp ** 2
    scale = max(r ** 3 * I_pp, 1e-300)
    if den <= den_tol * scale:
        raise SingularDenominator(
            f"window denominator {den:.3e} is numerically singular"
        )
    z2 = (-3.0 * I_tp * I_yt + r ** 3 * I_yp) / den
    z1 = (3.0 * (I_pp - Y[-1] * I_tp) * I_yt
          + (r ** 3 * Y[-1] - 3.0 * I_tp) * I_yp) / den
    return float(z1), float(z2)


def omega_hat(z2):
    """Frequency readout sqrt(-z2); valid only in the admissible region z2 < 0."""
    if z2 >= 0:
        raise NonNegativeZ2(f"z2 = {z2:.6g} is not negative")
    return float(np.sqrt(-z2))


def _window_from_scenario(scn, phase=None, r=None, h=None):
    """Simulate the plant, corrupt the output and cut the window [0, r]."""
    phase = scn.phase if phase is None else phase
    r = scn.r if r is None else r
    h = scn.h if h is None else h
    scn_eff = FrequencyScenario(amplitude=scn.amplitude, omega=scn.omega,
                                phase=phase, noise_amplitude=scn.noise_amplitude,
                                noise_frequency=scn.noise_frequency, r=r, h=h)
    spec = freq_spec()
    x0, y0 = scn_eff.initial_state()
    trace = simulate_plant(spec, None, SimConfig(t_end=r, h=h, x0=x0, y0=y0))
    trace = corrupt(trace, scn_eff.sensor())
    return IoWindow(grid=trace.grid, y_samples=trace.y_meas, u_samples=trace.u)


def estimate_frequency(scn, phase=None, r=None, h=None):
    """Frequency estimate from a single window of the (possibly noisy) signal."""
    window = _window_from_scenario(scn, phase=phase, r=r, h=h)
    _, z2 = freq_closed_form(window)
    return omega_hat(z2)


def phase_sweep(scn, phi_grid=None):
    """Relative frequency-estimation error as a function of the signal phase.

    Returns (phases, omega_hats, rel_errors, max_rel_error).
    """
    if phi_grid is None:
        phi_grid = np.linspace(0.0, 2.0 * np.pi, 64)
    phi_grid = np.asarray(phi_grid, dtype=float)
    omegas = np.array([estimate_frequency(scn, phase=ph) for ph in phi_grid])
    errors = np.abs(omegas - scn.omega) / scn.omega
    return phi_grid, omegas, errors, float(np.max(errors))


def horizon_sweep(scn, r_grid):
    """Relative frequency-estimation error as a function of the window length.

    Each window length uses a grid step of r/2000 unless the scenario pins h.
    Returns (r_values, omega_hats, rel_errors).
    """
    r_grid = np.asarray(r_grid, dtype=float)
    omegas = []
    for r in r_grid:
        h = scn.h if scn.h is not None and abs(scn.r - r) < 1e-12 else r / 2000.0
        omegas.append(estimate_frequency(scn, r=float(r), h=h))
    omegas = np.array(omegas)
    errors = np.abs(omegas - scn.omega) / scn.omega
    return r_grid, omegas, errors


# ---------------------------------------------------------------------------
# Scalar reduced-order observer
# ---------------------------------------------------------------------------

def scalar_observer_P(window, a_eval, f_eval, c_eval, den_tol=1e-12):
    """Closed-form reconstruction for scalar plants x' = a(y,u) x, y' = f + c(y) x.

    Evaluates the single-fraction formula by nested quadrature:
    exp(int a) times the quotient int p g / int g^2 with
    g(tau) = int_0^tau c(y) exp(int_0^s a) ds and p = y - y(0) - int f.
    """
    grid = window.grid
    y = window.y_samples[:, 0]
    u = window.u_samples
    a_s = np.array([a_eval(y[j], u[j]) for j in range(grid.count)])
    f_s = np.array([f_eval(y[j], u[j]) for j in range(grid.count)])
    c_s = np.array([c_eval(y[j]) for j in range(grid.count)])
    int_a = cumulative_trapezoid(a_s, grid)
    g = cumulative_trapezoid(c_s * np.exp(int_a), grid)
    p = y - y[0] - cumulative_trapezoid(f_s, grid)
    num = trapezoid(p * g, grid)
    den = trapezoid(g * g, grid)
    if den <= den_tol * max(np.max(g * g) * grid.span, 1e-300):
        raise SingularDenominator(f"kernel energy {den:.3e} is numerically singular")
    return float(np.exp(int_a[-1]) * num / den)
