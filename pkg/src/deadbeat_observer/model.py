"""System descriptions: plants whose dynamics are linear in the unmeasured state.

A SystemSpec packages the four evaluator maps

    x' = A(y, u) x + b(y, u)
    y_i' = f_i(y, u) + sum_j C[j, i](y) x_j

together with explicit domain predicates for the state set, the output set
and the admissible input set.  ``eval_C`` returns the n-by-k matrix whose
transpose multiplies x in the output dynamics.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DomainViolation


@dataclass(frozen=True)
class SystemSpec:
    n: int
    k: int
    m: int
    eval_A: Callable
    eval_b: Callable
    eval_C: Callable
    eval_f: Callable
    in_domain: Callable = field(default=lambda x, y: True)
    in_output_domain: Callable = field(default=lambda y: True)
    in_input_set: Callable = field(default=lambda u: True)


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    y: np.ndarray


class InputSignal:
    """Admissible input as a function of time.

    Constant and closure inputs are evaluated exactly at any t; sampled
    piecewise-constant inputs hold the value of the most recent node.
    """

    def __init__(self, fn, m):
        self._fn = fn
        self.m = m

    def __call__(self, t):
        return self._fn(t)

    @classmethod
    def constant(cls, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return cls(lambda t: u, u.size)

    @classmethod
    def zero(cls, m):
        u = np.zeros(max(m, 1))
        return cls(lambda t: u, m)

    @classmethod
    def sampled(cls, grid, values):
        """Piecewise-constant hold of per-node samples on ``grid``."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != grid.count:
            raise DimensionMismatch(
                f"{values.shape[0]} input samples for a {grid.count}-node grid"
            )

        def fn(t):
            j = int(np.floor((t - grid.t0) / grid.h + 1e-9))
            j = min(max(j, 0), grid.count - 1)
            return values[j]

        return cls(fn, values.shape[1])

    @classmethod
    def closure(cls, fn, m):
        return cls(lambda t: np.atleast_1d(np.asarray(fn(t), dtype=float)), m)


def eval_rhs(spec, state, u):
    """Right-hand side (xdot, ydot) of the plant at the given state and input."""
    x = np.asarray(state.x, dtype=float)
    y = np.asarray(state.y, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not spec.in_domain(x, y):
        raise DomainViolation(f"state (x={x}, y={y}) outside the model domain")
    if not spec.in_input_set(u):
        raise DomainViolation(f"input {u} outside the admissible input set")
    A = np.asarray(spec.eval_A(y, u), dtype=float)
    b = np.asarray(spec.eval_b(y, u), dtype=float)
    C = np.asarray(spec.eval_C(y), dtype=float).reshape(spec.n, spec.k)
    f = np.atleast_1d(np.asarray(spec.eval_f(y, u), dtype=float))
    xdot = A @ x + b
    ydot = f + C.T @ x
    return xdot, ydot


def make_lti(A, b, C, f):
    """SystemSpec with constant evaluators; domains are all of R^n x R^k.

    ``C`` is the n-by-k matrix whose transpose appears in the output dynamics.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (n,):
        raise DimensionMismatch(f"b must have length {n}, got {b.shape}")
    C = np.asarray(C, dtype=float).reshape(n, -1)
    k = C.shape[1]
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if f.shape != (k,):
        raise DimensionMismatch(f"f must have length {k}, got {f.shape}")
    return SystemSpec(
        n=n,
        k=k,
        m=1,
        eval_A=lambda y, u: A,
        eval_b=lambda y, u: b,
        eval_C=lambda y: C,
        eval_f=lambda y, u: f,
    )


def scalar_oracle_spec():
    """The canonical test system x' = 0, y' = x (n = k = 1)."""
    return make_lti(np.zeros((1, 1)), np.zeros(1), np.ones((1, 1)), np.zeros(1))
