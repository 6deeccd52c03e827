"""
Discrete-time kinematic bicycle model and constant-input trajectory primitives.
"""
from __future__ import annotations

import math
from collections import namedtuple
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from .models import VehicleParams
from .utils import VecCostException

VehicleState = namedtuple("VehicleState", "x y v psi beta")
ControlInput = namedtuple("ControlInput", "a delta")


class DynamicsError(VecCostException, ValueError):
    """
    Raised for inputs outside the model's domain (steering at or beyond pi/2,
    non-finite values).
    """


def _check_finite(values, what):
    if not all(math.isfinite(v) for v in values):
        raise DynamicsError("%s must be finite, got %r" % (what, tuple(values)))


def step(s: VehicleState, u: ControlInput, p: VehicleParams) -> VehicleState:
    """
    Advances the state by one time step `p.dt` under the input `u`, then clamps the
    speed to `[p.v_min, p.v_max]`. The sideslip of the next state depends only on
    the steering angle.
    """
    _check_finite(s, "state")
    _check_finite(u, "control input")
    if abs(u.delta) >= math.pi / 2:
        raise DynamicsError("Steering angle %r is outside (-pi/2, pi/2)" % u.delta)
    x, y, v, psi, beta = s
    dt = p.dt
    heading = psi + beta
    v_next = min(max(v + u.a * dt, p.v_min), p.v_max)
    return VehicleState(
        x + v * math.cos(heading) * dt,
        y + v * math.sin(heading) * dt,
        v_next,
        psi + v / p.l_r * math.sin(beta) * dt,
        math.atan(p.l_r / (p.l_r + p.l_f) * math.tan(u.delta)) * dt,
    )


def action_set(p: VehicleParams) -> list[ControlInput]:
    """
    Returns the nine trajectory primitives: braking, coasting and accelerating, each
    combined with steering right, straight and left. Acceleration varies slowest.
    """
    accels = (-p.accel_mag, 0.0, p.accel_mag)
    steers = (-p.steer_mag, 0.0, p.steer_mag)
    return [ControlInput(a, delta) for a, delta in product(accels, steers)]


class Trajectory:
    """
    A sequence of states produced by holding one input constant. Index 0 is the
    initial state.
    """

    def __init__(self, states: Sequence[VehicleState], control: ControlInput = None):
        assert len(states) >= 1, "A trajectory holds at least its initial state"
        self._states = np.array(states, dtype=float).reshape(len(states), len(VehicleState._fields))
        self._states.setflags(write=False)
        self.control = control

    def __len__(self):
        return len(self._states)

    def __getitem__(self, index) -> VehicleState:
        return VehicleState(*self._states[index].tolist())

    def __iter__(self) -> Iterator[VehicleState]:
        for row in self._states:
            yield VehicleState(*row.tolist())

    def __eq__(self, other):
        return isinstance(other, Trajectory) and np.array_equal(self._states, other._states)

    def __repr__(self):
        return "<Trajectory %d states control=%r>" % (len(self), self.control)

    @property
    def states(self) -> np.ndarray:
        """
        The states as an array with columns `x, y, v, psi, beta`.
        """
        return self._states

    @property
    def positions(self) -> np.ndarray:
        return self._states[:, :2]

    @property
    def initial(self) -> VehicleState:
        return self[0]

    @property
    def terminal(self) -> VehicleState:
        return self[-1]


def rollout(s: VehicleState, u: ControlInput, p: VehicleParams) -> Trajectory:
    """
    Applies `u` for `p.horizon` steps starting from `s`, returning `horizon + 1` states.
    """
    states = [VehicleState(*s)]
    for _ in range(p.horizon):
        states.append(step(states[-1], u, p))
    return Trajectory(states, ControlInput(*u))


def rollout_all(s: VehicleState, p: VehicleParams) -> list[Trajectory]:
    """
    Rolls out every primitive of `action_set(p)` from the same state, in action order.
    """
    return [rollout(s, u, p) for u in action_set(p)]


__all__ = [
    "VehicleState",
    "ControlInput",
    "DynamicsError",
    "Trajectory",
    "step",
    "action_set",
    "rollout",
    "rollout_all",
]
