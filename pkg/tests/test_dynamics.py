import math
import unittest

import numpy as np

from veccost.dynamics import *
from veccost.models import VehicleParams


class StepTestCase(unittest.TestCase):

    def setUp(self):
        self.params = VehicleParams()

    def test_straight_line(self):
        s = step(VehicleState(0, 0, 1, 0, 0), ControlInput(0, 0), self.params)
        self.assertEqual(s, (0.1, 0.0, 1.0, 0.0, 0.0))

    def test_rest_is_fixpoint(self):
        s = VehicleState(0.0, 0.0, 0.0, 0.0, 0.0)
        self.assertEqual(step(s, ControlInput(0, 0), self.params), s)

    def test_steering(self):
        s = step(VehicleState(0, 0, 1, 0, 0), ControlInput(0, 0.2), self.params)
        self.assertAlmostEqual(s.beta, math.atan(0.5 * math.tan(0.2)) * 0.1)
        self.assertAlmostEqual(s.beta, 0.010101, places=6)
        self.assertEqual(s.x, 0.1)
        self.assertEqual(s.psi, 0.0)
        # The sideslip turns the heading on the following step
        s = step(s, ControlInput(0, 0.2), self.params)
        self.assertGreater(s.psi, 0)
        self.assertGreater(s.y, 0)

    def test_speed_clamp(self):
        params = VehicleParams(v_min=0.5, v_max=2)
        self.assertEqual(step(VehicleState(0, 0, 1.95, 0, 0), ControlInput(5, 0), params).v, 2.0)
        self.assertEqual(step(VehicleState(0, 0, 0.6, 0, 0), ControlInput(-5, 0), params).v, 0.5)
        for s in rollout(VehicleState(0, 0, 1, 0, 0), ControlInput(2, 0.3), params):
            self.assertLessEqual(s.v, 2.0)

    def test_domain_errors(self):
        s = VehicleState(0, 0, 1, 0, 0)
        for delta in (math.pi / 2, -math.pi / 2, 2.0):
            with self.assertRaises(DynamicsError):
                step(s, ControlInput(0, delta), self.params)
        with self.assertRaises(DynamicsError):
            step(s, ControlInput(float('nan'), 0), self.params)
        with self.assertRaises(DynamicsError):
            step(VehicleState(0, float('inf'), 1, 0, 0), ControlInput(0, 0), self.params)
        # Also a plain ValueError
        with self.assertRaises(ValueError):
            step(s, ControlInput(0, 1.6), self.params)

    def test_determinism(self):
        s = VehicleState(1.3, -2.2, 4.1, 0.7, 0.02)
        u = ControlInput(-2, 0.6)
        self.assertEqual(step(s, u, self.params), step(s, u, self.params))


class ActionSetTestCase(unittest.TestCase):

    def test_order(self):
        actions = action_set(VehicleParams(accel_mag=1, steer_mag=0.3))
        self.assertEqual(9, len(actions))
        self.assertEqual((-1, -0.3), actions[0])
        self.assertEqual((0, 0), actions[4])
        self.assertEqual((1, 0.3), actions[8])
        self.assertEqual((-1, 0), actions[1])
        self.assertEqual((0, -0.3), actions[3])

    def test_zero_magnitudes(self):
        actions = action_set(VehicleParams(accel_mag=0, steer_mag=0))
        self.assertEqual([ControlInput(0, 0)] * 9, actions)


class RolloutTestCase(unittest.TestCase):

    def test_uniform_motion(self):
        t = rollout(VehicleState(0, 0, 1, 0, 0), ControlInput(0, 0), VehicleParams(horizon=3))
        self.assertEqual(4, len(t))
        np.testing.assert_allclose(t.positions[:, 0], [0, 0.1, 0.2, 0.3])
        self.assertEqual(ControlInput(0, 0), t.control)

    def test_zero_horizon(self):
        s = VehicleState(1, 2, 3, 0.5, 0)
        t = rollout(s, ControlInput(2, 0.3), VehicleParams(horizon=0))
        self.assertEqual(1, len(t))
        self.assertEqual(s, t.initial)
        self.assertEqual(s, t.terminal)

    def test_acceleration(self):
        t = rollout(VehicleState(0, 0, 0, 0, 0), ControlInput(1, 0), VehicleParams(horizon=2))
        np.testing.assert_allclose([s.v for s in t], [0, 0.1, 0.2])

    def test_zero_input_is_collinear(self):
        for psi in (0.0, 0.8, -2.5):
            params = VehicleParams(horizon=20)
            t = rollout(VehicleState(1, 1, 3, psi, 0), ControlInput(0, 0), params)
            self.assertTrue(np.all(t.states[:, 2] == 3))
            self.assertTrue(np.all(t.states[:, 3] == psi))
            offsets = t.positions - t.positions[0]
            cross = offsets[:, 0] * math.sin(psi) - offsets[:, 1] * math.cos(psi)
            np.testing.assert_allclose(cross, 0, atol=1e-12)

    def test_composition(self):
        s = VehicleState(0, 0, 2, 0.3, 0)
        u = ControlInput(2, -0.6)
        whole = rollout(s, u, VehicleParams(horizon=7))
        head = rollout(s, u, VehicleParams(horizon=3))
        tail = rollout(head.terminal, u, VehicleParams(horizon=4))
        np.testing.assert_array_equal(whole.states, np.vstack([head.states, tail.states[1:]]))

    def test_states_follow_steps(self):
        params = VehicleParams()
        u = ControlInput(-2, 0.6)
        t = rollout(VehicleState(0, 0, 5, 0, 0), u, params)
        self.assertEqual(params.horizon + 1, len(t))
        for k in range(params.horizon):
            self.assertEqual(step(t[k], u, params), t[k + 1])

    def test_rollout_all(self):
        params = VehicleParams(horizon=4)
        s = VehicleState(0, 0, 1, 0, 0)
        trajectories = rollout_all(s, params)
        self.assertEqual(9, len(trajectories))
        self.assertEqual(action_set(params), [t.control for t in trajectories])
        for t in trajectories:
            self.assertEqual(s, t.initial)
        self.assertEqual(rollout(s, ControlInput(0, 0), params), trajectories[4])

    def test_trajectory_is_read_only(self):
        t = rollout(VehicleState(0, 0, 1, 0, 0), ControlInput(0, 0), VehicleParams())
        with self.assertRaises(ValueError):
            t.states[0, 0] = 5
        self.assertEqual((11, 2), t.positions.shape)
        self.assertIsInstance(t[3], VehicleState)
        self.assertEqual(11, len(list(t)))
