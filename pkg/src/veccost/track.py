"""
Ring track geometry: arc-length progress, off-track tests and collision detection.
"""
from __future__ import annotations

import math

import numpy as np

from .dynamics import Trajectory, VehicleState
from .game import DimensionError
from .models import TrackParams


def angle_wrap(angle):
    """
    Wraps an angle (or an array of angles) into [-pi, pi).
    """
    return (angle + np.pi) % (2 * np.pi) - np.pi


class Track:
    """
    A circular centerline of radius `radius` around `(center_x, center_y)`, travelled
    counter-clockwise, with `half_width` meters of tarmac on each side. Arc length is
    measured from the point at angle 0.
    """

    def __init__(self, params: TrackParams = None):
        params = (params or TrackParams()).validate()
        self.center = np.array([params.center_x, params.center_y])
        self.radius = params.radius
        self.half_width = params.half_width

    def __repr__(self):
        return "<Track radius=%r half_width=%r>" % (self.radius, self.half_width)

    @property
    def circumference(self) -> float:
        return 2 * math.pi * self.radius

    def arc_position(self, x: float, y: float) -> float:
        """
        Returns the arc length in `[0, circumference)` of the centerline point nearest to `(x, y)`.
        """
        theta = math.atan2(y - self.center[1], x - self.center[0]) % (2 * math.pi)
        return self.radius * theta

    def point_at(self, arc: float) -> VehicleState:
        """
        Returns a state on the centerline at arc length `arc`, heading along the track,
        at rest.
        """
        theta = arc / self.radius
        return VehicleState(
            float(self.center[0] + self.radius * math.cos(theta)),
            float(self.center[1] + self.radius * math.sin(theta)),
            0.0,
            float(angle_wrap(theta + math.pi / 2)),
            0.0,
        )

    def progress(self, s: VehicleState, prev_progress: float) -> float:
        """
        Returns the unwrapped arc length of `s`: the position reached from
        `prev_progress` by the shortest signed angular increment. Progress keeps
        growing across the start line.
        """
        theta = math.atan2(s.y - self.center[1], s.x - self.center[0])
        increment = float(angle_wrap(theta - prev_progress / self.radius))
        return prev_progress + self.radius * increment

    def trajectory_progress(self, t: Trajectory, start_progress: float) -> float:
        """
        Returns the unwrapped progress of the last state of `t`, following every state
        from `start_progress` at the first one.
        """
        progress = start_progress
        for state in t:
            progress = self.progress(state, progress)
        return progress

    def distances(self, t: Trajectory) -> np.ndarray:
        """
        Returns the distance of every trajectory point from the centerline.
        """
        return np.abs(np.linalg.norm(t.positions - self.center, axis=1) - self.radius)

    def off_track_mask(self, t: Trajectory) -> np.ndarray:
        return self.distances(t) > self.half_width

    def off_track_count(self, t: Trajectory) -> int:
        """
        Counts the trajectory points farther than `half_width` from the centerline.
        """
        return int(np.count_nonzero(self.off_track_mask(t)))


def separations(t1: Trajectory, t2: Trajectory) -> np.ndarray:
    """
    Returns the distance between the two vehicles at each time index.
    """
    if len(t1) != len(t2):
        raise DimensionError("Trajectories differ in length: %d and %d" % (len(t1), len(t2)))
    return np.linalg.norm(t1.positions - t2.positions, axis=1)


def detect_collision(t1: Trajectory, t2: Trajectory, radius: float) -> bool:
    """
    Checks whether the vehicles come within `radius` of each other at the same time index.
    Paths that cross at different times do not collide.
    """
    return bool((separations(t1, t2) <= radius).any())


def progress(s: VehicleState, track: Track, prev_progress: float) -> float:
    return track.progress(s, prev_progress)


def off_track_count(t: Trajectory, track: Track) -> int:
    return track.off_track_count(t)


__all__ = [
    "Track",
    "angle_wrap",
    "separations",
    "detect_collision",
    "progress",
    "off_track_count",
]
