"""Reference trajectories made of straight lines and circular arcs.

The path is flown at constant speed.  Segments join with matching tangents,
so position and velocity are continuous; the centripetal acceleration steps
at arc entry and exit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from liftwing.config import ConfigurationError


@dataclass(frozen=True)
class Segment:
    kind: str  # line | arc
    length: float  # m, along the path
    radius: float = 0.0
    direction: int = 1  # +1 right turn (heading increases), -1 left turn


class PathTrajectory:
    """Constant-speed path in the horizontal plane at fixed altitude."""

    def __init__(self, speed: float, segments, start=(0.0, 0.0, 0.0), heading: float = 0.0,
                 t_start: float = 0.0):
        if speed <= 0:
            raise ConfigurationError("speed must be positive")
        self.speed = float(speed)
        self.start = np.asarray(start, dtype=float)
        self.heading = float(heading)
        self.t_start = float(t_start)
        self.segments = []
        for seg in segments:
            if seg.kind == "arc" and seg.radius <= 0:
                raise ConfigurationError("arc radius must be positive")
            if seg.length < 0:
                raise ConfigurationError("segment length must be non-negative")
            self.segments.append(seg)
        # precompute the entry state of every segment (and the trailing line)
        self._entries = []
        pos = self.start[:2].copy()
        psi = self.heading
        s0 = 0.0
        for seg in self.segments:
            self._entries.append((s0, pos.copy(), psi))
            pos, psi = self._advance(seg, pos, psi, seg.length)
            s0 += seg.length
        self._end = (s0, pos, psi)

    @staticmethod
    def _advance(seg: Segment, pos, psi, ds):
        if seg.kind == "line":
            return pos + ds * np.array([math.cos(psi), math.sin(psi)]), psi
        d = seg.direction
        r = seg.radius
        center = pos + d * r * np.array([-math.sin(psi), math.cos(psi)])
        psi_new = psi + d * ds / r
        return center + d * r * np.array([math.sin(psi_new), -math.cos(psi_new)]), psi_new

    def sample(self, t: float):
        """(p_d, v_d, a_d) at time ``t``; the path starts at ``t_start``."""
        s = self.speed * max(t - self.t_start, 0.0)
        V = self.speed
        z = self.start[2]
        for seg, (s0, pos, psi) in zip(self.segments, self._entries):
            if s < s0 + seg.length:
                ds = s - s0
                p2, psi_s = self._advance(seg, pos, psi, ds)
                v2 = V * np.array([math.cos(psi_s), math.sin(psi_s)])
                if seg.kind == "arc":
                    a2 = seg.direction * V * V / seg.radius * np.array([-math.sin(psi_s), math.cos(psi_s)])
                else:
                    a2 = np.zeros(2)
                return np.array([p2[0], p2[1], z]), np.array([v2[0], v2[1], 0.0]), np.array([a2[0], a2[1], 0.0])
        s0, pos, psi = self._end
        p2, _ = self._advance(Segment("line", 0.0), pos, psi, s - s0)
        v2 = V * np.array([math.cos(psi), math.sin(psi)])
        return np.array([p2[0], p2[1], z]), np.array([v2[0], v2[1], 0.0]), np.zeros(3)

    def turn_windows(self) -> list[tuple[float, float]]:
        """Start and end times of every arc segment."""
        out = []
        for seg, (s0, _, _) in zip(self.segments, self._entries):
            if seg.kind == "arc":
                out.append((self.t_start + s0 / self.speed, self.t_start + (s0 + seg.length) / self.speed))
        return out


def trajectory_line_circle(speed: float, radius: float, straight: float = 200.0, turns: float = 1.0,
                           **kwargs) -> PathTrajectory:
    """Straight line followed by a full circle (``turns`` revolutions)."""
    if radius <= 0:
        raise ConfigurationError("radius must be positive")
    segs = [Segment("line", straight), Segment("arc", 2.0 * math.pi * radius * turns, radius, 1)]
    return PathTrajectory(speed, segs, **kwargs)


def segments_from_config(items, speed: float) -> list[Segment]:
    """Build segments from mappings.

    ``{line: 100}`` is a 100 m line, ``{line_time: 8}`` a line flown for 8 s,
    ``{arc: {radius: 100, angle_deg: 90, direction: left}}`` an arc; an arc
    may give ``time`` (s) instead of ``angle_deg``.
    """
    segs = []
    for item in items:
        if "line" in item:
            segs.append(Segment("line", float(item["line"])))
        elif "line_time" in item:
            segs.append(Segment("line", float(item["line_time"]) * speed))
        elif "arc" in item:
            a = item["arc"]
            radius = float(a["radius"])
            if "angle_deg" in a:
                length = abs(math.radians(float(a["angle_deg"]))) * radius
            elif "time" in a:
                length = float(a["time"]) * speed
            else:
                raise ConfigurationError("arc needs angle_deg or time")
            d = a.get("direction", "right")
            if d not in ("right", "left"):
                raise ConfigurationError(f"arc direction must be right or left, got {d!r}")
            segs.append(Segment("arc", length, radius, 1 if d == "right" else -1))
        else:
            raise ConfigurationError(f"unknown path segment {item!r}")
    return segs
