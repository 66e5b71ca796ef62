"""Roundabout geometry: layout parameters, footprints, distances, zones.

The drivable region is a two-lane annulus plus straight legs at the exit
angles. Angles are measured counterclockwise from +x; circulating traffic
moves counterclockwise. A vehicle pose is polar: radius r, azimuth theta,
and heading offset phi measured from the local tangent direction, so phi=0
points along the circulation direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

TWO_PI = 2.0 * math.pi

ZONE_APPROACH = "approach"
ZONE_CIRCULATION = "circulation"


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    out = math.fmod(theta, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    # fmod can return TWO_PI-epsilon rounding up to TWO_PI exactly
    if out >= TWO_PI:
        out -= TWO_PI
    return out


def wrap_pi(x: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    out = math.fmod(x + math.pi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    return out - math.pi


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference a - b, in [-pi, pi)."""
    return wrap_pi(a - b)


def forward_arc(theta: float, target: float) -> float:
    """Counterclockwise angular travel from theta to target, in [0, 2*pi)."""
    return wrap_angle(target - theta)


@dataclass(frozen=True)
class RoundaboutGeometry:
    """Static layout of the roundabout world.

    Lanes are concentric equal-width rings indexed from the inside out:
    lane 0 hugs the central island, lane n_lanes-1 is the outer ring.
    Legs are straight two-way corridors of half-width leg_half_width,
    extending radially from the outer circle to leg_end_radius.
    """

    r_inner: float = 20.5
    r_outer: float = 28.0
    n_lanes: int = 2
    exit_angles: tuple[float, ...] = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)
    leg_half_width: float = 3.75
    leg_end_radius: float = 36.0
    v_max: float = 5.0

    def __post_init__(self):
        if not (0.0 < self.r_inner < self.r_outer):
            raise InvalidParameterError(
                f"need 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}")
        if self.n_lanes < 1:
            raise InvalidParameterError(f"n_lanes must be >= 1, got {self.n_lanes}")
        if not self.exit_angles:
            raise InvalidParameterError("need at least one exit angle")
        if self.leg_half_width <= 0.0 or self.leg_half_width >= self.r_outer:
            raise InvalidParameterError(
                f"leg_half_width out of range: {self.leg_half_width}")
        if self.leg_end_radius <= self.r_outer:
            raise InvalidParameterError(
                f"leg_end_radius must exceed r_outer, got {self.leg_end_radius}")
        if self.v_max <= 0.0:
            raise InvalidParameterError(f"v_max must be positive, got {self.v_max}")
        object.__setattr__(
            self, "exit_angles", tuple(wrap_angle(a) for a in self.exit_angles))

    @property
    def lane_width(self) -> float:
        return (self.r_outer - self.r_inner) / self.n_lanes

    def lane_center(self, lane: int) -> float:
        """Center radius of a lane index (0 = innermost)."""
        if not 0 <= lane < self.n_lanes:
            raise InvalidParameterError(f"lane {lane} outside [0, {self.n_lanes})")
        return self.r_inner + (lane + 0.5) * self.lane_width

    def lane_bounds(self, lane: int) -> tuple[float, float]:
        if not 0 <= lane < self.n_lanes:
            raise InvalidParameterError(f"lane {lane} outside [0, {self.n_lanes})")
        lo = self.r_inner + lane * self.lane_width
        return lo, lo + self.lane_width

    def lane_of_radius(self, r: float) -> int:
        """Lane index whose band contains radius r (clamped to valid lanes)."""
        idx = int((r - self.r_inner) / self.lane_width)
        return min(max(idx, 0), self.n_lanes - 1)

    def classify_zone(self, r: float) -> str:
        """Circulation inside the closed annulus, approach everywhere else."""
        if self.r_inner <= r <= self.r_outer:
            return ZONE_CIRCULATION
        return ZONE_APPROACH

    def nearest_exit(self, theta: float) -> int:
        """Index of the exit with smallest absolute angular offset from theta."""
        diffs = [abs(angle_diff(theta, a)) for a in self.exit_angles]
        return int(np.argmin(diffs))

    # Legs attach where their side walls meet the outer circle.
    @property
    def leg_attach_along(self) -> float:
        return math.sqrt(self.r_outer ** 2 - self.leg_half_width ** 2)

    @property
    def leg_opening_half_angle(self) -> float:
        return math.asin(self.leg_half_width / self.r_outer)

    def leg_frame(self, x: float, y: float, exit_idx: int) -> tuple[float, float]:
        """Project a point into a leg's frame: (along outward axis, lateral)."""
        a = self.exit_angles[exit_idx]
        ca, sa = math.cos(a), math.sin(a)
        return x * ca + y * sa, -x * sa + y * ca


def footprint(r: float, theta: float, phi: float,
              length: float, width: float) -> np.ndarray:
    """Rectangle vertices (4, 2) of a vehicle footprint in world frame.

    The centroid sits at the polar position; the long axis points along the
    global heading theta + pi/2 + phi (tangent direction plus heading offset).
    Vertex order: front-left, front-right, rear-right, rear-left.
    """
    cx = r * math.cos(theta)
    cy = r * math.sin(theta)
    h = theta + 0.5 * math.pi + phi
    ux, uy = math.cos(h), math.sin(h)          # forward
    wx, wy = -uy, ux                            # left
    hl, hw = 0.5 * length, 0.5 * width
    return np.array([
        [cx + hl * ux + hw * wx, cy + hl * uy + hw * wy],
        [cx + hl * ux - hw * wx, cy + hl * uy - hw * wy],
        [cx - hl * ux - hw * wx, cy - hl * uy - hw * wy],
        [cx - hl * ux + hw * wx, cy - hl * uy + hw * wy],
    ])


def _project_interval(verts: np.ndarray, ax: float, ay: float) -> tuple[float, float]:
    p = verts[:, 0] * ax + verts[:, 1] * ay
    return float(p.min()), float(p.max())


def rects_overlap(va: np.ndarray, vb: np.ndarray) -> bool:
    """Separating-axis overlap test for two convex quads (touching counts)."""
    for verts in (va, vb):
        for k in range(4):
            ex = verts[(k + 1) % 4, 0] - verts[k, 0]
            ey = verts[(k + 1) % 4, 1] - verts[k, 1]
            ax, ay = -ey, ex
            a0, a1 = _project_interval(va, ax, ay)
            b0, b1 = _project_interval(vb, ax, ay)
            if a1 < b0 or b1 < a0:
                return False
    return True


def _segment_distance(p0x, p0y, p1x, p1y, q0x, q0y, q1x, q1y) -> float:
    """Minimum distance between two 2-D segments."""
    ux, uy = p1x - p0x, p1y - p0y
    vx, vy = q1x - q0x, q1y - q0y
    wx, wy = p0x - q0x, p0y - q0y
    a = ux * ux + uy * uy
    b = ux * vx + uy * vy
    c = vx * vx + vy * vy
    d = ux * wx + uy * wy
    e = vx * wx + vy * wy
    den = a * c - b * b
    if den > 1e-12:
        s = (b * e - c * d) / den
    else:
        s = 0.0
    s = min(max(s, 0.0), 1.0)
    if c > 1e-12:
        t = (b * s + e) / c
    else:
        t = 0.0
    t = min(max(t, 0.0), 1.0)
    # one clamp can invalidate the other; redo s for the clamped t
    if a > 1e-12:
        s = min(max((b * t - d) / a, 0.0), 1.0)
    dx = p0x + s * ux - (q0x + t * vx)
    dy = p0y + s * uy - (q0y + t * vy)
    return math.hypot(dx, dy)


def min_distance(va: np.ndarray, vb: np.ndarray, mode: str = "exact") -> float:
    """Minimum distance between two rectangle footprints.

    mode="exact": true edge-to-edge distance, 0.0 when the rectangles overlap.
    mode="vertex": minimum over the 16 vertex pairs (cheaper upper bound).
    """
    if mode == "vertex":
        d = va[:, None, :] - vb[None, :, :]
        return float(np.sqrt((d * d).sum(axis=2)).min())
    if mode != "exact":
        raise InvalidParameterError(f"unknown distance mode {mode!r}")
    if rects_overlap(va, vb):
        return 0.0
    best = math.inf
    for i in range(4):
        i2 = (i + 1) % 4
        for j in range(4):
            j2 = (j + 1) % 4
            dist = _segment_distance(
                va[i, 0], va[i, 1], va[i2, 0], va[i2, 1],
                vb[j, 0], vb[j, 1], vb[j2, 0], vb[j2, 1])
            if dist < best:
                best = dist
    return best


def _point_to_segment(px, py, ax, ay, bx, by) -> float:
    ux, uy = bx - ax, by - ay
    den = ux * ux + uy * uy
    if den <= 1e-12:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * ux + (py - ay) * uy) / den
    t = min(max(t, 0.0), 1.0)
    return math.hypot(px - (ax + t * ux), py - (ay + t * uy))


def _point_in_region(x: float, y: float, geo: RoundaboutGeometry) -> bool:
    rho = math.hypot(x, y)
    if geo.r_inner <= rho <= geo.r_outer:
        return True
    if rho < geo.r_inner:
        return False
    a0 = geo.leg_attach_along
    for k in range(len(geo.exit_angles)):
        along, lat = geo.leg_frame(x, y, k)
        # legs are open-ended: departing vehicles stay in-region until removed
        if abs(lat) <= geo.leg_half_width and a0 <= along:
            return True
    return False


def _point_boundary_distance(x: float, y: float, geo: RoundaboutGeometry) -> float:
    """Unsigned distance from a point to the drivable-region boundary."""
    rho = math.hypot(x, y)
    best = abs(rho - geo.r_inner)          # central island wall
    a0 = geo.leg_attach_along
    half_open = geo.leg_opening_half_angle
    w = geo.leg_half_width
    theta_p = math.atan2(y, x)
    # outer circle: the point's radial projection is material only when it
    # faces no leg opening; inside an opening the nearest material on the
    # circle is the opening's edge
    near = min(geo.exit_angles, key=lambda a: abs(angle_diff(theta_p, a)))
    if abs(angle_diff(theta_p, near)) >= half_open:
        best = min(best, abs(rho - geo.r_outer))
    else:
        for sgn in (-1.0, 1.0):
            ex = geo.r_outer * math.cos(near + sgn * half_open)
            ey = geo.r_outer * math.sin(near + sgn * half_open)
            best = min(best, math.hypot(x - ex, y - ey))
    for k, ang in enumerate(geo.exit_angles):
        along, lat = geo.leg_frame(x, y, k)
        if along > 0.0:
            ca, sa = math.cos(ang), math.sin(ang)

            def _world(alo, la):
                return alo * ca - la * sa, alo * sa + la * ca

            # side walls run past the nominal leg end (open-ended legs) so a
            # departing vehicle sees a consistent corridor until removal
            far = geo.leg_end_radius + 8.0
            for side in (-w, w):
                s0 = _world(a0, side)
                s1 = _world(far, side)
                best = min(best, _point_to_segment(x, y, *s0, *s1))
    return best


def boundary_distance(verts: np.ndarray, geo: RoundaboutGeometry) -> float:
    """Signed clearance between a footprint and the drivable-region boundary.

    Positive when every vertex lies inside the region (minimum vertex
    clearance), negative when any vertex has escaped (deepest penetration).
    """
    best = math.inf
    worst_out = 0.0
    for k in range(4):
        x, y = float(verts[k, 0]), float(verts[k, 1])
        d = _point_boundary_distance(x, y, geo)
        if _point_in_region(x, y, geo):
            best = min(best, d)
        else:
            worst_out = max(worst_out, d)
    if worst_out > 0.0:
        return -worst_out
    return best


def cartesian(r: float, theta: float) -> tuple[float, float]:
    return r * math.cos(theta), r * math.sin(theta)
