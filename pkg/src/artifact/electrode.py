"""Resting geometry of a pre-curved perimodiolar electrode array.

The unconstrained array relaxes into a conical helix that is tightest at
the tip and opens toward the base: seen along its axis, the wind radius
grows linearly with the projected arc length, and the carrier climbs a
fixed axial lead per full turn of curl, matching the rise of the canal it
is moulded for. The projection is sized so that the contact-bearing
active region winds through the design curl angle and so that the tip
wind radius is `tip_taper` times the radius at the basal end of the
active region; the marker tail continues past the active region along
the same spiral law.

Contacts are spread uniformly along the active region, tip first. Three
depth markers sit on the tail beyond the most basal contact; the last one
is the proximal marker, closest to the surgeon during insertion.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import ParameterError, RigidTransform


@dataclass(frozen=True)
class ArraySpec:
    """Physical description of one electrode array model."""

    contact_count: int = 22
    active_length: float = 14.0
    design_curl: float = 450.0
    marker_offsets: tuple = (0.5, 1.0, 1.5)
    tip_taper: float = 0.65
    axial_lead: float = 2.2

    def __post_init__(self):
        if int(self.contact_count) != self.contact_count or self.contact_count < 2:
            raise ParameterError("contact_count must be an integer of at least 2")
        if self.active_length <= 0.0:
            raise ParameterError("active_length must be positive")
        if not (0.0 <= self.design_curl <= 900.0):
            raise ParameterError("design_curl must lie in [0, 900] degrees")
        offs = tuple(float(x) for x in self.marker_offsets)
        if len(offs) != 3:
            raise ParameterError("exactly three marker offsets are required")
        if offs[0] <= 0.0 or not (offs[0] < offs[1] < offs[2]):
            raise ParameterError("marker_offsets must be positive and strictly ascending")
        if not (0.0 < self.tip_taper <= 1.0):
            raise ParameterError("tip_taper must lie in (0, 1]")
        if not (0.0 <= self.axial_lead < math.inf):
            raise ParameterError("axial_lead must be non-negative and finite")
        if self.axial_lead * self.design_curl / 360.0 >= self.active_length:
            raise ParameterError("axial climb over the design curl exceeds the active length")
        object.__setattr__(self, "marker_offsets", offs)

    @property
    def total_length(self):
        return self.active_length + self.marker_offsets[-1]


@dataclass
class RestingShape:
    """Sampled resting centerline with contact and marker positions.

    All point arrays are ordered tip first. `centerline` contains the
    contact and marker arc positions as exact sample points.
    """

    centerline: np.ndarray
    arc_positions: np.ndarray
    contact_centers: np.ndarray
    contact_arcs: np.ndarray
    marker_points: np.ndarray
    marker_arcs: np.ndarray
    apical_index_set: np.ndarray
    spec: ArraySpec


def _climb_primitive(w, c):
    """Antiderivative of sqrt(w^2 + c^2) / w in w, for w > 0."""
    t = np.sqrt(w * w + c * c)
    return t - c * np.log((c + t) / w)


def _projected_span(active_length, k, c, taper):
    """Planar projection length whose helix unrolls to the active length.

    For a wind radius r0 + k*u (planar arc u) and climb rate c per radian
    of wind, the space-curve length of the projection interval [0, U] is
    (G(r0 + k*U) - G(r0)) / k with G the climb primitive and r0 tied to U
    by the taper ratio. That length is strictly increasing in U.
    """
    ratio = 1.0 / taper - 1.0

    def length_error(span):
        r0 = k * span / ratio
        return (_climb_primitive(r0 + k * span, c) - _climb_primitive(r0, c)) / k - active_length

    return brentq(length_error, 1e-12 * active_length, active_length,
                  xtol=1e-12, rtol=8.9e-16)


def _projected_arcs(s, r0, k, c, guess_scale):
    """Invert the space-curve arc length to planar arc, by Newton iteration."""
    u = np.maximum(s * guess_scale, 0.0)
    g0 = float(_climb_primitive(r0, c))
    for _ in range(8):
        w = r0 + k * u
        error = (_climb_primitive(w, c) - g0) / k - s
        u = np.maximum(u - error / np.sqrt(1.0 + (c / w) ** 2), 0.0)
    return u


def _resting_points(arcs, spec):
    """Positions along the resting helix at arc-length samples from the tip.

    The tip sits at the origin and the helix winds counterclockwise seen
    from above, climbing in +z. The design curl spans the active region;
    arcs past it (the marker tail) extrapolate the same spiral law. The
    planar projection integral has a closed form through complex
    exponentiation and the climb is a closed form of the wind angle, so
    samples carry no quadrature error beyond the arc-length inversion,
    which is run to machine precision.
    """
    s = np.asarray(arcs, dtype=float)
    active = spec.active_length
    curl_rad = math.radians(spec.design_curl)
    if curl_rad < 1e-12:
        return np.column_stack([s, np.zeros_like(s), np.zeros_like(s)])
    c = spec.axial_lead / (2.0 * math.pi)
    taper = spec.tip_taper

    if taper >= 1.0 - 1e-12:
        # constant-radius helix: planar span by the Pythagorean split
        span = math.sqrt(active * active - (c * curl_rad) ** 2)
        radius = span / curl_rad
        u = s * (span / active)
        z = -1j * radius * (np.exp(1j * u / radius) - 1.0)
        height = (c / radius) * u
    else:
        k = math.log(1.0 / taper) / curl_rad
        if c < 1e-12:
            span = active
        else:
            span = _projected_span(active, k, c, taper)
        r0 = k * span / (1.0 / taper - 1.0)
        u = s if c < 1e-12 else _projected_arcs(s, r0, k, c, span / active)
        expo = 1.0 + 1j / k
        z = (r0 ** (-1j / k)) * ((r0 + k * u) ** expo - r0 ** expo) / (k * expo)
        height = (c / k) * np.log1p(k * u / r0)
    return np.column_stack([z.real, z.imag, height])


def build_resting_shape(spec=None, samples=2049):
    """Sample the resting helix of an array specification."""
    if spec is None:
        spec = ArraySpec()
    total = spec.total_length

    contact_arcs = np.linspace(0.0, spec.active_length, spec.contact_count)
    marker_arcs = spec.active_length + np.asarray(spec.marker_offsets, dtype=float)

    grid = np.linspace(0.0, total, samples)
    for s in np.concatenate([contact_arcs, marker_arcs]):
        grid[int(round(s / total * (samples - 1)))] = s
    grid = np.unique(grid)

    centerline = _resting_points(grid, spec)
    contact_centers = _resting_points(contact_arcs, spec)
    marker_points = _resting_points(marker_arcs, spec)

    return RestingShape(
        centerline=centerline,
        arc_positions=grid,
        contact_centers=contact_centers,
        contact_arcs=contact_arcs,
        marker_points=marker_points,
        marker_arcs=marker_arcs,
        apical_index_set=np.arange(min(11, spec.contact_count)),
        spec=spec,
    )


def pose_shape(shape, pose):
    """Apply a rigid transform to a resting shape, keeping arc metadata."""
    if not isinstance(pose, RigidTransform):
        raise ParameterError("pose must be a RigidTransform")
    return RestingShape(
        centerline=pose.apply(shape.centerline),
        arc_positions=shape.arc_positions.copy(),
        contact_centers=pose.apply(shape.contact_centers),
        contact_arcs=shape.contact_arcs.copy(),
        marker_points=pose.apply(shape.marker_points),
        marker_arcs=shape.marker_arcs.copy(),
        apical_index_set=shape.apical_index_set.copy(),
        spec=shape.spec,
    )
