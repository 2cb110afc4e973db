"""Insertion trajectory planning for a pre-curved perimodiolar array.

The planner seats the resting array shape against the modiolar wall of a
scene (rigid registration), then derives three candidate entries through
the round window membrane: its middle and two anterior extensions of the
opening. Every candidate carries safety clearances to the facial nerve,
the chorda tympani and the ossicles, tilt against the round-window plane,
two clock-face readouts, and the marker depths that implement a pull-back
insertion: over-insert by a fixed margin, then withdraw until the middle
marker reaches its planned depth.

Clock faces follow the surgical convention: the face is viewed along the
given axis, the stapes footplate defines 12 o'clock, and hours advance
clockwise for the viewer. Readings are rounded to the nearest half hour.
"""
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .electrode import ArraySpec, build_resting_shape, pose_shape
from .geometry import (
    GeometryError,
    ParameterError,
    RigidTransform,
    closest_points_on_mesh,
    closest_points_on_polyline,
    contains,
    distance_segment_to_mesh,
    distance_to_mesh,
    distance_to_tube,
    save_mesh_ply,
    scene_manifest,
)
from .postop import compute_aid, compute_mmd

SCENE_BUNDLE_SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "scene_bundle.schema.json"

BUNDLE_FORMAT = "insertion-plan-bundle"
BUNDLE_VERSION = 1

# Depth margin for the pull-back manoeuvre: the array is first advanced
# this far past its planned base depth, then withdrawn.
PULLBACK_OVERINSERTION_MM = 2.0

# Length of the straight approach segment outside the entry point over
# which structure clearances are evaluated.
APPROACH_LENGTH_MM = 10.0

# A posed contact is an acceptable seat when it lies inside the scala
# tympani or within this distance of its surface.
SEAT_TOLERANCE_MM = 0.2


def _as_vec3(value, name):
    v = np.asarray(value, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} must be a finite 3-vector")
    return v


def _normalized(value, name):
    v = _as_vec3(value, name)
    n = float(np.linalg.norm(v))
    if n < 1e-9:
        raise ParameterError(f"{name} must have nonzero length")
    return v / n


# --------------------------------------------------------------------------
# clock faces and scalar trajectory measures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClockFace:
    """A half-hour clock position, rendered as hh:mm."""

    hour: int
    minute: int

    def __post_init__(self):
        if int(self.hour) != self.hour or not (1 <= self.hour <= 12):
            raise ParameterError("clock hour must be an integer in 1..12")
        if self.minute not in (0, 30):
            raise ParameterError("clock minute must be 0 or 30")

    @property
    def text(self):
        return f"{self.hour:02d}:{self.minute:02d}"


def clock_encode(center, direction, view_axis, stapes_center):
    """Clock-face reading of a direction about a center point.

    The face is seen looking along `view_axis`; the in-plane direction
    toward the stapes reads 12:00 and hours advance clockwise for that
    viewer. Components along the view axis are ignored. The reading is
    rounded to the nearest half hour.
    """
    c = _as_vec3(center, "center")
    w = _normalized(view_axis, "view_axis")

    ref = _as_vec3(stapes_center, "stapes_center") - c
    ref = ref - np.dot(ref, w) * w
    if np.linalg.norm(ref) < 1e-9:
        raise ParameterError("stapes center projects onto the clock center")
    d = _as_vec3(direction, "direction")
    d = d - np.dot(d, w) * w
    if np.linalg.norm(d) < 1e-9:
        raise ParameterError("direction is parallel to the view axis")

    # Clockwise angle for a viewer looking along +w with the stapes up.
    theta = math.degrees(math.atan2(-float(np.dot(w, np.cross(ref, d))),
                                    float(np.dot(ref, d)))) % 360.0
    half_hours = int(math.floor(theta / 15.0 + 0.5)) % 24
    hour = half_hours // 2
    return ClockFace(hour=hour if hour else 12, minute=30 if half_hours % 2 else 0)


def tilt_angle(vector, plane_normal):
    """Angle in degrees between a trajectory and a plane's normal.

    Zero means the trajectory is perpendicular to the plane; ninety means
    it lies in the plane. The sign of either argument is irrelevant.
    """
    v = _normalized(vector, "vector")
    n = _normalized(plane_normal, "plane_normal")
    return math.degrees(math.acos(min(1.0, abs(float(np.dot(v, n))))))


def base_depth(frame, entry_point, vector, marker_point):
    """Signed depth of a marker past the round-window plane, along the track.

    The insertion line through `entry_point` is intersected with the
    round-window plane; the returned value is the distance from that
    crossing to the marker, measured along the insertion direction.
    Positive means the marker has passed the plane into the cochlea.
    """
    entry = _as_vec3(entry_point, "entry_point")
    v = _normalized(vector, "vector")
    marker = _as_vec3(marker_point, "marker_point")
    n = frame.rw_plane_normal
    denom = float(np.dot(v, n))
    if abs(denom) < 1e-9:
        raise ParameterError("insertion vector is parallel to the round-window plane")
    t = float(np.dot(frame.rw_center - entry, n)) / denom
    pierce = entry + t * v
    return float(np.dot(marker - pierce, v))


# --------------------------------------------------------------------------
# perimodiolar track and rigid registration
# --------------------------------------------------------------------------


@dataclass
class PerimodiolarTrack:
    """Polyline along the modiolar wall where a seated array comes to rest.

    `arcs` is the cumulative chord length in mm; `angles` the angular
    coordinate of each station in degrees from the round window.
    """

    points: np.ndarray
    arcs: np.ndarray
    angles: np.ndarray


def perimodiolar_track(scene):
    """Project the scala-tympani centerline onto the modiolar wall."""
    pts = closest_points_on_mesh(scene.modiolar_wall, scene.st_centerline_points)
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arcs = np.concatenate([[0.0], np.cumsum(steps)])
    return PerimodiolarTrack(points=pts, arcs=arcs, angles=scene.st_centerline_angles.copy())


def track_station_points(track, station_arcs):
    """Points on the track at given arc positions, extrapolating past the ends."""
    s = np.atleast_1d(np.asarray(station_arcs, dtype=float))
    out = np.column_stack([np.interp(s, track.arcs, track.points[:, i]) for i in range(3)])
    low = s < track.arcs[0]
    high = s > track.arcs[-1]
    if np.any(low):
        d = (track.points[1] - track.points[0]) / (track.arcs[1] - track.arcs[0])
        out[low] = track.points[0] + (s[low, None] - track.arcs[0]) * d
    if np.any(high):
        d = (track.points[-1] - track.points[-2]) / (track.arcs[-1] - track.arcs[-2])
        out[high] = track.points[-1] + (s[high, None] - track.arcs[-1]) * d
    return out


def _kabsch(source, target, weights=None):
    """Least-squares rigid transform taking source points onto target points."""
    x = np.asarray(source, dtype=float)
    y = np.asarray(target, dtype=float)
    w = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=float)
    total = float(w.sum())
    cx = (w[:, None] * x).sum(axis=0) / total
    cy = (w[:, None] * y).sum(axis=0) / total
    h = (x - cx).T @ (w[:, None] * (y - cy))
    u, _, vt = np.linalg.svd(h)
    d = float(np.sign(np.linalg.det(vt.T @ u.T)))
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rotation=rotation, translation=cy - rotation @ cx)


def _axis_angle_rotation(axis, angle_rad):
    k = axis / np.linalg.norm(axis)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle_rad) * kx + (1.0 - math.cos(angle_rad)) * (kx @ kx)


@dataclass
class RegistrationResult:
    """Outcome of seating the array in a scene.

    `rms_mm` is the root-mean-square contact distance to the modiolar
    wall; `penalized_rms_mm` additionally up-weights device points that
    ended outside the scala tympani. `feasible` is True when every
    contact, and every marker still inside the duct, lies inside the
    scala or within the seating tolerance of its surface.
    """

    pose: RigidTransform
    rms_mm: float
    penalized_rms_mm: float
    feasible: bool


# ICP contacts within this range of the scala surface are matched to the
# modiolar wall; farther strays are pulled toward the duct centerline
# (with extra weight) so they cannot latch onto the wrong turn.
_WALL_ATTACH_RANGE_MM = 1.0
_STRAY_WEIGHT = 3.0
_MASK_REFRESH_PERIOD = 8

# Sliding the array along the duct changes the wall fit very little, so
# the fit alone can leave the seat anywhere in a flat valley. The
# pull-back protocol stops the insertion at the designed depth, which
# the ranking encodes as a depth-fidelity term: a 1 mm departure from
# the design-curl station counts like a 10 um mean wall offset, enough
# to break slide-direction ties without overriding real fit differences.
_DEPTH_PRIOR_WEIGHT = 0.01

# A marker takes part in the match only once it sits clearly inside the
# duct; right at the opening the nearest-wall direction is dominated by
# the rim and would twist the fit.
_TAIL_ENGAGE_DEPTH_MM = 0.5


def register_array(scene, shape, seed=0, max_iterations=200, rel_tol=1e-8):
    """Rigidly seat a resting array against the modiolar wall of a scene.

    Initial poses come from sliding the array along the perimodiolar
    track to a family of tip angles around the design curl (plus seeded
    jitters of the nominal seat); short rollouts rank the candidates and
    the best few are polished by iterative closest-point matching against
    the wall. The marker tail takes part in the match whenever it is
    still inside the duct past the round window, which keeps the seat
    from sliding deeper than the tail can follow; markers that have
    exited through the round window are exempt. Deterministic for fixed
    inputs and seed.
    """
    track = perimodiolar_track(scene)
    contacts = shape.contact_centers
    device = np.vstack([contacts, shape.marker_points])
    n_contacts = len(contacts)
    wall = scene.modiolar_wall
    centerline = scene.st_centerline_points
    rw_center = scene.frame.rw_center
    rw_normal = scene.frame.rw_plane_normal
    rng = np.random.default_rng(seed)

    def point_states(points):
        # 0 = exempt marker (already out through the round window),
        # 1 = attached (near-surface points, either side of the boundary,
        #     or anywhere inside the duct, which is thinner than the
        #     attach range, are matched to the wall),
        # 2 = far stray, pulled toward the duct centerline instead.
        d = np.array([distance_to_mesh(scene.st, p) for p in points])
        states = np.where(d <= _WALL_ATTACH_RANGE_MM, 1, 2)
        in_duct = (points - rw_center) @ rw_normal > _TAIL_ENGAGE_DEPTH_MM
        states[n_contacts:] = np.where(in_duct[n_contacts:], states[n_contacts:], 0)
        return states

    def seated_mask(points):
        # A point is seated when it lies inside the scala tympani or
        # within the seating tolerance of its surface.
        flags = np.empty(len(points), dtype=bool)
        for i, p in enumerate(points):
            try:
                inside = contains(scene.st, p)
            except GeometryError:
                # A ray-ambiguous point falls through to the distance check.
                inside = False
            flags[i] = inside or distance_to_mesh(scene.st, p) <= SEAT_TOLERANCE_MM
        return flags

    def run_icp(pose, iterations):
        states = None
        mse = math.inf
        for it in range(iterations):
            posed = pose.apply(device)
            if states is None or it % _MASK_REFRESH_PERIOD == 0:
                states = point_states(posed)
            weights = np.choose(states, [0.0, 1.0, _STRAY_WEIGHT])
            targets = posed.copy()
            attached = states == 1
            stray = states == 2
            if attached.any():
                targets[attached] = closest_points_on_mesh(wall, posed[attached])
            if stray.any():
                targets[stray] = closest_points_on_polyline(centerline, posed[stray])
            pose = _kabsch(device, targets, weights)
            moved = pose.apply(device)
            diff = moved - targets
            new_mse = float(np.average(np.einsum("ij,ij->i", diff, diff), weights=weights))
            converged = abs(mse - new_mse) <= rel_tol * max(new_mse, 1e-12)
            mse = new_mse
            if converged:
                fresh = point_states(moved)
                if np.array_equal(fresh, states):
                    break
                states = fresh
        return pose, mse

    inits = []
    for offset in (0.0, 20.0, -20.0, 40.0, -40.0):
        tip_arc = float(np.interp(shape.spec.design_curl + offset, track.angles, track.arcs))
        stations = track_station_points(track, tip_arc - shape.contact_arcs)
        inits.append(_kabsch(contacts, stations))

    tip_arc0 = float(np.interp(shape.spec.design_curl, track.angles, track.arcs))
    anchor = track_station_points(track, tip_arc0 - shape.contact_arcs).mean(axis=0)
    for _ in range(2):
        rotation = _axis_angle_rotation(rng.normal(size=3),
                                        math.radians(3.0) * rng.uniform(0.5, 1.0))
        shift = 0.2 * rng.uniform(-1.0, 1.0, size=3)
        jitter = RigidTransform(rotation=rotation,
                                translation=anchor - rotation @ anchor + shift)
        inits.append(jitter.compose(inits[0]))

    rollouts = []
    for index, init in enumerate(inits):
        pose, mse = run_icp(init, 6)
        rollouts.append((mse, index, pose))
    rollouts.sort(key=lambda item: (item[0], item[1]))

    candidates = []
    for mse, index, pose in rollouts[:3]:
        pose, _ = run_icp(pose, max_iterations)
        posed = pose.apply(device)
        states = point_states(posed)
        active = states > 0
        seated = seated_mask(posed)
        d_wall = np.linalg.norm(posed - closest_points_on_mesh(wall, posed), axis=1)
        d_center = np.linalg.norm(posed - closest_points_on_polyline(centerline, posed), axis=1)
        term = np.where(states == 1, d_wall ** 2, d_center ** 2)
        penalized = float(np.mean(np.where(seated, term, _STRAY_WEIGHT * term)[active]))
        feasible = bool(np.all(seated[active]))
        rms = float(np.sqrt(np.mean(d_wall[:n_contacts] ** 2)))
        seated_aid = compute_aid(scene.frame, posed[:n_contacts])
        arcs = np.interp([seated_aid, shape.spec.design_curl], track.angles, track.arcs)
        rank = penalized + (_DEPTH_PRIOR_WEIGHT * float(abs(arcs[0] - arcs[1]))) ** 2
        candidates.append((rank, index, pose, rms, feasible, penalized))

    feasible_candidates = [c for c in candidates if c[4]]
    pool = feasible_candidates if feasible_candidates else candidates
    _, _, pose, rms, feasible, penalized = min(pool, key=lambda c: (c[0], c[1]))
    return RegistrationResult(pose=pose, rms_mm=rms,
                              penalized_rms_mm=float(math.sqrt(penalized)),
                              feasible=feasible)


# --------------------------------------------------------------------------
# candidate trajectories
# --------------------------------------------------------------------------


class EntrySite(str, Enum):
    """The three candidate openings through the round-window region."""

    RW_CENTER = "RW_CENTER"
    SLIGHT_EXTENDED_RW = "SLIGHT_EXTENDED_RW"
    SUBSTANTIAL_EXTENDED_RW = "SUBSTANTIAL_EXTENDED_RW"

    @property
    def label(self):
        return _SITE_LABELS[self]

    @property
    def displacement_mm(self):
        return _SITE_DISPLACEMENTS[self]


_SITE_LABELS = {
    EntrySite.RW_CENTER: "Middle of the RW",
    EntrySite.SLIGHT_EXTENDED_RW: "Slightly Extended RW",
    EntrySite.SUBSTANTIAL_EXTENDED_RW: "Substantially Extended RW",
}

_SITE_DISPLACEMENTS = {
    EntrySite.RW_CENTER: 0.0,
    EntrySite.SLIGHT_EXTENDED_RW: 0.5,
    EntrySite.SUBSTANTIAL_EXTENDED_RW: 1.0,
}


@dataclass
class InsertionPlan:
    """One candidate trajectory with its readouts and marker depths."""

    entry_kind: EntrySite
    entry_point: np.ndarray
    vector: np.ndarray
    clearance_facial_nerve_mm: float
    clearance_chorda_mm: float
    clearance_ossicles_mm: float
    tilt_deg: float
    curl_clock: ClockFace
    entry_clock: ClockFace
    base_depth_mm: float
    overinsert_depth_mm: float
    predicted_aid_deg: float
    predicted_mmd_mm: float


def candidate_plans(scene, shape=None, registration=None):
    """Build the three candidate insertion plans for a scene.

    All plans share one insertion vector (the dominant direction of the
    basal duct) and differ in the entry point: the middle of the round
    window, then 0.5 mm and 1.0 mm extensions along the in-plane line
    away from the stapes. Predictions come from the registered seat of
    the array, so they are shared across candidates as well.
    """
    if shape is None:
        shape = build_resting_shape(ArraySpec())
    if registration is None:
        registration = register_array(scene, shape)
    frame = scene.frame
    n = frame.rw_plane_normal

    extension = frame.rw_center - frame.stapes_center
    extension = extension - np.dot(extension, n) * n
    norm = float(np.linalg.norm(extension))
    if norm < 1e-9:
        raise ParameterError("stapes center lies on the round-window plane normal")
    extension = extension / norm

    basal = scene.st_centerline_points[scene.st_centerline_angles <= 60.0]
    if len(basal) < 2:
        raise ParameterError("scene centerline does not resolve the basal duct")
    centered = basal - basal.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    vector = vt[0]
    if float(np.dot(vector, basal.mean(axis=0) - frame.rw_center)) < 0.0:
        vector = -vector

    posed = pose_shape(shape, registration.pose)
    centroid = posed.contact_centers.mean(axis=0)
    middle_marker = posed.marker_points[1]
    predicted_aid = compute_aid(frame, posed.contact_centers)
    predicted_mmd = compute_mmd(scene.modiolar_wall, posed.contact_centers)
    entry_clock = clock_encode(frame.rw_center, extension, n, frame.stapes_center)
    tilt = tilt_angle(vector, n)

    plans = []
    for site in EntrySite:
        entry = frame.rw_center + site.displacement_mm * extension
        outer = entry - APPROACH_LENGTH_MM * vector
        depth = base_depth(frame, entry, vector, middle_marker)
        plans.append(InsertionPlan(
            entry_kind=site,
            entry_point=entry,
            vector=vector.copy(),
            clearance_facial_nerve_mm=distance_to_tube(scene.facial_nerve, outer, entry),
            clearance_chorda_mm=distance_to_tube(scene.chorda, outer, entry),
            clearance_ossicles_mm=distance_segment_to_mesh(scene.ossicles, outer, entry),
            tilt_deg=tilt,
            curl_clock=clock_encode(entry, centroid - entry, vector, frame.stapes_center),
            entry_clock=entry_clock,
            base_depth_mm=depth,
            overinsert_depth_mm=depth + PULLBACK_OVERINSERTION_MM,
            predicted_aid_deg=predicted_aid,
            predicted_mmd_mm=predicted_mmd,
        ))
    return plans


# --------------------------------------------------------------------------
# plan rendering
# --------------------------------------------------------------------------


def _depth_side(depth_mm):
    return "outside" if depth_mm < 0.0 else "inside"


def emit_plan_text(plan):
    """Render a plan as the four-paragraph surgical instruction sheet."""
    over = plan.overinsert_depth_mm
    base = plan.base_depth_mm
    paragraphs = [
        f"Entry site: {plan.entry_kind.label}.",
        (
            "Insertion vector: "
            "Distance of the insertion trajectory from the facial nerve: "
            f"{plan.clearance_facial_nerve_mm:.1f} mm. "
            "Distance of the insertion trajectory from the chorda: "
            f"{plan.clearance_chorda_mm:.1f} mm. "
            "Distance of the insertion trajectory from the ossicles: "
            f"{plan.clearance_ossicles_mm:.1f} mm. "
            "Tilt of the optimal trajectory with the round window plane "
            f"(0 degrees indicates perpendicular insertion): {plan.tilt_deg:.0f} degrees. "
            "Curl Direction (considering clock-face centered on the entry site and "
            f"the stapes footplate is at 12 o'clock): {plan.curl_clock.text}. "
            "Round window insertion site (considering clock-face centered on middle "
            f"of round window and the stapes footplate is at 12 o'clock): {plan.entry_clock.text}."
        ),
        (
            "Base insertion depth: The proximal (closest to the surgeon) marker "
            f"should be inserted until it is {over:.1f} mm past the entry point."
        ),
        (
            "Pullback: After the array is inserted with the proximal (closest to "
            f"the surgeon) marker {over:.1f} mm inside the entry point, then "
            f"pullback the array until the middle marker is {abs(base):.1f} mm "
            f"{_depth_side(base)} the entry point."
        ),
    ]
    return "\n\n".join(paragraphs) + "\n"


def plan_readouts(plan):
    """Preformatted display strings for every plan quantity."""
    return {
        "entry_site": plan.entry_kind.label,
        "clearance_facial_nerve": f"{plan.clearance_facial_nerve_mm:.1f} mm",
        "clearance_chorda": f"{plan.clearance_chorda_mm:.1f} mm",
        "clearance_ossicles": f"{plan.clearance_ossicles_mm:.1f} mm",
        "tilt": f"{plan.tilt_deg:.0f} degrees",
        "curl_clock": plan.curl_clock.text,
        "entry_clock": plan.entry_clock.text,
        "base_depth": (
            f"{abs(plan.base_depth_mm):.1f} mm "
            f"{_depth_side(plan.base_depth_mm)} the entry point"
        ),
        "overinsert_depth": f"{plan.overinsert_depth_mm:.1f} mm past the entry point",
        "predicted_aid": f"{plan.predicted_aid_deg:.0f} degrees",
        "predicted_mmd": f"{plan.predicted_mmd_mm:.2f} mm",
    }


# --------------------------------------------------------------------------
# viewer bundle export
# --------------------------------------------------------------------------


def _plan_payload(plan):
    return {
        "entry_kind": plan.entry_kind.value,
        "entry_point": [float(x) for x in plan.entry_point],
        "vector": [float(x) for x in plan.vector],
        "clearance_facial_nerve_mm": float(plan.clearance_facial_nerve_mm),
        "clearance_chorda_mm": float(plan.clearance_chorda_mm),
        "clearance_ossicles_mm": float(plan.clearance_ossicles_mm),
        "tilt_deg": float(plan.tilt_deg),
        "curl_clock": plan.curl_clock.text,
        "entry_clock": plan.entry_clock.text,
        "base_depth_mm": float(plan.base_depth_mm),
        "overinsert_depth_mm": float(plan.overinsert_depth_mm),
        "predicted_aid_deg": float(plan.predicted_aid_deg),
        "predicted_mmd_mm": float(plan.predicted_mmd_mm),
        "readouts": plan_readouts(plan),
        "plan_text": emit_plan_text(plan),
    }


def bundle_payload(case_id, scene, shape, registration, plans, mesh_refs=None):
    """Viewer-facing bundle dictionary: scene, registered array, and plans.

    Meshes named in `mesh_refs` are referenced by file name; the rest are
    inlined into the scene manifest.
    """
    if not case_id:
        raise ParameterError("case_id must be a non-empty string")
    posed = pose_shape(shape, registration.pose)
    return {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "units": "mm",
        "case_id": str(case_id),
        "scene": scene_manifest(scene, mesh_refs=mesh_refs),
        "array": {
            "contact_centers": [[float(x) for x in p] for p in posed.contact_centers],
            "marker_points": [[float(x) for x in p] for p in posed.marker_points],
            "contact_order": "tip_first",
            "registered_pose": {
                "rotation": [[float(x) for x in row] for row in registration.pose.rotation],
                "translation": [float(x) for x in registration.pose.translation],
            },
        },
        "plans": [_plan_payload(plan) for plan in plans],
    }


def export_scene_bundle(case_id, scene, shape, registration, plans, directory):
    """Write bundle.json plus one PLY per scene mesh into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    refs = {}
    for name in ("st", "sv", "modiolar_wall", "ossicles"):
        refs[name] = f"{name}.ply"
        save_mesh_ply(getattr(scene, name), directory / refs[name])
    payload = bundle_payload(case_id, scene, shape, registration, plans, mesh_refs=refs)
    path = directory / "bundle.json"
    path.write_text(json.dumps(payload, indent=1) + "\n")
    return path
