"""Triangle-mesh and tube geometry for inner-ear scenes.

This module provides the geometric substrate used by the planning and
evaluation layers:

* validated container types for triangle meshes, tubes with varying radius,
  the anatomical reference frame of a cochlea, and rigid transforms;
* exact point/segment distance queries against meshes and tubes, and a
  parity-based point containment test for watertight meshes;
* the angular coordinate of a point about the modiolar axis and the
  unwrapped (cumulative) angle along a sampled path;
* a parametric synthetic cochlea generator producing a watertight scala
  tympani duct, a scala vestibuli duct, the modiolar wall sheet, an
  ossicle body, and two nerve tubes flanking the surgical approach;
* ASCII PLY / STL mesh files and a JSON scene manifest with round-trip
  loaders.

All coordinates are millimetres.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCENE_MANIFEST_SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "scene_manifest.schema.json"

SCENE_FORMAT = "cochlear-scene"
SCENE_VERSION = 1


class GeometryError(Exception):
    """Base class for all geometry failures."""


class ParameterError(GeometryError):
    """An input value is outside its documented domain."""


class EmptyGeometryError(GeometryError):
    """A mesh or path with no usable elements was supplied."""


class TopologyError(GeometryError):
    """The mesh topology does not support the requested query."""


class DegeneratePointError(GeometryError):
    """The query point lies on the modiolar axis, so its angle is undefined."""


class UndersampledPathError(GeometryError):
    """Consecutive path points are separated by a half turn or more."""


def _vec3(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ParameterError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def _points(value, name, min_rows=1):
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ParameterError(f"{name} must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] < min_rows:
        raise EmptyGeometryError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def _unit(v, name):
    v = _vec3(v, name)
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > 1e-6:
        raise ParameterError(f"{name} must be a unit vector (norm {n:.3g})")
    return v / n


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: rotation (3x3, det +1) followed by translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = _vec3(self.translation, "translation")
        if r.shape != (3, 3):
            raise ParameterError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-8):
            raise ParameterError("rotation matrix is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise ParameterError("rotation matrix is a reflection (det < 0)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def rotate(self, directions):
        return np.asarray(directions, dtype=float) @ self.rotation.T

    def compose(self, other):
        """Transform equivalent to applying `other` first, then self."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rotation=rt, translation=-rt @ self.translation)


@dataclass
class TriMesh:
    """Indexed triangle surface with a short text label."""

    vertices: np.ndarray
    triangles: np.ndarray
    label: str = ""
    _closed: bool = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ParameterError(f"vertices must have shape (n, 3), got {v.shape}")
        if v.shape[0] == 0:
            raise EmptyGeometryError("mesh has no vertices")
        if not np.all(np.isfinite(v)):
            raise ParameterError("vertices contain non-finite values")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ParameterError(f"triangles must have shape (m, 3), got {t.shape}")
        if t.shape[0] == 0:
            raise EmptyGeometryError("mesh has no triangles")
        if not np.issubdtype(t.dtype, np.integer):
            raise ParameterError("triangle indices must be integers")
        t = t.astype(np.int64)
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise ParameterError("triangle index out of vertex range")
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        areas2 = np.linalg.norm(np.cross(b - a, c - a), axis=1)
        if np.any(areas2 < 1e-14):
            raise ParameterError("mesh contains a degenerate (zero-area) triangle")
        self.vertices = v
        self.triangles = t

    def is_closed(self):
        """True when every undirected edge is shared by exactly two triangles."""
        if self._closed is None:
            e = np.vstack([
                self.triangles[:, [0, 1]],
                self.triangles[:, [1, 2]],
                self.triangles[:, [2, 0]],
            ])
            e = np.sort(e, axis=1)
            _, counts = np.unique(e, axis=0, return_counts=True)
            self._closed = bool(np.all(counts == 2))
        return self._closed

    def transformed(self, transform):
        return TriMesh(
            vertices=transform.apply(self.vertices),
            triangles=self.triangles.copy(),
            label=self.label,
        )


@dataclass
class CenterlineTube:
    """Tube defined by a polyline centerline and a per-vertex radius."""

    centerline: np.ndarray
    radius: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = _points(self.centerline, "centerline", min_rows=2)
        r = np.asarray(self.radius, dtype=float)
        if r.shape != (c.shape[0],):
            raise ParameterError("radius must have one entry per centerline point")
        if np.any(~np.isfinite(r)) or np.any(r <= 0.0):
            raise ParameterError("tube radius values must be positive")
        if np.any(np.linalg.norm(np.diff(c, axis=0), axis=1) < 1e-12):
            raise ParameterError("centerline contains duplicate consecutive points")
        self.centerline = c
        self.radius = r

    def transformed(self, transform):
        return CenterlineTube(
            centerline=transform.apply(self.centerline),
            radius=self.radius.copy(),
            label=self.label,
        )


@dataclass
class CochlearFrame:
    """Anatomical reference frame of one cochlea.

    The modiolar axis passes through `apex_origin`; angles are measured in
    the plane perpendicular to it, starting from `zero_angle_ray` and
    increasing in the direction given by `winding` (+1 counterclockwise
    about the axis, -1 clockwise).
    """

    modiolar_axis: np.ndarray
    apex_origin: np.ndarray
    rw_center: np.ndarray
    rw_plane_normal: np.ndarray
    zero_angle_ray: np.ndarray
    stapes_center: np.ndarray
    winding: int = 1

    def __post_init__(self):
        self.modiolar_axis = _unit(self.modiolar_axis, "modiolar_axis")
        self.apex_origin = _vec3(self.apex_origin, "apex_origin")
        self.rw_center = _vec3(self.rw_center, "rw_center")
        self.rw_plane_normal = _unit(self.rw_plane_normal, "rw_plane_normal")
        self.zero_angle_ray = _unit(self.zero_angle_ray, "zero_angle_ray")
        self.stapes_center = _vec3(self.stapes_center, "stapes_center")
        if abs(float(np.dot(self.modiolar_axis, self.zero_angle_ray))) > 1e-6:
            raise ParameterError("zero_angle_ray must be perpendicular to modiolar_axis")
        if self.winding not in (1, -1):
            raise ParameterError("winding must be +1 or -1")

    def transformed(self, transform):
        return CochlearFrame(
            modiolar_axis=transform.rotate(self.modiolar_axis),
            apex_origin=transform.apply(self.apex_origin),
            rw_center=transform.apply(self.rw_center),
            rw_plane_normal=transform.rotate(self.rw_plane_normal),
            zero_angle_ray=transform.rotate(self.zero_angle_ray),
            stapes_center=transform.apply(self.stapes_center),
            winding=self.winding,
        )


@dataclass(frozen=True)
class SpiralParams:
    """Parameters of the synthetic cochlea generator.

    `turns` is the angular span of the scala tympani in degrees (at least a
    turn and a half). `taper` is the per-turn multiplicative shrink of the
    spiral radius; `rise` the axial climb per full turn. `ring_step_deg`
    and `section_count` set the mesh resolution. The seed perturbs global
    size factors so that different seeds give measurably different anatomy.
    """

    turns: float = 900.0
    basal_radius: float = 2.55
    taper: float = 0.72
    rise: float = 2.2
    duct_radius: float = 0.6
    ring_step_deg: float = 3.0
    section_count: int = 24
    seed: int = 0

    def __post_init__(self):
        if not (540.0 <= self.turns <= 1440.0):
            raise ParameterError("turns must lie in [540, 1440] degrees")
        if not (0.0 < self.taper <= 1.0):
            raise ParameterError("taper must lie in (0, 1]")
        if self.basal_radius <= 0.0:
            raise ParameterError("basal_radius must be positive")
        if self.rise < 0.0:
            raise ParameterError("rise must be non-negative")
        if self.duct_radius <= 0.0:
            raise ParameterError("duct_radius must be positive")
        if not (0.5 <= self.ring_step_deg <= 15.0):
            raise ParameterError("ring_step_deg must lie in [0.5, 15]")
        if self.section_count < 8:
            raise ParameterError("section_count must be at least 8")


@dataclass
class CochlearScene:
    """One synthetic or loaded cochlea with its surrounding structures."""

    st: TriMesh
    sv: TriMesh
    modiolar_wall: TriMesh
    ossicles: TriMesh
    facial_nerve: CenterlineTube
    chorda: CenterlineTube
    frame: CochlearFrame
    st_centerline_points: np.ndarray
    st_centerline_angles: np.ndarray

    def __post_init__(self):
        self.st_centerline_points = _points(self.st_centerline_points, "st_centerline_points", 2)
        angles = np.asarray(self.st_centerline_angles, dtype=float)
        if angles.shape != (self.st_centerline_points.shape[0],):
            raise ParameterError("st_centerline_angles must match st_centerline_points")
        self.st_centerline_angles = angles

    def transformed(self, transform):
        return CochlearScene(
            st=self.st.transformed(transform),
            sv=self.sv.transformed(transform),
            modiolar_wall=self.modiolar_wall.transformed(transform),
            ossicles=self.ossicles.transformed(transform),
            facial_nerve=self.facial_nerve.transformed(transform),
            chorda=self.chorda.transformed(transform),
            frame=self.frame.transformed(transform),
            st_centerline_points=transform.apply(self.st_centerline_points),
            st_centerline_angles=self.st_centerline_angles.copy(),
        )


# --------------------------------------------------------------------------
# distance and containment queries
# --------------------------------------------------------------------------

def _point_edge_distances(p, e0, e1):
    d = e1 - e0
    denom = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", p - e0, d) / denom, 0.0, 1.0)
    closest = e0 + t[:, None] * d
    return np.linalg.norm(p - closest, axis=1)


def _point_mesh_distance(mesh, point):
    p = np.asarray(point, dtype=float)
    tri = mesh.triangles
    a = mesh.vertices[tri[:, 0]]
    b = mesh.vertices[tri[:, 1]]
    c = mesh.vertices[tri[:, 2]]

    best = np.minimum(
        _point_edge_distances(p, a, b),
        np.minimum(_point_edge_distances(p, b, c), _point_edge_distances(p, c, a)),
    )

    # perpendicular foot, kept only where it lands inside the triangle
    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    ap = p - a
    t_plane = np.einsum("ij,ij->i", ap, n) / nn
    foot = p - t_plane[:, None] * n
    v2 = foot - a
    d00 = np.einsum("ij,ij->i", ab, ab)
    d01 = np.einsum("ij,ij->i", ab, ac)
    d11 = np.einsum("ij,ij->i", ac, ac)
    d20 = np.einsum("ij,ij->i", v2, ab)
    d21 = np.einsum("ij,ij->i", v2, ac)
    v = (d11 * d20 - d01 * d21) / nn
    w = (d00 * d21 - d01 * d20) / nn
    u = 1.0 - v - w
    inside = (u >= -1e-12) & (v >= -1e-12) & (w >= -1e-12)
    plane_dist = np.abs(t_plane) * np.sqrt(nn)
    best = np.where(inside, np.minimum(best, plane_dist), best)
    return float(best.min())


def distance_to_mesh(mesh, point):
    """Exact distance from a point to the closest point on the mesh surface."""
    p = _vec3(point, "point")
    return _point_mesh_distance(mesh, p)


def _closest_on_one_triangle(p, a, b, c):
    best = None
    best_d2 = math.inf
    for e0, e1 in ((a, b), (b, c), (c, a)):
        d = e1 - e0
        t = min(1.0, max(0.0, float(np.dot(p - e0, d) / np.dot(d, d))))
        q = e0 + t * d
        d2 = float(np.dot(p - q, p - q))
        if d2 < best_d2:
            best, best_d2 = q, d2
    n = np.cross(b - a, c - a)
    nn = float(np.dot(n, n))
    tp = float(np.dot(p - a, n) / nn)
    foot = p - tp * n
    v0, v1, v2 = b - a, c - a, foot - a
    d00 = float(np.dot(v0, v0))
    d01 = float(np.dot(v0, v1))
    d11 = float(np.dot(v1, v1))
    d20 = float(np.dot(v2, v0))
    d21 = float(np.dot(v2, v1))
    v = (d11 * d20 - d01 * d21) / nn
    w = (d00 * d21 - d01 * d20) / nn
    if v >= -1e-12 and w >= -1e-12 and (1.0 - v - w) >= -1e-12:
        d2 = float(np.dot(p - foot, p - foot))
        if d2 < best_d2:
            best = foot
    return best


def _pairwise_mesh_dist2(points, a, b, c):
    """Squared distance from each point to each triangle, shape (P, T)."""
    p = points[:, None, :]

    def edge_d2(e0, e1):
        d = e1 - e0
        denom = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("pij,ij->pi", p - e0, d) / denom, 0.0, 1.0)
        diff = p - (e0 + t[:, :, None] * d)
        return np.einsum("pij,pij->pi", diff, diff)

    d2 = np.minimum(edge_d2(a, b), np.minimum(edge_d2(b, c), edge_d2(c, a)))

    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    ap = p - a
    t_plane = np.einsum("pij,ij->pi", ap, n) / nn
    foot_rel = ap - t_plane[:, :, None] * n
    d20 = np.einsum("pij,ij->pi", foot_rel, ab)
    d21 = np.einsum("pij,ij->pi", foot_rel, ac)
    d00 = np.einsum("ij,ij->i", ab, ab)
    d01 = np.einsum("ij,ij->i", ab, ac)
    d11 = np.einsum("ij,ij->i", ac, ac)
    v = (d11 * d20 - d01 * d21) / nn
    w = (d00 * d21 - d01 * d20) / nn
    inside = (v >= -1e-12) & (w >= -1e-12) & ((1.0 - v - w) >= -1e-12)
    plane_d2 = t_plane * t_plane * nn
    return np.where(inside, np.minimum(d2, plane_d2), d2)


def closest_points_on_mesh(mesh, points):
    """Closest surface point for each query point, shape (P, 3)."""
    pts = _points(points, "points", min_rows=1)
    tri = mesh.triangles
    a = mesh.vertices[tri[:, 0]]
    b = mesh.vertices[tri[:, 1]]
    c = mesh.vertices[tri[:, 2]]
    d2 = _pairwise_mesh_dist2(pts, a, b, c)
    nearest_tri = np.argmin(d2, axis=1)
    out = np.empty_like(pts)
    for i, ti in enumerate(nearest_tri):
        out[i] = _closest_on_one_triangle(pts[i], a[ti], b[ti], c[ti])
    return out


def closest_point_on_mesh(mesh, point):
    """Closest surface point to a single query point."""
    p = _vec3(point, "point")
    return closest_points_on_mesh(mesh, p[None, :])[0]


def closest_points_on_polyline(polyline, points):
    """Closest point on an open polyline for each query point, shape (P, 3)."""
    poly = _points(polyline, "polyline", min_rows=2)
    pts = _points(points, "points", min_rows=1)
    s0 = poly[:-1]
    d = poly[1:] - s0
    denom = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("pij,ij->pi", pts[:, None, :] - s0, d) / denom, 0.0, 1.0)
    cand = s0 + t[:, :, None] * d
    diff = pts[:, None, :] - cand
    d2 = np.einsum("pij,pij->pi", diff, diff)
    seg = np.argmin(d2, axis=1)
    return cand[np.arange(len(pts)), seg]


_RAY_DIRECTIONS = [
    np.array(v) / np.linalg.norm(v)
    for v in [
        (3.0, 2.0, 1.0),
        (-2.0, 5.0, 1.0),
        (1.0, -3.0, 5.0),
        (7.0, 1.0, -3.0),
        (-1.0, -1.0, 4.0),
        (5.0, -2.0, -4.0),
        (2.0, 7.0, -1.0),
        (-3.0, 1.0, -5.0),
    ]
]


def _ray_parity(mesh, origin, direction):
    """Count strict ray-triangle crossings; flag borderline geometry."""
    tri = mesh.triangles
    v0 = mesh.vertices[tri[:, 0]]
    v1 = mesh.vertices[tri[:, 1]]
    v2 = mesh.vertices[tri[:, 2]]
    e1 = v1 - v0
    e2 = v2 - v0
    h = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    scale = np.sqrt(np.einsum("ij,ij->i", e1, e1) * np.einsum("ij,ij->i", e2, e2))
    parallel = np.abs(det) <= 1e-12 * scale

    s = origin[None, :] - v0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(parallel, np.nan, 1.0 / det)
        u = np.einsum("ij,ij->i", s, h) * inv
        q = np.cross(s, e1)
        v = (q @ direction) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv

    eps_b = 1e-10
    loose = ~parallel & (u >= -eps_b) & (v >= -eps_b) & (u + v <= 1.0 + eps_b) & (t > 1e-9)
    strict = ~parallel & (u > eps_b) & (v > eps_b) & (u + v < 1.0 - eps_b) & (t > 1e-9)

    # a ray grazing an edge, vertex, or coplanar triangle is untrustworthy
    n = np.cross(e1, e2)
    in_plane = parallel & (
        np.abs(np.einsum("ij,ij->i", s, n)) <= 1e-9 * np.linalg.norm(n, axis=1)
    )
    suspicious = bool(np.any(loose != strict) or np.any(in_plane))
    return int(strict.sum()), suspicious


def contains(mesh, point, surface_tol=1e-6):
    """True when the point is inside a watertight mesh or on its surface.

    Points within `surface_tol` of the surface count as contained. Raises
    TopologyError for meshes that are not closed.
    """
    if not mesh.is_closed():
        raise TopologyError(f"mesh {mesh.label!r} is not watertight; containment is undefined")
    p = _vec3(point, "point")
    if _point_mesh_distance(mesh, p) <= surface_tol:
        return True
    for direction in _RAY_DIRECTIONS:
        count, suspicious = _ray_parity(mesh, p, direction)
        if not suspicious:
            return count % 2 == 1
    raise GeometryError("could not find a ray direction with unambiguous crossings")


def _segment_segment_distances(q0, q1, p0, p1):
    """Distance between the query segment q0-q1 and each segment p0[i]-p1[i]."""
    d1 = q1 - q0
    d2 = p1 - p0
    r = q0[None, :] - p0
    a = float(np.dot(d1, d1))
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = r @ d1
    b = d2 @ d1
    denom = a * e - b * b

    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = np.where(e > 1e-14, (b * s + f) / e, 0.0)
        s_low = np.where(a > 1e-14, np.clip(-c / a, 0.0, 1.0), 0.0)
        s_high = np.where(a > 1e-14, np.clip((b - c) / a, 0.0, 1.0), 0.0)
    s = np.where(t < 0.0, s_low, np.where(t > 1.0, s_high, s))
    t = np.clip(t, 0.0, 1.0)

    cq = q0[None, :] + s[:, None] * d1[None, :]
    cp = p0 + t[:, None] * d2
    return np.linalg.norm(cq - cp, axis=1)


def _segment_triangle_intersects(mesh, q0, q1):
    tri = mesh.triangles
    v0 = mesh.vertices[tri[:, 0]]
    v1 = mesh.vertices[tri[:, 1]]
    v2 = mesh.vertices[tri[:, 2]]
    d = q1 - q0
    e1 = v1 - v0
    e2 = v2 - v0
    h = np.cross(d[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    scale = np.sqrt(np.einsum("ij,ij->i", e1, e1) * np.einsum("ij,ij->i", e2, e2))
    ok = np.abs(det) > 1e-14 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(ok, 1.0 / det, np.nan)
        s = q0[None, :] - v0
        u = np.einsum("ij,ij->i", s, h) * inv
        q = np.cross(s, e1)
        v = (q @ d) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= 0.0) & (t <= 1.0)
    return bool(np.any(hit))


def distance_segment_to_mesh(mesh, seg_start, seg_end):
    """Exact distance between a line segment and a mesh surface.

    Zero when the segment touches or crosses the surface. The minimum over
    a non-crossing pair is always attained at a segment endpoint or between
    the segment and a triangle edge, so those features are enumerated.
    """
    q0 = _vec3(seg_start, "seg_start")
    q1 = _vec3(seg_end, "seg_end")
    if _segment_triangle_intersects(mesh, q0, q1):
        return 0.0
    best = min(_point_mesh_distance(mesh, q0), _point_mesh_distance(mesh, q1))
    tri = mesh.triangles
    for i, j in ((0, 1), (1, 2), (2, 0)):
        d = _segment_segment_distances(q0, q1, mesh.vertices[tri[:, i]], mesh.vertices[tri[:, j]])
        best = min(best, float(d.min()))
    return best


def distance_to_tube(tube, seg_start, seg_end, samples_per_segment=65):
    """Clearance between a line segment and a tube surface, clamped at zero.

    The tube centerline is densely sampled (the sample set always contains
    the polyline vertices, where the distance function can kink); for every
    sampled cross-section the distance to the query segment is exact.
    """
    q0 = _vec3(seg_start, "seg_start")
    q1 = _vec3(seg_end, "seg_end")
    c = tube.centerline
    r = tube.radius
    u = np.linspace(0.0, 1.0, samples_per_segment)
    centers = c[:-1, None, :] + u[None, :, None] * (c[1:] - c[:-1])[:, None, :]
    radii = r[:-1, None] + u[None, :] * (r[1:] - r[:-1])[:, None]
    centers = centers.reshape(-1, 3)
    radii = radii.reshape(-1)

    d = q1 - q0
    denom = float(np.dot(d, d))
    if denom < 1e-24:
        dist = np.linalg.norm(centers - q0, axis=1)
    else:
        t = np.clip((centers - q0) @ d / denom, 0.0, 1.0)
        dist = np.linalg.norm(centers - (q0 + t[:, None] * d), axis=1)
    return float(max(0.0, (dist - radii).min()))


# --------------------------------------------------------------------------
# angular coordinates
# --------------------------------------------------------------------------

def _raw_angles(frame, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    axis = frame.modiolar_axis
    ray = frame.zero_angle_ray
    ybasis = np.cross(axis, ray)
    u = pts - frame.apex_origin
    u_inplane = u - np.outer(u @ axis, axis)
    if np.any(np.linalg.norm(u_inplane, axis=1) < 1e-9):
        raise DegeneratePointError("point lies on the modiolar axis")
    ang = np.degrees(np.arctan2(u_inplane @ ybasis, u_inplane @ ray))
    if frame.winding < 0:
        ang = -ang
    return ang % 360.0


def angular_coordinate(frame, point):
    """Angle of a point about the modiolar axis, degrees in [0, 360).

    Zero lies along the frame's zero-angle ray; the angle grows in the
    frame's winding direction.
    """
    p = _vec3(point, "point")
    return float(_raw_angles(frame, p[None, :])[0])


def unwind_angle(frame, path):
    """Cumulative angle along a sampled path, without modular wrapping.

    The first value equals the angular coordinate of the first point; each
    subsequent step adds the signed wrapped difference. Steps of half a
    turn or more are ambiguous and raise UndersampledPathError.
    """
    pts = _points(path, "path", min_rows=1)
    raw = _raw_angles(frame, pts)
    deltas = (np.diff(raw) + 180.0) % 360.0 - 180.0
    if np.any(np.abs(deltas) >= 180.0 - 1e-9):
        raise UndersampledPathError(
            "consecutive path points are at least half a turn apart; "
            "the winding between them is ambiguous"
        )
    out = np.empty(len(pts))
    out[0] = raw[0]
    if len(pts) > 1:
        out[1:] = raw[0] + np.cumsum(deltas)
    return out


# --------------------------------------------------------------------------
# synthetic scene construction
# --------------------------------------------------------------------------

def _signed_volume(vertices, triangles):
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def _orient_outward(vertices, triangles):
    if _signed_volume(vertices, triangles) < 0.0:
        triangles = triangles[:, [0, 2, 1]]
    return triangles


def _swept_tube(centers, radii, azimuth_deg, section_count, label):
    """Closed tube swept along a spiral centerline.

    Each cross-section lies in the meridional plane through the local ring
    center (spanned by the inward horizontal direction and the vertical
    axis); the first section vertex points inward, toward the spiral axis.
    Returns the closed mesh plus the (ring, section) vertex index grid.
    """
    n = len(centers)
    phi = np.radians(azimuth_deg)
    inward = -np.column_stack([np.cos(phi), np.sin(phi), np.zeros(n)])
    vertical = np.array([0.0, 0.0, 1.0])

    alpha = 2.0 * math.pi * np.arange(section_count) / section_count
    ring = (
        centers[:, None, :]
        + radii[:, None, None] * (
            np.cos(alpha)[None, :, None] * inward[:, None, :]
            + np.sin(alpha)[None, :, None] * vertical[None, None, :]
        )
    )
    grid = np.arange(n * section_count).reshape(n, section_count)
    vertices = ring.reshape(-1, 3)

    tris = []
    for i in range(n - 1):
        j = np.arange(section_count)
        jn = (j + 1) % section_count
        a = grid[i, j]
        b = grid[i + 1, j]
        c = grid[i + 1, jn]
        d = grid[i, jn]
        tris.append(np.column_stack([a, b, c]))
        tris.append(np.column_stack([a, c, d]))

    start_center = len(vertices)
    end_center = len(vertices) + 1
    vertices = np.vstack([vertices, centers[0], centers[-1]])
    j = np.arange(section_count)
    jn = (j + 1) % section_count
    tris.append(np.column_stack([np.full(section_count, start_center), grid[0, j], grid[0, jn]]))
    tris.append(np.column_stack([np.full(section_count, end_center), grid[-1, jn], grid[-1, j]]))

    triangles = _orient_outward(vertices, np.vstack(tris).astype(np.int64))
    return TriMesh(vertices=vertices, triangles=triangles, label=label), grid


def _wall_sheet(tube_mesh, grid, section_count, label):
    """Open sheet covering the inward-facing band of a swept tube."""
    span = section_count // 6  # 60 degrees to each side of the inward direction
    cols = list(range(section_count - span, section_count)) + list(range(span + 1))
    n = grid.shape[0]
    tris = []
    for i in range(n - 1):
        for k in range(len(cols) - 1):
            a = grid[i, cols[k]]
            b = grid[i + 1, cols[k]]
            c = grid[i + 1, cols[k + 1]]
            d = grid[i, cols[k + 1]]
            tris.append([a, b, c])
            tris.append([a, c, d])
    tris = np.asarray(tris, dtype=np.int64)
    used = np.unique(tris)
    remap = np.full(tube_mesh.vertices.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(
        vertices=tube_mesh.vertices[used].copy(),
        triangles=remap[tris],
        label=label,
    )


def _uv_sphere(center, radius, label, n_lat=9, n_lon=14):
    lat = np.linspace(-0.5 * math.pi, 0.5 * math.pi, n_lat + 2)[1:-1]
    lon = 2.0 * math.pi * np.arange(n_lon) / n_lon
    rings = []
    for la in lat:
        rings.append(np.column_stack([
            radius * math.cos(la) * np.cos(lon),
            radius * math.cos(la) * np.sin(lon),
            np.full(n_lon, radius * math.sin(la)),
        ]))
    vertices = np.vstack(rings) + np.asarray(center, float)
    south = len(vertices)
    north = len(vertices) + 1
    vertices = np.vstack([
        vertices,
        np.asarray(center, float) + [0.0, 0.0, -radius],
        np.asarray(center, float) + [0.0, 0.0, radius],
    ])
    grid = np.arange(n_lat * n_lon).reshape(n_lat, n_lon)
    tris = []
    j = np.arange(n_lon)
    jn = (j + 1) % n_lon
    tris.append(np.column_stack([np.full(n_lon, south), grid[0, jn], grid[0, j]]))
    for i in range(n_lat - 1):
        a = grid[i, j]
        b = grid[i, jn]
        c = grid[i + 1, jn]
        d = grid[i + 1, j]
        tris.append(np.column_stack([a, b, c]))
        tris.append(np.column_stack([a, c, d]))
    tris.append(np.column_stack([np.full(n_lon, north), grid[-1, j], grid[-1, jn]]))
    triangles = _orient_outward(vertices, np.vstack(tris).astype(np.int64))
    return TriMesh(vertices=vertices, triangles=triangles, label=label)


def synth_cochlea(params=None):
    """Build a synthetic cochlear scene from spiral parameters.

    The scala tympani follows a tapering spiral about the vertical axis,
    opening at the round window at angle zero; the scala vestibuli runs
    parallel above it. The modiolar wall is the inward-facing band of the
    scala tympani surface. An ossicle body sits above the round window
    near the stapes and two nerve tubes flank the surgical approach.
    """
    if params is None:
        params = SpiralParams()

    rng = np.random.default_rng(params.seed)
    factors = 1.0 + 0.04 * rng.uniform(-1.0, 1.0, size=6)
    basal = params.basal_radius * factors[0]
    rise = params.rise * factors[1]
    duct = params.duct_radius * factors[2]
    taper = params.taper ** (1.0 + 0.1 * (factors[3] - 1.0) / 0.04)

    n_steps = int(math.ceil(params.turns / params.ring_step_deg))
    angles = np.arange(n_steps + 1) * params.ring_step_deg
    frac = angles / 360.0
    r = basal * taper ** frac
    phi = np.radians(angles)
    centers = np.column_stack([r * np.cos(phi), r * np.sin(phi), rise * frac])

    rho_st = duct * taper ** (frac / 2.0)
    rho_sv = 0.8 * rho_st
    st, st_grid = _swept_tube(centers, rho_st, angles, params.section_count, "st")
    wall = _wall_sheet(st, st_grid, params.section_count, "modiolar_wall")

    lift = rho_st + rho_sv + 0.15
    sv_centers = centers + np.column_stack([np.zeros_like(lift), np.zeros_like(lift), lift])
    sv, _ = _swept_tube(sv_centers, rho_sv, angles, params.section_count, "sv")

    rw_center = centers[0]
    tangent0 = np.array([
        basal * math.log(taper) / 360.0,
        basal * math.pi / 180.0,
        rise / 360.0,
    ])
    tangent0 /= np.linalg.norm(tangent0)
    stapes_center = rw_center + np.array([0.5, 0.0, 1.8])
    frame = CochlearFrame(
        modiolar_axis=np.array([0.0, 0.0, 1.0]),
        apex_origin=np.array([0.0, 0.0, rise * params.turns / 360.0]),
        rw_center=rw_center,
        rw_plane_normal=tangent0,
        zero_angle_ray=np.array([1.0, 0.0, 0.0]),
        stapes_center=stapes_center,
        winding=1,
    )

    ossicles = _uv_sphere(stapes_center + np.array([0.0, 0.0, 0.3]), 0.8 * factors[4], "ossicles")

    # nerve tubes flank the corridor that runs outward from the round window
    idx60 = int(np.searchsorted(angles, 60.0))
    v_in = centers[idx60] - rw_center
    v_in /= np.linalg.norm(v_in)
    lateral = np.cross(v_in, np.array([0.0, 0.0, 1.0]))
    lateral /= np.linalg.norm(lateral)

    fn_dir = np.array([0.06, 0.03, 1.0])
    fn_dir /= np.linalg.norm(fn_dir)
    fn_anchor = rw_center - 5.0 * v_in + 2.6 * lateral
    fn_s = np.linspace(-7.0, 7.0, 29)
    facial_nerve = CenterlineTube(
        centerline=fn_anchor + fn_s[:, None] * fn_dir,
        radius=np.full(len(fn_s), 0.6 * factors[5]),
        label="facial_nerve",
    )

    ch_dir = np.array([-0.05, 0.04, 1.0])
    ch_dir /= np.linalg.norm(ch_dir)
    ch_anchor = rw_center - 4.0 * v_in - 1.8 * lateral
    ch_s = np.linspace(-6.0, 6.0, 25)
    chorda = CenterlineTube(
        centerline=ch_anchor + ch_s[:, None] * ch_dir,
        radius=np.full(len(ch_s), 0.25 * factors[5]),
        label="chorda",
    )

    return CochlearScene(
        st=st,
        sv=sv,
        modiolar_wall=wall,
        ossicles=ossicles,
        facial_nerve=facial_nerve,
        chorda=chorda,
        frame=frame,
        st_centerline_points=centers,
        st_centerline_angles=angles,
    )


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------

def save_mesh_ply(mesh, path):
    """Write an ASCII PLY file with full double precision."""
    path = Path(path)
    lines = [
        "ply",
        "format ascii 1.0",
        "comment units mm",
    ]
    if mesh.label:
        lines.append(f"comment label {mesh.label}")
    lines += [
        f"element vertex {len(mesh.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for t in mesh.triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    path.write_text("\n".join(lines) + "\n")


def load_mesh_ply(path):
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParameterError(f"{path} is not a PLY file")
    n_vert = n_face = None
    label = ""
    i = 1
    while i < len(lines):
        row = lines[i].strip()
        i += 1
        if row == "end_header":
            break
        parts = row.split()
        if parts[:2] == ["comment", "label"]:
            label = " ".join(parts[2:])
        elif parts[:2] == ["element", "vertex"]:
            n_vert = int(parts[2])
        elif parts[:2] == ["element", "face"]:
            n_face = int(parts[2])
    if n_vert is None or n_face is None:
        raise ParameterError(f"{path} is missing vertex or face counts")
    vertices = np.array(
        [[float(x) for x in lines[i + k].split()[:3]] for k in range(n_vert)]
    )
    triangles = []
    for k in range(n_face):
        parts = lines[i + n_vert + k].split()
        if int(parts[0]) != 3:
            raise ParameterError("only triangle faces are supported")
        triangles.append([int(parts[1]), int(parts[2]), int(parts[3])])
    return TriMesh(vertices=vertices, triangles=np.asarray(triangles, dtype=np.int64), label=label)


def save_mesh_stl(mesh, path):
    """Write an ASCII STL file (triangle soup, full double precision)."""
    path = Path(path)
    out = [f"solid {mesh.label}"]
    v = mesh.vertices
    for t in mesh.triangles:
        a, b, c = v[t[0]], v[t[1]], v[t[2]]
        n = np.cross(b - a, c - a)
        n = n / np.linalg.norm(n)
        out.append(f"  facet normal {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}")
        out.append("    outer loop")
        for p in (a, b, c):
            out.append(f"      vertex {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
        out.append("    endloop")
        out.append("  endfacet")
    out.append(f"endsolid {mesh.label}")
    path.write_text("\n".join(out) + "\n")


def load_mesh_stl(path):
    """Read an ASCII STL file, welding identical vertices back together."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].lstrip().startswith("solid"):
        raise ParameterError(f"{path} is not an ASCII STL file")
    label = lines[0].strip()[len("solid"):].strip()
    index = {}
    vertices = []
    triangles = []
    current = []
    for row in lines[1:]:
        parts = row.split()
        if parts and parts[0] == "vertex":
            key = (parts[1], parts[2], parts[3])
            if key not in index:
                index[key] = len(vertices)
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            current.append(index[key])
        elif parts and parts[0] == "endfacet":
            if len(current) != 3:
                raise ParameterError("STL facet does not have exactly three vertices")
            triangles.append(current)
            current = []
    return TriMesh(
        vertices=np.asarray(vertices, dtype=float),
        triangles=np.asarray(triangles, dtype=np.int64),
        label=label,
    )


def _tube_payload(tube):
    return {
        "centerline": [[float(x) for x in p] for p in tube.centerline],
        "radius": [float(x) for x in tube.radius],
    }


def _frame_payload(frame):
    return {
        "modiolar_axis": [float(x) for x in frame.modiolar_axis],
        "apex_origin": [float(x) for x in frame.apex_origin],
        "rw_center": [float(x) for x in frame.rw_center],
        "rw_plane_normal": [float(x) for x in frame.rw_plane_normal],
        "zero_angle_ray": [float(x) for x in frame.zero_angle_ray],
        "stapes_center": [float(x) for x in frame.stapes_center],
        "winding": int(frame.winding),
    }


def scene_manifest(scene, mesh_refs=None):
    """Build the JSON manifest for a scene.

    `mesh_refs` maps mesh names to file names; meshes without a file
    reference are inlined as vertex and triangle arrays.
    """
    mesh_refs = mesh_refs or {}
    meshes = {}
    for name in ("st", "sv", "modiolar_wall", "ossicles"):
        mesh = getattr(scene, name)
        if name in mesh_refs:
            meshes[name] = {"file": mesh_refs[name]}
        else:
            meshes[name] = {
                "vertices": [[float(x) for x in v] for v in mesh.vertices],
                "triangles": [[int(x) for x in t] for t in mesh.triangles],
            }
    return {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "units": "mm",
        "meshes": meshes,
        "tubes": {
            "facial_nerve": _tube_payload(scene.facial_nerve),
            "chorda": _tube_payload(scene.chorda),
        },
        "frame": _frame_payload(scene.frame),
        "st_centerline": {
            "points": [[float(x) for x in p] for p in scene.st_centerline_points],
            "angles_deg": [float(a) for a in scene.st_centerline_angles],
        },
    }


def save_scene(scene, directory):
    """Write a scene directory: one PLY per mesh plus a scene.json manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    refs = {}
    for name in ("st", "sv", "modiolar_wall", "ossicles"):
        refs[name] = f"{name}.ply"
        save_mesh_ply(getattr(scene, name), directory / refs[name])
    manifest = scene_manifest(scene, mesh_refs=refs)
    (directory / "scene.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return directory / "scene.json"


def _mesh_from_manifest(entry, directory, fallback_label):
    if "file" in entry:
        return load_mesh_ply(Path(directory) / entry["file"])
    return TriMesh(
        vertices=np.asarray(entry["vertices"], dtype=float),
        triangles=np.asarray(entry["triangles"], dtype=np.int64),
        label=entry.get("label", fallback_label),
    )


def scene_from_manifest(manifest, directory="."):
    """Rebuild a scene from a parsed manifest dictionary."""
    if manifest.get("format") != SCENE_FORMAT:
        raise ParameterError(f"not a {SCENE_FORMAT} manifest")
    meshes = manifest["meshes"]
    tubes = manifest["tubes"]
    fr = manifest["frame"]
    cl = manifest["st_centerline"]
    return CochlearScene(
        st=_mesh_from_manifest(meshes["st"], directory, "st"),
        sv=_mesh_from_manifest(meshes["sv"], directory, "sv"),
        modiolar_wall=_mesh_from_manifest(meshes["modiolar_wall"], directory, "modiolar_wall"),
        ossicles=_mesh_from_manifest(meshes["ossicles"], directory, "ossicles"),
        facial_nerve=CenterlineTube(
            centerline=np.asarray(tubes["facial_nerve"]["centerline"], dtype=float),
            radius=np.asarray(tubes["facial_nerve"]["radius"], dtype=float),
            label="facial_nerve",
        ),
        chorda=CenterlineTube(
            centerline=np.asarray(tubes["chorda"]["centerline"], dtype=float),
            radius=np.asarray(tubes["chorda"]["radius"], dtype=float),
            label="chorda",
        ),
        frame=CochlearFrame(
            modiolar_axis=np.asarray(fr["modiolar_axis"], dtype=float),
            apex_origin=np.asarray(fr["apex_origin"], dtype=float),
            rw_center=np.asarray(fr["rw_center"], dtype=float),
            rw_plane_normal=np.asarray(fr["rw_plane_normal"], dtype=float),
            zero_angle_ray=np.asarray(fr["zero_angle_ray"], dtype=float),
            stapes_center=np.asarray(fr["stapes_center"], dtype=float),
            winding=int(fr["winding"]),
        ),
        st_centerline_points=np.asarray(cl["points"], dtype=float),
        st_centerline_angles=np.asarray(cl["angles_deg"], dtype=float),
    )


def load_scene(directory):
    """Read a scene directory written by save_scene."""
    directory = Path(directory)
    manifest_path = directory / "scene.json"
    if not manifest_path.exists():
        raise ParameterError(f"no scene.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    return scene_from_manifest(manifest, directory)
