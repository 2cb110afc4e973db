"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written with different algorithms (and slower,
more obvious code) than the shipped implementations:

* point-to-triangle distance via the Eberly parametric (s, t) region walk,
  looped over every triangle (no spatial index, no vectorized kernel);
* point-in-mesh via the generalized winding number (van Oosterom / Strackee
  solid angle sum);
* segment-to-tube distance by brute-force sampling of the query segment at
  micrometre resolution with exact point-to-segment distances;
* brute-force symmetric Hausdorff distance over vertex sets.
"""
import math

import numpy as np


def point_triangle_distance(p, a, b, c):
    """Exact distance from point p to triangle (a, b, c), Eberly's method."""
    p = np.asarray(p, float)
    a = np.asarray(a, float)
    e0 = np.asarray(b, float) - a
    e1 = np.asarray(c, float) - a
    d = a - p
    aa = float(np.dot(e0, e0))
    bb = float(np.dot(e0, e1))
    cc = float(np.dot(e1, e1))
    dd = float(np.dot(e0, d))
    ee = float(np.dot(e1, d))
    det = aa * cc - bb * bb
    s = bb * ee - cc * dd
    t = bb * dd - aa * ee
    if s + t <= det:
        if s < 0.0:
            if t < 0.0:  # region 4
                if dd < 0.0:
                    t = 0.0
                    s = min(1.0, max(0.0, -dd / aa))
                else:
                    s = 0.0
                    t = min(1.0, max(0.0, -ee / cc))
            else:  # region 3
                s = 0.0
                t = min(1.0, max(0.0, -ee / cc))
        elif t < 0.0:  # region 5
            t = 0.0
            s = min(1.0, max(0.0, -dd / aa))
        else:  # region 0
            s /= det
            t /= det
    else:
        if s < 0.0:  # region 2
            tmp0 = bb + dd
            tmp1 = cc + ee
            if tmp1 > tmp0:
                numer = tmp1 - tmp0
                denom = aa - 2.0 * bb + cc
                s = min(1.0, max(0.0, numer / denom))
                t = 1.0 - s
            else:
                s = 0.0
                t = min(1.0, max(0.0, -ee / cc))
        elif t < 0.0:  # region 6
            tmp0 = bb + ee
            tmp1 = aa + dd
            if tmp1 > tmp0:
                numer = tmp1 - tmp0
                denom = aa - 2.0 * bb + cc
                t = min(1.0, max(0.0, numer / denom))
                s = 1.0 - t
            else:
                t = 0.0
                s = min(1.0, max(0.0, -dd / aa))
        else:  # region 1
            numer = (cc + ee) - (bb + dd)
            if numer <= 0.0:
                s = 0.0
            else:
                denom = aa - 2.0 * bb + cc
                s = min(1.0, max(0.0, numer / denom))
            t = 1.0 - s
    closest = a + s * e0 + t * e1
    return float(np.linalg.norm(closest - p))


def brute_force_mesh_distance(vertices, triangles, point):
    """O(n) scan over every triangle with the scalar kernel above."""
    vertices = np.asarray(vertices, float)
    best = math.inf
    for i0, i1, i2 in np.asarray(triangles, int):
        d = point_triangle_distance(point, vertices[i0], vertices[i1], vertices[i2])
        if d < best:
            best = d
    return best


def brute_force_mesh_distance_many(vertices, triangles, points):
    """Same Eberly kernel as above, evaluated for all triangles at once.

    A mask-cascade translation of the scalar region walk so that large
    query batches stay affordable; tests cross-check it against the
    scalar route before relying on it.
    """
    vertices = np.asarray(vertices, float)
    tri = np.asarray(triangles, int)
    a = vertices[tri[:, 0]]
    e0 = vertices[tri[:, 1]] - a
    e1 = vertices[tri[:, 2]] - a
    aa = np.einsum("ij,ij->i", e0, e0)
    bb = np.einsum("ij,ij->i", e0, e1)
    cc = np.einsum("ij,ij->i", e1, e1)
    det = aa * cc - bb * bb
    safe_det = np.where(det > 0.0, det, 1.0)
    denom_diag = aa - 2.0 * bb + cc
    safe_diag = np.where(denom_diag > 0.0, denom_diag, 1.0)

    pts = np.atleast_2d(np.asarray(points, float))
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        d = a - p
        dd = np.einsum("ij,ij->i", e0, d)
        ee = np.einsum("ij,ij->i", e1, d)
        s = bb * ee - cc * dd
        t = bb * dd - aa * ee
        s_low = s < 0.0
        t_low = t < 0.0
        inside = s + t <= det
        s_edge0 = np.clip(-dd / aa, 0.0, 1.0)
        t_edge1 = np.clip(-ee / cc, 0.0, 1.0)

        s_out = s / safe_det
        t_out = t / safe_det
        # regions 3 and 4 (interior strip, s clamped to the e1 edge)
        m = inside & s_low & (~t_low | (dd >= 0.0))
        s_out = np.where(m, 0.0, s_out)
        t_out = np.where(m, t_edge1, t_out)
        # regions 4 and 5 (interior strip, t clamped to the e0 edge)
        m = inside & t_low & (~s_low | (dd < 0.0))
        s_out = np.where(m, s_edge0, s_out)
        t_out = np.where(m, 0.0, t_out)
        # region 2 (past the far corner of e1)
        tmp0 = bb + dd
        tmp1 = cc + ee
        s_diag = np.clip((tmp1 - tmp0) / safe_diag, 0.0, 1.0)
        m = ~inside & s_low & (tmp1 > tmp0)
        s_out = np.where(m, s_diag, s_out)
        t_out = np.where(m, 1.0 - s_diag, t_out)
        m = ~inside & s_low & (tmp1 <= tmp0)
        s_out = np.where(m, 0.0, s_out)
        t_out = np.where(m, t_edge1, t_out)
        # region 6 (past the far corner of e0)
        tmp0 = bb + ee
        tmp1 = aa + dd
        t_diag = np.clip((tmp1 - tmp0) / safe_diag, 0.0, 1.0)
        m = ~inside & ~s_low & t_low & (tmp1 > tmp0)
        s_out = np.where(m, 1.0 - t_diag, s_out)
        t_out = np.where(m, t_diag, t_out)
        m = ~inside & ~s_low & t_low & (tmp1 <= tmp0)
        s_out = np.where(m, s_edge0, s_out)
        t_out = np.where(m, 0.0, t_out)
        # region 1 (beyond the diagonal edge)
        numer = (cc + ee) - (bb + dd)
        s_r1 = np.where(numer <= 0.0, 0.0, np.clip(numer / safe_diag, 0.0, 1.0))
        m = ~inside & ~s_low & ~t_low
        s_out = np.where(m, s_r1, s_out)
        t_out = np.where(m, 1.0 - s_r1, t_out)

        closest = a + s_out[:, None] * e0 + t_out[:, None] * e1
        gap = closest - p
        out[k] = math.sqrt(float(np.min(np.einsum("ij,ij->i", gap, gap))))
    return out


def winding_number(vertices, triangles, point):
    """Generalized winding number of a closed mesh around a point.

    Sum of signed solid angles (van Oosterom & Strackee 1983) over 4*pi.
    ~1.0 inside a watertight mesh, ~0.0 outside.
    """
    v = np.asarray(vertices, float) - np.asarray(point, float)
    t = np.asarray(triangles, int)
    a = v[t[:, 0]]
    b = v[t[:, 1]]
    c = v[t[:, 2]]
    la = np.linalg.norm(a, axis=1)
    lb = np.linalg.norm(b, axis=1)
    lc = np.linalg.norm(c, axis=1)
    numer = np.einsum("ij,ij->i", a, np.cross(b, c))
    denom = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc
             + np.einsum("ij,ij->i", b, c) * la
             + np.einsum("ij,ij->i", c, a) * lb)
    omega = 2.0 * np.arctan2(numer, denom)
    return float(np.sum(omega) / (4.0 * math.pi))


def winding_contains(vertices, triangles, point):
    return winding_number(vertices, triangles, point) > 0.5


def point_segment_distance(points, s0, s1):
    """Distance from each row of `points` to the segment s0-s1 (vectorized)."""
    points = np.atleast_2d(np.asarray(points, float))
    s0 = np.asarray(s0, float)
    d = np.asarray(s1, float) - s0
    denom = float(np.dot(d, d))
    if denom == 0.0:
        return np.linalg.norm(points - s0, axis=1)
    t = np.clip((points - s0) @ d / denom, 0.0, 1.0)
    closest = s0 + t[:, None] * d
    return np.linalg.norm(points - closest, axis=1)


def sampled_tube_distance(centerline, radius, q0, q1, step_mm=1e-3):
    """Segment-to-tube clearance by sampling the query segment at `step_mm`.

    For every sample point on the query segment the distance to each
    centerline polyline segment is exact; the tube radius is interpolated at
    the closest centerline parameter. Clamped at zero (touching/overlap).
    """
    centerline = np.asarray(centerline, float)
    radius = np.asarray(radius, float)
    q0 = np.asarray(q0, float)
    q1 = np.asarray(q1, float)
    length = float(np.linalg.norm(q1 - q0))
    n = max(2, int(math.ceil(length / step_mm)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    samples = q0 + ts[:, None] * (q1 - q0)

    best = np.full(n, np.inf)
    for i in range(len(centerline) - 1):
        c0, c1 = centerline[i], centerline[i + 1]
        d = c1 - c0
        denom = float(np.dot(d, d))
        u = np.clip((samples - c0) @ d / denom, 0.0, 1.0)
        closest = c0 + u[:, None] * d
        dist = np.linalg.norm(samples - closest, axis=1)
        local_r = radius[i] + u * (radius[i + 1] - radius[i])
        best = np.minimum(best, dist - local_r)
    return float(max(0.0, best.min()))


def hausdorff_vertices(a, b):
    """Symmetric Hausdorff distance between two vertex sets, brute force."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    forward = np.sqrt(d2.min(axis=1)).max()
    backward = np.sqrt(d2.min(axis=0)).max()
    return float(max(forward, backward))


def random_rotation(rng):
    """Uniform random rotation matrix via QR of a Gaussian matrix."""
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def rotation_angle_deg(r):
    """Rotation angle of a 3x3 rotation matrix, degrees."""
    tr = float(np.trace(r))
    return math.degrees(math.acos(max(-1.0, min(1.0, (tr - 1.0) / 2.0))))
