"""Pure-numpy reference implementation of the kernel API.

Everything here is vectorized over query batches where it matters; the
compiled extension mirrors this module function for function. Shapes are
anisotropically scaled primitives:

- SPHERE:   ext = semi-axes (ex, ey, ez), an ellipsoid
- CUBE:     ext = half-extents (hx, hy, hz)
- CYLINDER: ext = (a, b, hz) cross-section semi-axes and half-height

Closest-point queries for the ellipsoid and elliptic cross-section use
bisection on the standard rational root function; the bracket below is
valid for any query point, inside or out.
"""
from __future__ import annotations

import numpy as np

from ..geometry import quat_to_matrix

SPHERE = 0
CUBE = 1
CYLINDER = 2

_EPS = 1e-12
_BISECT_ITERS = 60


def _ellipse_root(e: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Solve sum_i (e_i u_i / (t + e_i^2))^2 = 1 for t, elementwise over rows of u.

    e is (d,) positive, u is (N, d) with u >= _EPS. The root is unique on
    (-min(e^2), inf) and the returned bracket endpoints always straddle it.
    """
    e2 = e * e
    eu = e[None, :] * u
    t_lo = np.max(eu - e2[None, :], axis=1)
    t_hi = np.linalg.norm(eu, axis=1) - e2.min()
    t_hi = np.maximum(t_hi, t_lo)
    for _ in range(_BISECT_ITERS):
        t_mid = 0.5 * (t_lo + t_hi)
        f = np.sum((eu / (t_mid[:, None] + e2[None, :])) ** 2, axis=1)
        above = f >= 1.0
        t_lo = np.where(above, t_mid, t_lo)
        t_hi = np.where(above, t_hi, t_mid)
    return 0.5 * (t_lo + t_hi)


def _ellipsoid_local(ext: np.ndarray, p: np.ndarray):
    """Closest surface point on an ellipsoid, in the body frame."""
    e = ext
    s = np.where(p < 0.0, -1.0, 1.0)
    u = np.maximum(np.abs(p), _EPS)
    inside = np.sum((u / e[None, :]) ** 2, axis=1) < 1.0
    e2 = e * e
    t = _ellipse_root(e, u)
    x = e2[None, :] * u / (t[:, None] + e2[None, :])
    # re-project exactly onto the surface to kill bisection residue
    x /= np.linalg.norm(x / e[None, :], axis=1, keepdims=True)
    n = x / e2[None, :]
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    dist = np.linalg.norm(u - x, axis=1)
    sd = np.where(inside, -dist, dist)
    return s * x, s * n, sd


def _box_local(ext: np.ndarray, p: np.ndarray):
    h = ext
    q = np.abs(p)
    over = np.maximum(q - h[None, :], 0.0)
    out_dist = np.linalg.norm(over, axis=1)
    outside = out_dist > 0.0

    surf_out = np.clip(p, -h[None, :], h[None, :])
    n_out = np.where(outside[:, None], p - surf_out, 1.0)
    n_out /= np.maximum(np.linalg.norm(n_out, axis=1, keepdims=True), _EPS)

    gaps = h[None, :] - q
    axis = np.argmin(gaps, axis=1)
    rows = np.arange(p.shape[0])
    sign = np.where(p[rows, axis] < 0.0, -1.0, 1.0)
    surf_in = p.copy()
    surf_in[rows, axis] = sign * h[axis]
    n_in = np.zeros_like(p)
    n_in[rows, axis] = sign
    sd_in = -gaps[rows, axis]

    surf = np.where(outside[:, None], surf_out, surf_in)
    nrm = np.where(outside[:, None], n_out, n_in)
    sd = np.where(outside, out_dist, sd_in)
    return surf, nrm, sd


def _cylinder_local(ext: np.ndarray, p: np.ndarray):
    a, b, hz = ext
    e2 = np.array([a, b])
    r = p[:, :2]
    z = p[:, 2]

    s2 = np.where(r < 0.0, -1.0, 1.0)
    u2 = np.maximum(np.abs(r), _EPS)
    t = _ellipse_root(e2, u2)
    x2 = (e2 * e2)[None, :] * u2 / (t[:, None] + (e2 * e2)[None, :])
    x2 /= np.linalg.norm(x2 / e2[None, :], axis=1, keepdims=True)
    n2 = x2 / (e2 * e2)[None, :]
    n2 /= np.linalg.norm(n2, axis=1, keepdims=True)
    dist2 = np.linalg.norm(u2 - x2, axis=1)
    cp2 = s2 * x2
    nrm2 = s2 * n2

    in_r = np.sum((r / e2[None, :]) ** 2, axis=1) <= 1.0
    in_z = np.abs(z) <= hz
    zsign = np.where(z < 0.0, -1.0, 1.0)

    N = p.shape[0]
    surf = np.zeros((N, 3))
    nrm = np.zeros((N, 3))
    sd = np.zeros(N)

    # fully inside: nearer of lateral wall and cap
    m = in_r & in_z
    wall = dist2[m]
    cap = hz - np.abs(z[m])
    use_wall = wall <= cap
    surf_m = np.where(
        use_wall[:, None],
        np.concatenate([cp2[m], z[m, None]], axis=1),
        np.concatenate([r[m], (zsign[m] * hz)[:, None]], axis=1),
    )
    nrm_m = np.where(
        use_wall[:, None],
        np.concatenate([nrm2[m], np.zeros((m.sum(), 1))], axis=1),
        np.concatenate([np.zeros((m.sum(), 2)), zsign[m, None]], axis=1),
    )
    surf[m] = surf_m
    nrm[m] = nrm_m
    sd[m] = -np.minimum(wall, cap)

    # over a cap, within the footprint
    m = in_r & ~in_z
    surf[m, :2] = r[m]
    surf[m, 2] = zsign[m] * hz
    nrm[m, 2] = zsign[m]
    sd[m] = np.abs(z[m]) - hz

    # beside the lateral wall
    m = ~in_r & in_z
    surf[m, :2] = cp2[m]
    surf[m, 2] = z[m]
    nrm[m, :2] = nrm2[m]
    sd[m] = dist2[m]

    # past the rim: nearest point is on the cap edge ellipse
    m = ~in_r & ~in_z
    surf[m, :2] = cp2[m]
    surf[m, 2] = zsign[m] * hz
    d = p[m] - surf[m]
    dn = np.linalg.norm(d, axis=1)
    nrm[m] = d / np.maximum(dn[:, None], _EPS)
    sd[m] = dn

    return surf, nrm, sd


def _closest_local(shape: int, ext: np.ndarray, p: np.ndarray):
    if shape == SPHERE:
        return _ellipsoid_local(ext, p)
    if shape == CUBE:
        return _box_local(ext, p)
    if shape == CYLINDER:
        return _cylinder_local(ext, p)
    raise ValueError(f"unknown shape id {shape}")


def closest_points(shape, ext, pos, quat, queries):
    """World-frame closest surface points.

    Returns (points (N,3), outward unit normals (N,3), signed distances (N,)).
    Signed distance is negative for queries inside the shape.
    """
    ext = np.asarray(ext, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    R = quat_to_matrix(np.asarray(quat, dtype=np.float64))
    local = (queries - pos) @ R
    surf, nrm, sd = _closest_local(int(shape), ext, local)
    return surf @ R.T + pos, nrm @ R.T, sd


def signed_distance(shape, ext, pos, quat, queries):
    """Signed distance only (cheaper than closest_points for search loops)."""
    ext = np.asarray(ext, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    R = quat_to_matrix(np.asarray(quat, dtype=np.float64))
    p = (queries - pos) @ R
    shape = int(shape)
    if shape == SPHERE:
        u = np.maximum(np.abs(p), _EPS)
        inside = np.sum((u / ext[None, :]) ** 2, axis=1) < 1.0
        t = _ellipse_root(ext, u)
        e2 = ext * ext
        x = e2[None, :] * u / (t[:, None] + e2[None, :])
        x /= np.linalg.norm(x / ext[None, :], axis=1, keepdims=True)
        d = np.linalg.norm(u - x, axis=1)
        return np.where(inside, -d, d)
    if shape == CUBE:
        q = np.abs(p) - ext[None, :]
        out = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        return out + np.minimum(q.max(axis=1), 0.0)
    if shape == CYLINDER:
        # exact, so reuse the closest-point path
        _, _, sd = _cylinder_local(ext, p)
        return sd
    raise ValueError(f"unknown shape id {shape}")


def occupancy(shape, ext, pos, quat, centers):
    """Inside tests for voxel cell centers; boundary counts as occupied."""
    ext = np.asarray(ext, dtype=np.float64)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    R = quat_to_matrix(np.asarray(quat, dtype=np.float64))
    p = (centers - pos) @ R
    shape = int(shape)
    if shape == SPHERE:
        inside = np.sum((p / ext[None, :]) ** 2, axis=1) <= 1.0
    elif shape == CUBE:
        inside = np.all(np.abs(p) <= ext[None, :], axis=1)
    elif shape == CYLINDER:
        a, b, hz = ext
        inside = (np.sum((p[:, :2] / np.array([a, b])[None, :]) ** 2, axis=1) <= 1.0) & (
            np.abs(p[:, 2]) <= hz
        )
    else:
        raise ValueError(f"unknown shape id {shape}")
    return inside.astype(np.uint8)


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = _INVPHI * _INVPHI


def _circumradius(shape, ext):
    if shape == SPHERE:
        return float(np.max(ext))
    if shape == CUBE:
        return float(np.linalg.norm(ext))
    a, b, hz = ext
    return float(np.hypot(max(a, b), hz))


def capsule_closest(shape, ext, pos, quat, p0, p1, reject_dist, n_iter=40):
    """Nearest approach of capsule core segments to one object.

    p0, p1 are (K,3) segment endpoints in world frame. Returns
    (t (K,), point (K,3), normal (K,3), sd (K,)) for the core point
    p0 + t (p1 - p0); the caller subtracts the capsule radius. The signed
    distance along a segment is convex for these shapes, so a golden
    section search finds the minimum. Segments whose conservative bound
    exceeds reject_dist get a single coarse evaluation instead.
    """
    ext = np.asarray(ext, dtype=np.float64)
    p0 = np.atleast_2d(np.asarray(p0, dtype=np.float64))
    p1 = np.atleast_2d(np.asarray(p1, dtype=np.float64))
    d = p1 - p0
    shape = int(shape)

    # conservative lower bound: distance from segment to center minus circumradius
    rel = np.asarray(pos, dtype=np.float64)[None, :] - p0
    dd = np.sum(d * d, axis=1)
    tt = np.clip(np.sum(rel * d, axis=1) / np.maximum(dd, _EPS), 0.0, 1.0)
    seg_center_dist = np.linalg.norm(p0 + tt[:, None] * d - pos, axis=1)
    coarse = seg_center_dist - _circumradius(shape, ext) > reject_dist

    t = tt.copy()
    fine = ~coarse
    if np.any(fine):
        a = np.zeros(fine.sum())
        b = np.ones(fine.sum())
        p0f = p0[fine]
        df = d[fine]

        def f(tv):
            return signed_distance(shape, ext, pos, quat, p0f + tv[:, None] * df)

        c = a + _INVPHI2 * (b - a)
        g = a + _INVPHI * (b - a)
        fc = f(c)
        fg = f(g)
        for _ in range(n_iter):
            left = fc < fg
            b = np.where(left, g, b)
            a = np.where(left, a, c)
            c = a + _INVPHI2 * (b - a)
            g = a + _INVPHI * (b - a)
            fc = f(c)
            fg = f(g)
        t[fine] = 0.5 * (a + b)

    q = p0 + t[:, None] * d
    point, normal, sd = closest_points(shape, ext, pos, quat, q)
    return t, point, normal, sd


def fk_hand(
    parents,
    offsets,
    rest_quat,
    dof_axis,
    joint_dof_start,
    joint_dof_count,
    tip_parent,
    tip_offset,
    wrist_pos,
    wrist_quat,
    q,
):
    """Forward kinematics over the packed skeleton.

    Joints are topologically ordered (parents first, -1 means the wrist).
    Each joint offsets from its parent frame, applies a fixed rest
    orientation, then its hinge rotations about local axes in sequence.
    Returns joint positions (J,3), joint orientations (J,4), fingertip
    positions (T,3), and per-dof world origin (D,3) / axis (D,3) used for
    contact jacobians.
    """
    from ..geometry import quat_from_axis_angle, quat_mul, quat_rotate

    J = parents.shape[0]
    D = q.shape[0]
    joint_pos = np.zeros((J, 3))
    joint_quat = np.zeros((J, 4))
    dof_origin = np.zeros((D, 3))
    dof_axis_w = np.zeros((D, 3))

    for j in range(J):
        par = parents[j]
        if par < 0:
            bp, bq = wrist_pos, wrist_quat
        else:
            bp, bq = joint_pos[par], joint_quat[par]
        pj = bp + quat_rotate(bq, offsets[j])
        Q = quat_mul(bq, rest_quat[j])
        for k in range(joint_dof_count[j]):
            i = joint_dof_start[j] + k
            dof_origin[i] = pj
            dof_axis_w[i] = quat_rotate(Q, dof_axis[i])
            Q = quat_mul(Q, quat_from_axis_angle(dof_axis[i], q[i]))
        joint_pos[j] = pj
        joint_quat[j] = Q

    T = tip_parent.shape[0]
    tip_pos = np.zeros((T, 3))
    for ti in range(T):
        par = tip_parent[ti]
        tip_pos[ti] = joint_pos[par] + quat_rotate(joint_quat[par], tip_offset[ti])
    return joint_pos, joint_quat, tip_pos, dof_origin, dof_axis_w


def contact_sweep(
    dt,
    kn,
    cn,
    mu,
    n_iters,
    slop,
    v_pushout,
    qdot,
    m_inv_dof,
    v,
    omega,
    inv_mass,
    iinv_world,
    obj_pos,
    side,
    x,
    n,
    depth,
    jac,
    base_vel,
):
    """Gauss-Seidel impulse sweep for implicitly integrated penalty contacts.

    Contact sides: 0 = hand vs object (jacobian rows drive hand dofs,
    reaction goes to the object), 1 = object vs floor. Normals point from
    the other body toward the body owning the impulse ("self"): toward the
    hand for side 0, toward the object for side 1.

    The normal solve is the kn/cn spring-damper in its implicit form: each
    contact drives the relative normal velocity toward
    kn*max(depth-slop, 0)/(dt*kn + cn), capped at v_pushout, with the
    impulse softened by 1/(dt*(dt*kn + cn)). For a sustained press this
    converges to force = kn*(depth-slop) like the explicit spring, but a
    light body resting under gravity reaches a genuine fixed point instead
    of the hop cycle an explicit depth-proportional impulse produces when
    dt*kn*depth/m far exceeds g*dt. Friction is a per-contact Coulomb cap
    ||jt|| <= mu*jn.

    Returns (qdot, v, omega, impulse (C,3) applied to self, jn (C,)).
    """
    qdot = qdot.copy()
    v = v.copy()
    omega = omega.copy()
    C = x.shape[0]
    jn_acc = np.zeros(C)
    jt_acc = np.zeros((C, 3))

    r = x - obj_pos[None, :]

    for _ in range(n_iters):
        for ci in range(C):
            nc = n[ci]
            rc = r[ci]
            hand_side = side[ci] == 0

            rxn = np.cross(rc, nc)
            ang = rxn @ iinv_world @ rxn
            if hand_side:
                jn_dof = jac[ci] @ nc
                m_inv_n = float(np.sum(m_inv_dof * jn_dof * jn_dof)) + inv_mass + ang
                v_self = base_vel[ci] + jac[ci].T @ qdot
                v_other = v + np.cross(omega, rc)
            else:
                m_inv_n = inv_mass + ang
                v_self = v + np.cross(omega, rc)
                v_other = np.zeros(3)
            v_rel = v_self - v_other
            vn = nc @ v_rel

            bias = kn * (depth[ci] - slop) / (dt * kn + cn)
            if bias < 0.0:
                bias = 0.0
            elif bias > v_pushout:
                bias = v_pushout
            denom = m_inv_n + 1.0 / (dt * (dt * kn + cn))
            j_new = jn_acc[ci] + (bias - vn) / denom
            j_new = max(j_new, 0.0)
            dj = j_new - jn_acc[ci]
            jn_acc[ci] = j_new
            if dj != 0.0:
                if hand_side:
                    qdot += m_inv_dof * jn_dof * dj
                    v -= inv_mass * nc * dj
                    omega -= (iinv_world @ rxn) * dj
                else:
                    v += inv_mass * nc * dj
                    omega += (iinv_world @ rxn) * dj

            # friction: drive tangential slip to zero, then clamp to the cone
            if hand_side:
                v_self = base_vel[ci] + jac[ci].T @ qdot
                v_other = v + np.cross(omega, rc)
            else:
                v_self = v + np.cross(omega, rc)
                v_other = np.zeros(3)
            v_rel = v_self - v_other
            vt = v_rel - (nc @ v_rel) * nc
            speed = np.linalg.norm(vt)
            if speed > 1e-9:
                td = vt / speed
                rxt = np.cross(rc, td)
                ang_t = rxt @ iinv_world @ rxt
                if hand_side:
                    jt_dof = jac[ci] @ td
                    m_inv_t = float(np.sum(m_inv_dof * jt_dof * jt_dof)) + inv_mass + ang_t
                else:
                    m_inv_t = inv_mass + ang_t
                if m_inv_t > 0.0:
                    target = jt_acc[ci] - (speed / m_inv_t) * td
                    cap = mu * jn_acc[ci]
                    mag = np.linalg.norm(target)
                    if mag > cap:
                        target *= cap / mag if mag > 0.0 else 0.0
                    dvec = target - jt_acc[ci]
                    jt_acc[ci] = target
                    if np.any(dvec != 0.0):
                        if hand_side:
                            qdot += m_inv_dof * (jac[ci] @ dvec)
                            v -= inv_mass * dvec
                            omega -= iinv_world @ np.cross(rc, dvec)
                        else:
                            v += inv_mass * dvec
                            omega += iinv_world @ np.cross(rc, dvec)

    imp = jn_acc[:, None] * n + jt_acc
    return qdot, v, omega, imp, jn_acc
