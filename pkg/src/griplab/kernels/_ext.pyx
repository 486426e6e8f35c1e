# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirror of numpy_backend.

Same API, same math, scalar C loops instead of vectorized numpy. The
per-query work here is tiny (3-vectors, 60-step bisections), so the
numpy version pays dispatch overhead per element batch; this one does
not. Parity with the reference backend is enforced by tests.
"""

import numpy as np

cimport cython
from libc.math cimport sqrt, sin, cos, fabs

SPHERE = 0
CUBE = 1
CYLINDER = 2

cdef double _EPS = 1e-12
cdef int _BISECT_ITERS = 60
cdef double _INVPHI = (sqrt(5.0) - 1.0) / 2.0
cdef double _INVPHI2 = _INVPHI * _INVPHI

cdef int _SPHERE = 0
cdef int _CUBE = 1
cdef int _CYLINDER = 2


# ----------------------------------------------------------------小 vec ops

cdef inline double _dot3(double* a, double* b) nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]

cdef inline double _norm3(double* a) nogil:
    return sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])

cdef inline void _cross3(double* a, double* b, double* out) nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]

cdef inline void _quat_to_matrix(double* q, double* R) nogil:
    # row-major 3x3, same formula as geometry.quat_to_matrix
    cdef double w = q[0], x = q[1], y = q[2], z = q[3]
    cdef double xx = x * x, yy = y * y, zz = z * z
    cdef double xy = x * y, xz = x * z, yz = y * z
    cdef double wx = w * x, wy = w * y, wz = w * z
    R[0] = 1.0 - 2.0 * (yy + zz); R[1] = 2.0 * (xy - wz);       R[2] = 2.0 * (xz + wy)
    R[3] = 2.0 * (xy + wz);       R[4] = 1.0 - 2.0 * (xx + zz); R[5] = 2.0 * (yz - wx)
    R[6] = 2.0 * (xz - wy);       R[7] = 2.0 * (yz + wx);       R[8] = 1.0 - 2.0 * (xx + yy)

cdef inline void _matvec(double* R, double* v, double* out) nogil:
    out[0] = R[0] * v[0] + R[1] * v[1] + R[2] * v[2]
    out[1] = R[3] * v[0] + R[4] * v[1] + R[5] * v[2]
    out[2] = R[6] * v[0] + R[7] * v[1] + R[8] * v[2]

cdef inline void _matvec_t(double* R, double* v, double* out) nogil:
    out[0] = R[0] * v[0] + R[3] * v[1] + R[6] * v[2]
    out[1] = R[1] * v[0] + R[4] * v[1] + R[7] * v[2]
    out[2] = R[2] * v[0] + R[5] * v[1] + R[8] * v[2]

cdef inline void _quat_mul(double* a, double* b, double* out) nogil:
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]

cdef inline void _quat_from_axis_angle(double* axis, double angle, double* out) nogil:
    cdef double n = _norm3(axis)
    cdef double half, s
    if n == 0.0:
        out[0] = 1.0; out[1] = 0.0; out[2] = 0.0; out[3] = 0.0
        return
    half = 0.5 * angle
    s = sin(half) / n
    out[0] = cos(half)
    out[1] = axis[0] * s
    out[2] = axis[1] * s
    out[3] = axis[2] * s

cdef inline void _quat_rotate(double* q, double* v, double* out) nogil:
    cdef double R[9]
    _quat_to_matrix(q, R)
    _matvec(R, v, out)


# ----------------------------------------------------- closest-point kernels

cdef double _ellipse_root_s(int d, double* e, double* u) nogil:
    cdef double e2[3]
    cdef double eu[3]
    cdef double t_lo, t_hi, t_mid, f, e2min, nrm
    cdef int i, it
    nrm = 0.0
    e2min = e[0] * e[0]
    t_lo = -1e300
    for i in range(d):
        e2[i] = e[i] * e[i]
        eu[i] = e[i] * u[i]
        nrm += eu[i] * eu[i]
        if e2[i] < e2min:
            e2min = e2[i]
        if eu[i] - e2[i] > t_lo:
            t_lo = eu[i] - e2[i]
    t_hi = sqrt(nrm) - e2min
    if t_hi < t_lo:
        t_hi = t_lo
    for it in range(_BISECT_ITERS):
        t_mid = 0.5 * (t_lo + t_hi)
        f = 0.0
        for i in range(d):
            f += (eu[i] / (t_mid + e2[i])) ** 2
        if f >= 1.0:
            t_lo = t_mid
        else:
            t_hi = t_mid
    return 0.5 * (t_lo + t_hi)


cdef void _ellipsoid_local_s(double* e, double* p, double* surf, double* nrm, double* sd) nogil:
    cdef double s[3]
    cdef double u[3]
    cdef double x[3]
    cdef double n[3]
    cdef double e2[3]
    cdef double t, q, xn, nn, dist
    cdef int i
    cdef bint inside
    q = 0.0
    for i in range(3):
        s[i] = -1.0 if p[i] < 0.0 else 1.0
        u[i] = fabs(p[i])
        if u[i] < _EPS:
            u[i] = _EPS
        e2[i] = e[i] * e[i]
        q += (u[i] / e[i]) ** 2
    inside = q < 1.0
    t = _ellipse_root_s(3, e, u)
    xn = 0.0
    for i in range(3):
        x[i] = e2[i] * u[i] / (t + e2[i])
        xn += (x[i] / e[i]) ** 2
    xn = sqrt(xn)
    nn = 0.0
    for i in range(3):
        x[i] /= xn
        n[i] = x[i] / e2[i]
        nn += n[i] * n[i]
    nn = sqrt(nn)
    dist = 0.0
    for i in range(3):
        n[i] /= nn
        dist += (u[i] - x[i]) ** 2
    dist = sqrt(dist)
    sd[0] = -dist if inside else dist
    for i in range(3):
        surf[i] = s[i] * x[i]
        nrm[i] = s[i] * n[i]


cdef void _box_local_s(double* h, double* p, double* surf, double* nrm, double* sd) nogil:
    cdef double q[3]
    cdef double over[3]
    cdef double out_dist, nn, gap, best_gap, sign
    cdef int i, axis
    out_dist = 0.0
    for i in range(3):
        q[i] = fabs(p[i])
        over[i] = q[i] - h[i]
        if over[i] < 0.0:
            over[i] = 0.0
        out_dist += over[i] * over[i]
    out_dist = sqrt(out_dist)
    if out_dist > 0.0:
        nn = 0.0
        for i in range(3):
            surf[i] = p[i]
            if surf[i] > h[i]:
                surf[i] = h[i]
            elif surf[i] < -h[i]:
                surf[i] = -h[i]
            nrm[i] = p[i] - surf[i]
            nn += nrm[i] * nrm[i]
        nn = sqrt(nn)
        if nn < _EPS:
            nn = _EPS
        for i in range(3):
            nrm[i] /= nn
        sd[0] = out_dist
    else:
        axis = 0
        best_gap = h[0] - q[0]
        for i in range(1, 3):
            gap = h[i] - q[i]
            if gap < best_gap:
                best_gap = gap
                axis = i
        sign = -1.0 if p[axis] < 0.0 else 1.0
        for i in range(3):
            surf[i] = p[i]
            nrm[i] = 0.0
        surf[axis] = sign * h[axis]
        nrm[axis] = sign
        sd[0] = -best_gap


cdef void _cylinder_local_s(double* ext, double* p, double* surf, double* nrm, double* sd) nogil:
    cdef double e[2]
    cdef double s2[2]
    cdef double u2[2]
    cdef double x2[2]
    cdef double n2[2]
    cdef double cp2[2]
    cdef double nrm2[2]
    cdef double d[3]
    cdef double a = ext[0], b = ext[1], hz = ext[2]
    cdef double z = p[2], t, xn, nn, dist2, rq, zsign, wall, cap, dn
    cdef int i
    cdef bint in_r, in_z
    e[0] = a; e[1] = b
    rq = 0.0
    for i in range(2):
        s2[i] = -1.0 if p[i] < 0.0 else 1.0
        u2[i] = fabs(p[i])
        if u2[i] < _EPS:
            u2[i] = _EPS
        rq += (p[i] / e[i]) ** 2
    t = _ellipse_root_s(2, e, u2)
    xn = 0.0
    for i in range(2):
        x2[i] = e[i] * e[i] * u2[i] / (t + e[i] * e[i])
        xn += (x2[i] / e[i]) ** 2
    xn = sqrt(xn)
    nn = 0.0
    for i in range(2):
        x2[i] /= xn
        n2[i] = x2[i] / (e[i] * e[i])
        nn += n2[i] * n2[i]
    nn = sqrt(nn)
    dist2 = 0.0
    for i in range(2):
        n2[i] /= nn
        dist2 += (u2[i] - x2[i]) ** 2
        cp2[i] = s2[i] * x2[i]
        nrm2[i] = s2[i] * n2[i]
    dist2 = sqrt(dist2)

    in_r = rq <= 1.0
    in_z = fabs(z) <= hz
    zsign = -1.0 if z < 0.0 else 1.0

    if in_r and in_z:
        wall = dist2
        cap = hz - fabs(z)
        if wall <= cap:
            surf[0] = cp2[0]; surf[1] = cp2[1]; surf[2] = z
            nrm[0] = nrm2[0]; nrm[1] = nrm2[1]; nrm[2] = 0.0
        else:
            surf[0] = p[0]; surf[1] = p[1]; surf[2] = zsign * hz
            nrm[0] = 0.0; nrm[1] = 0.0; nrm[2] = zsign
        sd[0] = -(wall if wall < cap else cap)
    elif in_r:
        surf[0] = p[0]; surf[1] = p[1]; surf[2] = zsign * hz
        nrm[0] = 0.0; nrm[1] = 0.0; nrm[2] = zsign
        sd[0] = fabs(z) - hz
    elif in_z:
        surf[0] = cp2[0]; surf[1] = cp2[1]; surf[2] = z
        nrm[0] = nrm2[0]; nrm[1] = nrm2[1]; nrm[2] = 0.0
        sd[0] = dist2
    else:
        surf[0] = cp2[0]; surf[1] = cp2[1]; surf[2] = zsign * hz
        dn = 0.0
        for i in range(3):
            d[i] = p[i] - surf[i]
            dn += d[i] * d[i]
        dn = sqrt(dn)
        sd[0] = dn
        if dn < _EPS:
            dn = _EPS
        for i in range(3):
            nrm[i] = d[i] / dn


cdef void _closest_local_s(int shape, double* ext, double* p, double* surf, double* nrm, double* sd) nogil:
    if shape == _SPHERE:
        _ellipsoid_local_s(ext, p, surf, nrm, sd)
    elif shape == _CUBE:
        _box_local_s(ext, p, surf, nrm, sd)
    else:
        _cylinder_local_s(ext, p, surf, nrm, sd)


cdef double _sd_local_s(int shape, double* ext, double* p) nogil:
    cdef double u[3]
    cdef double x[3]
    cdef double q[3]
    cdef double surf[3]
    cdef double nrm[3]
    cdef double e2[3]
    cdef double sd, t, xn, d, inside_q, out, mx
    cdef int i
    if shape == _SPHERE:
        inside_q = 0.0
        for i in range(3):
            u[i] = fabs(p[i])
            if u[i] < _EPS:
                u[i] = _EPS
            e2[i] = ext[i] * ext[i]
            inside_q += (u[i] / ext[i]) ** 2
        t = _ellipse_root_s(3, ext, u)
        xn = 0.0
        for i in range(3):
            x[i] = e2[i] * u[i] / (t + e2[i])
            xn += (x[i] / ext[i]) ** 2
        xn = sqrt(xn)
        d = 0.0
        for i in range(3):
            x[i] /= xn
            d += (u[i] - x[i]) ** 2
        d = sqrt(d)
        return -d if inside_q < 1.0 else d
    if shape == _CUBE:
        out = 0.0
        mx = -1e300
        for i in range(3):
            q[i] = fabs(p[i]) - ext[i]
            if q[i] > mx:
                mx = q[i]
            if q[i] > 0.0:
                out += q[i] * q[i]
        out = sqrt(out)
        return out + (mx if mx < 0.0 else 0.0)
    _cylinder_local_s(ext, p, surf, nrm, &sd)
    return sd


def closest_points(shape, ext, pos, quat, queries):
    """World-frame closest surface points; see numpy_backend.closest_points."""
    cdef double[::1] e = np.ascontiguousarray(ext, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(pos, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(quat, dtype=np.float64)
    cdef double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef int N = pts.shape[0]
    cdef int sh = int(shape)
    out_p = np.empty((N, 3))
    out_n = np.empty((N, 3))
    out_sd = np.empty(N)
    cdef double[:, ::1] op = out_p
    cdef double[:, ::1] on = out_n
    cdef double[::1] osd = out_sd
    cdef double R[9]
    cdef double loc[3]
    cdef double rel[3]
    cdef double surf[3]
    cdef double nrm[3]
    cdef double w[3]
    cdef double sd
    cdef int i, k
    _quat_to_matrix(&qv[0], R)
    with nogil:
        for i in range(N):
            for k in range(3):
                rel[k] = pts[i, k] - c[k]
            _matvec_t(R, rel, loc)
            _closest_local_s(sh, &e[0], loc, surf, nrm, &sd)
            _matvec(R, surf, w)
            for k in range(3):
                op[i, k] = w[k] + c[k]
            _matvec(R, nrm, w)
            for k in range(3):
                on[i, k] = w[k]
            osd[i] = sd
    return out_p, out_n, out_sd


def signed_distance(shape, ext, pos, quat, queries):
    """Signed distances only; see numpy_backend.signed_distance."""
    cdef double[::1] e = np.ascontiguousarray(ext, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(pos, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(quat, dtype=np.float64)
    cdef double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef int N = pts.shape[0]
    cdef int sh = int(shape)
    out = np.empty(N)
    cdef double[::1] osd = out
    cdef double R[9]
    cdef double loc[3]
    cdef double rel[3]
    cdef int i, k
    _quat_to_matrix(&qv[0], R)
    with nogil:
        for i in range(N):
            for k in range(3):
                rel[k] = pts[i, k] - c[k]
            _matvec_t(R, rel, loc)
            osd[i] = _sd_local_s(sh, &e[0], loc)
    return out


def occupancy(shape, ext, pos, quat, centers):
    """Voxel-center inside tests; see numpy_backend.occupancy."""
    cdef double[::1] e = np.ascontiguousarray(ext, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(pos, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(quat, dtype=np.float64)
    cdef double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    cdef int N = pts.shape[0]
    cdef int sh = int(shape)
    out = np.zeros(N, dtype=np.uint8)
    cdef unsigned char[::1] occ = out
    cdef double R[9]
    cdef double loc[3]
    cdef double rel[3]
    cdef double q
    cdef int i, k
    cdef bint inside
    _quat_to_matrix(&qv[0], R)
    with nogil:
        for i in range(N):
            for k in range(3):
                rel[k] = pts[i, k] - c[k]
            _matvec_t(R, rel, loc)
            if sh == _SPHERE:
                q = (loc[0] / e[0]) ** 2 + (loc[1] / e[1]) ** 2 + (loc[2] / e[2]) ** 2
                inside = q <= 1.0
            elif sh == _CUBE:
                inside = fabs(loc[0]) <= e[0] and fabs(loc[1]) <= e[1] and fabs(loc[2]) <= e[2]
            else:
                q = (loc[0] / e[0]) ** 2 + (loc[1] / e[1]) ** 2
                inside = q <= 1.0 and fabs(loc[2]) <= e[2]
            occ[i] = 1 if inside else 0
    return out


def capsule_closest(shape, ext, pos, quat, p0, p1, reject_dist, n_iter=40):
    """Segment-vs-shape nearest approach; see numpy_backend.capsule_closest."""
    cdef double[::1] e = np.ascontiguousarray(ext, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(pos, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(quat, dtype=np.float64)
    cdef double[:, ::1] a0 = np.ascontiguousarray(np.atleast_2d(p0), dtype=np.float64)
    cdef double[:, ::1] a1 = np.ascontiguousarray(np.atleast_2d(p1), dtype=np.float64)
    cdef int K = a0.shape[0]
    cdef int sh = int(shape)
    cdef double rej = float(reject_dist)
    cdef int iters = int(n_iter)

    out_t = np.empty(K)
    out_p = np.empty((K, 3))
    out_n = np.empty((K, 3))
    out_sd = np.empty(K)
    cdef double[::1] ot = out_t
    cdef double[:, ::1] op = out_p
    cdef double[:, ::1] on = out_n
    cdef double[::1] osd = out_sd

    cdef double R[9]
    cdef double d[3]
    cdef double rel[3]
    cdef double seg[3]
    cdef double loc0[3]
    cdef double dloc[3]
    cdef double pt[3]
    cdef double surf[3]
    cdef double nrm[3]
    cdef double w[3]
    cdef double circ, dd, tt, dist, ta, tb, tc, tg, fc, fg, sd, hyp
    cdef int i, k, it
    _quat_to_matrix(&qv[0], R)

    if sh == _SPHERE:
        circ = e[0]
        if e[1] > circ: circ = e[1]
        if e[2] > circ: circ = e[2]
    elif sh == _CUBE:
        circ = sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
    else:
        hyp = e[0] if e[0] > e[1] else e[1]
        circ = sqrt(hyp * hyp + e[2] * e[2])

    with nogil:
        for i in range(K):
            dd = 0.0
            tt = 0.0
            for k in range(3):
                d[k] = a1[i, k] - a0[i, k]
                rel[k] = c[k] - a0[i, k]
                dd += d[k] * d[k]
                tt += rel[k] * d[k]
            tt /= dd if dd > _EPS else _EPS
            if tt < 0.0: tt = 0.0
            if tt > 1.0: tt = 1.0
            dist = 0.0
            for k in range(3):
                seg[k] = a0[i, k] + tt * d[k] - c[k]
                dist += seg[k] * seg[k]
            dist = sqrt(dist)

            if dist - circ > rej:
                ot[i] = tt
            else:
                # local frame once; distance is invariant under the transform
                for k in range(3):
                    rel[k] = a0[i, k] - c[k]
                _matvec_t(R, rel, loc0)
                _matvec_t(R, d, dloc)
                ta = 0.0
                tb = 1.0
                tc = ta + _INVPHI2 * (tb - ta)
                tg = ta + _INVPHI * (tb - ta)
                for k in range(3):
                    pt[k] = loc0[k] + tc * dloc[k]
                fc = _sd_local_s(sh, &e[0], pt)
                for k in range(3):
                    pt[k] = loc0[k] + tg * dloc[k]
                fg = _sd_local_s(sh, &e[0], pt)
                for it in range(iters):
                    if fc < fg:
                        tb = tg
                    else:
                        ta = tc
                    tc = ta + _INVPHI2 * (tb - ta)
                    tg = ta + _INVPHI * (tb - ta)
                    for k in range(3):
                        pt[k] = loc0[k] + tc * dloc[k]
                    fc = _sd_local_s(sh, &e[0], pt)
                    for k in range(3):
                        pt[k] = loc0[k] + tg * dloc[k]
                    fg = _sd_local_s(sh, &e[0], pt)
                ot[i] = 0.5 * (ta + tb)

            for k in range(3):
                rel[k] = a0[i, k] + ot[i] * d[k] - c[k]
            _matvec_t(R, rel, loc0)
            _closest_local_s(sh, &e[0], loc0, surf, nrm, &sd)
            _matvec(R, surf, w)
            for k in range(3):
                op[i, k] = w[k] + c[k]
            _matvec(R, nrm, w)
            for k in range(3):
                on[i, k] = w[k]
            osd[i] = sd
    return out_t, out_p, out_n, out_sd


def fk_hand(parents, offsets, rest_quat, dof_axis, joint_dof_start, joint_dof_count,
            tip_parent, tip_offset, wrist_pos, wrist_quat, q):
    """Forward kinematics; see numpy_backend.fk_hand."""
    cdef long[::1] par = np.ascontiguousarray(parents, dtype=np.int64)
    cdef double[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef double[:, ::1] rq = np.ascontiguousarray(rest_quat, dtype=np.float64)
    cdef double[:, ::1] ax = np.ascontiguousarray(dof_axis, dtype=np.float64)
    cdef long[::1] jds = np.ascontiguousarray(joint_dof_start, dtype=np.int64)
    cdef long[::1] jdc = np.ascontiguousarray(joint_dof_count, dtype=np.int64)
    cdef long[::1] tpar = np.ascontiguousarray(tip_parent, dtype=np.int64)
    cdef double[:, ::1] toff = np.ascontiguousarray(tip_offset, dtype=np.float64)
    cdef double[::1] wp = np.ascontiguousarray(wrist_pos, dtype=np.float64)
    cdef double[::1] wq = np.ascontiguousarray(wrist_quat, dtype=np.float64)
    cdef double[::1] qq = np.ascontiguousarray(q, dtype=np.float64)

    cdef int J = par.shape[0]
    cdef int D = qq.shape[0]
    cdef int T = tpar.shape[0]
    joint_pos = np.zeros((J, 3))
    joint_quat = np.zeros((J, 4))
    tip_pos = np.zeros((T, 3))
    dof_origin = np.zeros((D, 3))
    dof_axis_w = np.zeros((D, 3))
    cdef double[:, ::1] jp = joint_pos
    cdef double[:, ::1] jq = joint_quat
    cdef double[:, ::1] tp = tip_pos
    cdef double[:, ::1] do_ = dof_origin
    cdef double[:, ::1] dw = dof_axis_w

    cdef double bp[3]
    cdef double bq[4]
    cdef double pj[3]
    cdef double Q[4]
    cdef double Q2[4]
    cdef double dq[4]
    cdef double v[3]
    cdef double axk[3]
    cdef int j, k, m, i, p

    with nogil:
        for j in range(J):
            p = par[j]
            if p < 0:
                for k in range(3): bp[k] = wp[k]
                for k in range(4): bq[k] = wq[k]
            else:
                for k in range(3): bp[k] = jp[p, k]
                for k in range(4): bq[k] = jq[p, k]
            for k in range(3): v[k] = off[j, k]
            _quat_rotate(bq, v, pj)
            for k in range(3): pj[k] += bp[k]
            _quat_mul(bq, &rq[j, 0], Q)
            for m in range(jdc[j]):
                i = jds[j] + m
                for k in range(3):
                    do_[i, k] = pj[k]
                    axk[k] = ax[i, k]
                _quat_rotate(Q, axk, v)
                for k in range(3):
                    dw[i, k] = v[k]
                _quat_from_axis_angle(axk, qq[i], dq)
                _quat_mul(Q, dq, Q2)
                for k in range(4): Q[k] = Q2[k]
            for k in range(3): jp[j, k] = pj[k]
            for k in range(4): jq[j, k] = Q[k]
        for j in range(T):
            p = tpar[j]
            for k in range(3): v[k] = toff[j, k]
            for k in range(4): bq[k] = jq[p, k]
            _quat_rotate(bq, v, pj)
            for k in range(3):
                tp[j, k] = jp[p, k] + pj[k]
    return joint_pos, joint_quat, tip_pos, dof_origin, dof_axis_w


def contact_sweep(dt, kn, cn, mu, n_iters, slop, v_pushout, qdot, m_inv_dof, v,
                  omega, inv_mass, iinv_world, obj_pos, side, x, n, depth, jac,
                  base_vel):
    """Gauss-Seidel penalty impulse sweep; see numpy_backend.contact_sweep."""
    cdef double ddt = float(dt), dkn = float(kn), dcn = float(cn), dmu = float(mu)
    cdef double dslop = float(slop), dvmax = float(v_pushout)
    cdef int iters = int(n_iters)
    qdot_out = np.array(qdot, dtype=np.float64, copy=True)
    v_out = np.array(v, dtype=np.float64, copy=True)
    om_out = np.array(omega, dtype=np.float64, copy=True)
    cdef double[::1] qd = qdot_out
    cdef double[::1] vv = v_out
    cdef double[::1] om = om_out
    cdef double[::1] mi = np.ascontiguousarray(m_inv_dof, dtype=np.float64)
    cdef double im = float(inv_mass)
    cdef double[:, ::1] iw = np.ascontiguousarray(iinv_world, dtype=np.float64)
    cdef double[::1] opos = np.ascontiguousarray(obj_pos, dtype=np.float64)
    cdef long[::1] sd_ = np.ascontiguousarray(side, dtype=np.int64)
    cdef double[:, ::1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] nn = np.ascontiguousarray(n, dtype=np.float64)
    cdef double[::1] dep = np.ascontiguousarray(depth, dtype=np.float64)
    cdef double[:, :, ::1] jc = np.ascontiguousarray(jac, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(base_vel, dtype=np.float64)

    cdef int C = xx.shape[0]
    cdef int D = qd.shape[0]
    jn_np = np.zeros(C)
    jt_np = np.zeros((C, 3))
    cdef double[::1] jn_acc = jn_np
    cdef double[:, ::1] jt_acc = jt_np
    scratch = np.zeros(D)
    cdef double[::1] jdof = scratch

    cdef double rc[3]
    cdef double ncv[3]
    cdef double rxn[3]
    cdef double tmp3[3]
    cdef double v_self[3]
    cdef double v_other[3]
    cdef double v_rel[3]
    cdef double vt[3]
    cdef double td[3]
    cdef double rxt[3]
    cdef double target[3]
    cdef double dvec[3]
    cdef double ang, m_inv_n, vn, bias, denom, j_new, dj, speed, ang_t, m_inv_t, cap, mag, scale
    cdef int it, ci, k, dof
    cdef bint hand_side, nonzero

    with nogil:
        for it in range(iters):
            for ci in range(C):
                for k in range(3):
                    ncv[k] = nn[ci, k]
                    rc[k] = xx[ci, k] - opos[k]
                hand_side = sd_[ci] == 0

                _cross3(rc, ncv, rxn)
                # rxn @ iinv @ rxn, matching the reference evaluation order
                ang = 0.0
                for k in range(3):
                    tmp3[k] = rxn[0] * iw[0, k] + rxn[1] * iw[1, k] + rxn[2] * iw[2, k]
                    ang += tmp3[k] * rxn[k]
                if hand_side:
                    m_inv_n = im + ang
                    for dof in range(D):
                        jdof[dof] = jc[ci, dof, 0] * ncv[0] + jc[ci, dof, 1] * ncv[1] + jc[ci, dof, 2] * ncv[2]
                        m_inv_n += mi[dof] * jdof[dof] * jdof[dof]
                    for k in range(3):
                        v_self[k] = bv[ci, k]
                        for dof in range(D):
                            v_self[k] += jc[ci, dof, k] * qd[dof]
                    _cross3(&om[0], rc, tmp3)
                    for k in range(3):
                        v_other[k] = vv[k] + tmp3[k]
                else:
                    m_inv_n = im + ang
                    _cross3(&om[0], rc, tmp3)
                    for k in range(3):
                        v_self[k] = vv[k] + tmp3[k]
                        v_other[k] = 0.0
                vn = 0.0
                for k in range(3):
                    v_rel[k] = v_self[k] - v_other[k]
                    vn += ncv[k] * v_rel[k]

                bias = dkn * (dep[ci] - dslop) / (ddt * dkn + dcn)
                if bias < 0.0:
                    bias = 0.0
                elif bias > dvmax:
                    bias = dvmax
                denom = m_inv_n + 1.0 / (ddt * (ddt * dkn + dcn))
                j_new = jn_acc[ci] + (bias - vn) / denom
                if j_new < 0.0:
                    j_new = 0.0
                dj = j_new - jn_acc[ci]
                jn_acc[ci] = j_new
                if dj != 0.0:
                    if hand_side:
                        for dof in range(D):
                            qd[dof] += mi[dof] * jdof[dof] * dj
                        for k in range(3):
                            tmp3[k] = iw[k, 0] * rxn[0] + iw[k, 1] * rxn[1] + iw[k, 2] * rxn[2]
                        for k in range(3):
                            vv[k] -= im * ncv[k] * dj
                            om[k] -= tmp3[k] * dj
                    else:
                        for k in range(3):
                            tmp3[k] = iw[k, 0] * rxn[0] + iw[k, 1] * rxn[1] + iw[k, 2] * rxn[2]
                        for k in range(3):
                            vv[k] += im * ncv[k] * dj
                            om[k] += tmp3[k] * dj

                # friction pass with the updated velocities
                if hand_side:
                    for k in range(3):
                        v_self[k] = bv[ci, k]
                        for dof in range(D):
                            v_self[k] += jc[ci, dof, k] * qd[dof]
                    _cross3(&om[0], rc, tmp3)
                    for k in range(3):
                        v_other[k] = vv[k] + tmp3[k]
                else:
                    _cross3(&om[0], rc, tmp3)
                    for k in range(3):
                        v_self[k] = vv[k] + tmp3[k]
                        v_other[k] = 0.0
                vn = 0.0
                for k in range(3):
                    v_rel[k] = v_self[k] - v_other[k]
                    vn += ncv[k] * v_rel[k]
                speed = 0.0
                for k in range(3):
                    vt[k] = v_rel[k] - vn * ncv[k]
                    speed += vt[k] * vt[k]
                speed = sqrt(speed)
                if speed > 1e-9:
                    for k in range(3):
                        td[k] = vt[k] / speed
                    _cross3(rc, td, rxt)
                    ang_t = 0.0
                    for k in range(3):
                        tmp3[k] = rxt[0] * iw[0, k] + rxt[1] * iw[1, k] + rxt[2] * iw[2, k]
                        ang_t += tmp3[k] * rxt[k]
                    if hand_side:
                        m_inv_t = im + ang_t
                        for dof in range(D):
                            jdof[dof] = jc[ci, dof, 0] * td[0] + jc[ci, dof, 1] * td[1] + jc[ci, dof, 2] * td[2]
                            m_inv_t += mi[dof] * jdof[dof] * jdof[dof]
                    else:
                        m_inv_t = im + ang_t
                    if m_inv_t > 0.0:
                        mag = 0.0
                        for k in range(3):
                            target[k] = jt_acc[ci, k] - (speed / m_inv_t) * td[k]
                            mag += target[k] * target[k]
                        mag = sqrt(mag)
                        cap = dmu * jn_acc[ci]
                        if mag > cap:
                            scale = cap / mag if mag > 0.0 else 0.0
                            for k in range(3):
                                target[k] *= scale
                        nonzero = False
                        for k in range(3):
                            dvec[k] = target[k] - jt_acc[ci, k]
                            jt_acc[ci, k] = target[k]
                            if dvec[k] != 0.0:
                                nonzero = True
                        if nonzero:
                            _cross3(rc, dvec, rxt)
                            for k in range(3):
                                tmp3[k] = iw[k, 0] * rxt[0] + iw[k, 1] * rxt[1] + iw[k, 2] * rxt[2]
                            if hand_side:
                                for dof in range(D):
                                    qd[dof] += mi[dof] * (jc[ci, dof, 0] * dvec[0] + jc[ci, dof, 1] * dvec[1] + jc[ci, dof, 2] * dvec[2])
                                for k in range(3):
                                    vv[k] -= im * dvec[k]
                                    om[k] -= tmp3[k]
                            else:
                                for k in range(3):
                                    vv[k] += im * dvec[k]
                                    om[k] += tmp3[k]

    imp = jn_np[:, None] * np.asarray(nn) + jt_np
    return qdot_out, v_out, om_out, imp, jn_np
