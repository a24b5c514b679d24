# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``wmdm._kernels_py`` call for call."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs

cnp.import_array()

cdef enum:
    OPEN = 0
    HALF = 1
    CLOSED = 2


cdef inline double _member(double d, double r, int mode, double tol) nogil:
    if d < r - tol:
        return 1.0
    if fabs(d - r) <= tol:
        if mode == HALF:
            return 0.5
        if mode == CLOSED:
            return 1.0
    return 0.0


cdef inline int _clampi(long v, long lo, long hi) nogil:
    if v < lo:
        return <int>lo
    if v > hi:
        return <int>hi
    return <int>v


def ball_masses(double[:, ::1] coords, double[::1] weights,
                long[::1] cell_start, long[::1] cell_points,
                double[::1] origin, double cell_size, int nx, int ny,
                long[::1] centers, double[::1] radii, int mode, double rtol):
    cdef Py_ssize_t m = centers.shape[0]
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, e
    cdef long c, p
    cdef int i, j, i0, i1, j0, j1
    cdef double px, py, r, pad, tol, dx, dy, acc
    with nogil:
        for k in range(m):
            c = centers[k]
            r = radii[k]
            px = coords[c, 0]
            py = coords[c, 1]
            tol = rtol * r
            pad = r * (1.0 + 2.0 * rtol)
            i0 = _clampi(<long>floor((px - pad - origin[0]) / cell_size), 0, nx - 1)
            i1 = _clampi(<long>floor((px + pad - origin[0]) / cell_size), 0, nx - 1)
            j0 = _clampi(<long>floor((py - pad - origin[1]) / cell_size), 0, ny - 1)
            j1 = _clampi(<long>floor((py + pad - origin[1]) / cell_size), 0, ny - 1)
            acc = 0.0
            for i in range(i0, i1 + 1):
                for e in range(cell_start[i * ny + j0], cell_start[i * ny + j1 + 1]):
                    p = cell_points[e]
                    dx = coords[p, 0] - px
                    dy = coords[p, 1] - py
                    acc += weights[p] * _member(sqrt(dx * dx + dy * dy), r, mode, tol)
            out[k] = acc
    return out_arr


def pair_ball_masses(double[:, ::1] coords, double[::1] weights,
                     long[::1] cell_start, long[::1] cell_points,
                     double[::1] origin, double cell_size, int nx, int ny,
                     long[:, ::1] pairs, int mode, double rtol):
    cdef Py_ssize_t m = pairs.shape[0]
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, e
    cdef long a, b, p
    cdef int i, i0, i1, j0, j1
    cdef double ax, ay, bx, by, r, pad, tol, dx, dy, m1, m2, acc
    with nogil:
        for k in range(m):
            a = pairs[k, 0]
            b = pairs[k, 1]
            ax = coords[a, 0]
            ay = coords[a, 1]
            bx = coords[b, 0]
            by = coords[b, 1]
            dx = bx - ax
            dy = by - ay
            r = sqrt(dx * dx + dy * dy)
            tol = rtol * r
            pad = r * (1.0 + 2.0 * rtol)
            i0 = _clampi(<long>floor((min(ax, bx) - pad - origin[0]) / cell_size), 0, nx - 1)
            i1 = _clampi(<long>floor((max(ax, bx) + pad - origin[0]) / cell_size), 0, nx - 1)
            j0 = _clampi(<long>floor((min(ay, by) - pad - origin[1]) / cell_size), 0, ny - 1)
            j1 = _clampi(<long>floor((max(ay, by) + pad - origin[1]) / cell_size), 0, ny - 1)
            acc = 0.0
            for i in range(i0, i1 + 1):
                for e in range(cell_start[i * ny + j0], cell_start[i * ny + j1 + 1]):
                    p = cell_points[e]
                    dx = coords[p, 0] - ax
                    dy = coords[p, 1] - ay
                    m1 = _member(sqrt(dx * dx + dy * dy), r, mode, tol)
                    if m1 < 1.0:
                        dx = coords[p, 0] - bx
                        dy = coords[p, 1] - by
                        m2 = _member(sqrt(dx * dx + dy * dy), r, mode, tol)
                        if m2 > m1:
                            m1 = m2
                    acc += weights[p] * m1
            out[k] = acc
    return out_arr


cdef inline bint _less(double da, long a, double db, long b) nogil:
    return da < db or (da == db and a < b)


cdef void _sift_up(double* hd, long* hn, Py_ssize_t pos) nogil:
    cdef double d = hd[pos]
    cdef long v = hn[pos]
    cdef Py_ssize_t parent
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(d, v, hd[parent], hn[parent]):
            hd[pos] = hd[parent]
            hn[pos] = hn[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hn[pos] = v


cdef void _sift_down(double* hd, long* hn, Py_ssize_t size) nogil:
    cdef double d = hd[0]
    cdef long v = hn[0]
    cdef Py_ssize_t pos = 0, child
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _less(hd[child + 1], hn[child + 1], hd[child], hn[child]):
            child += 1
        if _less(hd[child], hn[child], d, v):
            hd[pos] = hd[child]
            hn[pos] = hn[child]
            pos = child
        else:
            break
    hd[pos] = d
    hn[pos] = v


def node_dijkstra(long[::1] indptr, long[::1] indices, double[::1] lengths,
                  double[::1] rho, long[::1] sources, unsigned char[::1] is_target):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t cap = indices.shape[0] + sources.shape[0] + 1
    dist_arr = np.full(n, np.inf)
    pred_arr = np.full(n, -1, dtype=np.int64)
    done_arr = np.zeros(n, dtype=np.uint8)
    hd_arr = np.empty(cap, dtype=np.float64)
    hn_arr = np.empty(cap, dtype=np.int64)
    cdef double[::1] dist = dist_arr
    cdef long[::1] pred = pred_arr
    cdef unsigned char[::1] done = done_arr
    cdef double[::1] hdv = hd_arr
    cdef long[::1] hnv = hn_arr
    cdef double* hd = &hdv[0]
    cdef long* hn = &hnv[0]
    cdef Py_ssize_t size = 0, k, e
    cdef long s, u, v, hit = -1
    cdef double du, nd, ru
    with nogil:
        for k in range(sources.shape[0]):
            s = sources[k]
            if dist[s] > 0.0:
                dist[s] = 0.0
                hd[size] = 0.0
                hn[size] = s
                size += 1
                _sift_up(hd, hn, size - 1)
        while size > 0:
            du = hd[0]
            u = hn[0]
            size -= 1
            if size > 0:
                hd[0] = hd[size]
                hn[0] = hn[size]
                _sift_down(hd, hn, size)
            if done[u]:
                continue
            done[u] = 1
            if is_target[u]:
                hit = u
                break
            ru = rho[u]
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if done[v]:
                    continue
                nd = du + lengths[e] * 0.5 * (ru + rho[v])
                if nd < dist[v] or (nd == dist[v] and pred[v] > u):
                    dist[v] = nd
                    pred[v] = u
                    hd[size] = nd
                    hn[size] = v
                    size += 1
                    _sift_up(hd, hn, size - 1)
    return dist_arr, pred_arr, hit
