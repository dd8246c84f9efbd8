# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused loop for quadratic sm-MGDA on the unit sphere.

Mirrors ``smgda._pykernel.quadratic_smgda`` operation for operation; only the
summation order inside dot products may differ.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite

cnp.import_array()


cdef inline double dot(const double[::1] a, const double[::1] b, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += a[i] * b[i]
    return acc


cdef inline void matvec(const double[:, ::1] M, const double[::1] v, double[::1] out,
                        Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += M[i, j] * v[j]
        out[i] = acc


cdef inline void matvec_t(const double[:, ::1] M, const double[::1] v, double[::1] out,
                          Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    # out = M^T v, M is rows x cols
    cdef Py_ssize_t i, j
    for j in range(cols):
        out[j] = 0.0
    for i in range(rows):
        for j in range(cols):
            out[j] += M[i, j] * v[i]


cdef inline void penal_grad(const double[:, ::1] Q, const double[:, ::1] A,
                            const double[::1] x, const double[::1] ax, const double[::1] y,
                            double s, double rho, double[::1] u, double[::1] tmp,
                            double[::1] g, Py_ssize_t m, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double xu, a = 1.5 - 0.5 * s, pen = rho * (s - 1.0)
    matvec(Q, ax, u, m, m)
    matvec(A, y, tmp, m, n)
    for i in range(m):
        u[i] += tmp[i]
    xu = dot(x, u, m)
    for i in range(m):
        g[i] = u[i] * a - x[i] * xu + pen * x[i]


def quadratic_smgda(Q, A, double mu_y, int h_code, double h_radius, double h_alpha, h_center,
                    x0, y0, z0, tau1s, thetas, double tau2, double p, double beta,
                    double rho, double C, double tol, Py_ssize_t record_every):
    cdef const double[:, ::1] Qv = Q
    cdef const double[:, ::1] Av = A
    cdef const double[::1] hc = h_center
    cdef const double[::1] t1 = tau1s
    cdef const double[::1] th = thetas
    cdef Py_ssize_t m = Qv.shape[0], n = Av.shape[1], T = t1.shape[0]
    cdef Py_ssize_t i, t, k = 0, done = 0
    cdef int status = 0
    cdef double shrink = 2.0 * tau2 * h_alpha
    cdef double s, nrm, tau1, theta, vn, scale, acc_x, acc_y, d

    x_a = np.array(x0, dtype=np.float64, copy=True)
    y_a = np.array(y0, dtype=np.float64, copy=True)
    z_a = np.array(z0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_a
    cdef double[::1] y = y_a
    cdef double[::1] z = z_a
    cdef double[::1] xn = np.zeros(m)
    cdef double[::1] yn = np.zeros(n)
    cdef double[::1] ax = np.zeros(m)
    cdef double[::1] u = np.zeros(m)
    cdef double[::1] tmp = np.zeros(m)
    cdef double[::1] g = np.zeros(m)
    cdef double[::1] gn = np.zeros(m)
    cdef double[::1] aty = np.zeros(n)

    gx2_a = np.zeros(T)
    gy2_a = np.zeros(T)
    cn_a = np.zeros(T)
    xnm_a = np.zeros(T)
    act_a = np.zeros(T, dtype=np.uint8)
    cdef Py_ssize_t nrec = T // record_every + 2
    rt_a = np.zeros(nrec, dtype=np.int64)
    rx_a = np.zeros((nrec, m))
    ry_a = np.zeros((nrec, n))
    cdef double[::1] gx2 = gx2_a
    cdef double[::1] gy2 = gy2_a
    cdef double[::1] cn = cn_a
    cdef double[::1] xnm = xnm_a
    cdef unsigned char[::1] act = act_a
    cdef long long[::1] rt = rt_a
    cdef double[:, ::1] rx = rx_a
    cdef double[:, ::1] ry = ry_a

    with nogil:
        s = dot(x, x, m)
        for i in range(m):
            ax[i] = x[i] * (1.5 - 0.5 * s)
        penal_grad(Qv, Av, x, ax, y, s, rho, u, tmp, g, m, n)

        for t in range(T):
            tau1 = t1[t]
            theta = th[t]
            for i in range(m):
                xn[i] = x[i] - tau1 * (g[i] + p * (x[i] - z[i]))
            nrm = sqrt(dot(xn, xn, m))
            if nrm > C:
                scale = C / nrm
                for i in range(m):
                    xn[i] = xn[i] * scale
                act[t] = 1
            s = dot(xn, xn, m)
            for i in range(m):
                ax[i] = xn[i] * (1.5 - 0.5 * s)
            matvec_t(Av, ax, aty, m, n)
            # yn <- prox(y + tau2 * (aty - mu*y - theta*y))
            for i in range(n):
                yn[i] = y[i] + tau2 * ((aty[i] - mu_y * y[i]) - theta * y[i])
            if shrink > 0.0:
                for i in range(n):
                    yn[i] = (yn[i] + shrink * hc[i]) / (1.0 + shrink)
            if h_code == 1:
                vn = sqrt(dot(yn, yn, n))
                if vn > h_radius:
                    scale = h_radius / vn
                    for i in range(n):
                        yn[i] = yn[i] * scale
            acc_y = 0.0
            for i in range(n):
                # gy_new - gy_old = -mu*(yn - y)
                d = (yn[i] - y[i]) / tau2 + ((aty[i] - mu_y * yn[i]) - (aty[i] - mu_y * y[i])) + theta * y[i]
                acc_y += d * d
            penal_grad(Qv, Av, xn, ax, yn, s, rho, u, tmp, gn, m, n)
            acc_x = 0.0
            for i in range(m):
                d = (x[i] - xn[i]) / tau1 + gn[i] - g[i] + p * (z[i] - x[i])
                acc_x += d * d
            for i in range(m):
                z[i] = z[i] + beta * (xn[i] - z[i])
                x[i] = xn[i]
                g[i] = gn[i]
            for i in range(n):
                y[i] = yn[i]

            gx2[t] = acc_x
            gy2[t] = acc_y
            cn[t] = fabs(s - 1.0)
            xnm[t] = sqrt(s)
            done = t + 1
            if not isfinite(acc_x + acc_y + s):
                status = 1
            elif sqrt(acc_x + acc_y) <= tol:
                status = 2
            if done == 1 or done % record_every == 0 or done == T or status != 0:
                rt[k] = done
                for i in range(m):
                    rx[k, i] = x[i]
                for i in range(n):
                    ry[k, i] = y[i]
                k += 1
            if status != 0:
                break

    return {
        "x": x_a, "y": y_a, "z": z_a, "iters": done, "status": status,
        "gx2": gx2_a[:done], "gy2": gy2_a[:done], "c_norm": cn_a[:done],
        "x_norm": xnm_a[:done], "ball_active": act_a[:done],
        "rec_t": rt_a[:k], "rec_x": rx_a[:k], "rec_y": ry_a[:k],
    }
