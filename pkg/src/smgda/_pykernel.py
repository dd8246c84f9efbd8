"""Pure numpy fallback for the fused quadratic sm-MGDA loop.

Signature and outputs are identical to the compiled ``_ckernel`` module; see
``smgda.kernels.quadratic_smgda`` for the argument contract.
"""
import numpy as np

STATUS_DONE = 0
STATUS_NONFINITE = 1
STATUS_TOL = 2


def quadratic_smgda(Q, A, mu_y, h_code, h_radius, h_alpha, h_center,
                    x0, y0, z0, tau1s, thetas, tau2, p, beta, rho, C,
                    tol, record_every):
    T = tau1s.shape[0]
    x = x0.copy()
    y = y0.copy()
    z = z0.copy()
    shrink = 2.0 * tau2 * h_alpha

    gx2 = np.zeros(T)
    gy2 = np.zeros(T)
    cnorm = np.zeros(T)
    xnorm = np.zeros(T)
    active = np.zeros(T, dtype=np.uint8)
    nrec = T // record_every + 2
    rec_t = np.zeros(nrec, dtype=np.int64)
    rec_x = np.zeros((nrec, x.size))
    rec_y = np.zeros((nrec, y.size))
    k = 0

    s = x @ x
    ax = x * (1.5 - 0.5 * s)
    u = Q @ ax + A @ y
    g = u * (1.5 - 0.5 * s) - x * (x @ u) + rho * x * (s - 1.0)

    status = STATUS_DONE
    done = 0
    for t in range(T):
        tau1 = tau1s[t]
        theta = thetas[t]
        xn = x - tau1 * (g + p * (x - z))
        nrm = np.sqrt(xn @ xn)
        if nrm > C:
            xn = xn * (C / nrm)
            active[t] = 1
        s = xn @ xn
        ax = xn * (1.5 - 0.5 * s)
        aty = A.T @ ax
        gy_old = aty - mu_y * y
        v = y + tau2 * (gy_old - theta * y)
        if shrink > 0.0:
            v = (v + shrink * h_center) / (1.0 + shrink)
        if h_code == 1:
            vn = np.sqrt(v @ v)
            if vn > h_radius:
                v = v * (h_radius / vn)
        yn = v
        gy_new = aty - mu_y * yn
        Gy = (yn - y) / tau2 + gy_new - gy_old + theta * y
        u = Q @ ax + A @ yn
        gn = u * (1.5 - 0.5 * s) - xn * (xn @ u) + rho * xn * (s - 1.0)
        Gx = (x - xn) / tau1 + gn - g + p * (z - x)
        z = z + beta * (xn - z)
        x, y, g = xn, yn, gn

        gx2[t] = Gx @ Gx
        gy2[t] = Gy @ Gy
        cnorm[t] = abs(s - 1.0)
        xnorm[t] = np.sqrt(s)
        done = t + 1
        if not np.isfinite(gx2[t] + gy2[t] + s):
            status = STATUS_NONFINITE
        elif np.sqrt(gx2[t] + gy2[t]) <= tol:
            status = STATUS_TOL
        if done == 1 or done % record_every == 0 or done == T or status != STATUS_DONE:
            rec_t[k] = done
            rec_x[k] = x
            rec_y[k] = y
            k += 1
        if status != STATUS_DONE:
            break

    return {
        "x": x, "y": y, "z": z, "iters": done, "status": status,
        "gx2": gx2[:done], "gy2": gy2[:done], "c_norm": cnorm[:done],
        "x_norm": xnorm[:done], "ball_active": active[:done],
        "rec_t": rec_t[:k], "rec_x": rec_x[:k], "rec_y": rec_y[:k],
    }
