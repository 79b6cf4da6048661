# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels (mirror of ``_pykernels``)."""

from libc.math cimport sqrt, fabs, ceil, pow, isfinite, isnan

DEF OK = 0
DEF EVENT = 1
DEF STEP_UNDERFLOW = -1
DEF NONFINITE = -2
DEF NEGATIVE = -3

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0, B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0, E7 = -1.0 / 40.0


cdef struct Model:
    double beta_E, nu_E, delta_E, delta_F, delta_M, delta_s, nu, K, gamma
    int law
    double a0, a1


cdef struct Info:
    double max_clamp
    int clamped
    long nsteps


cdef inline void c_rhs(const Model* m, const double* y, double* dy) nogil:
    cdef double E = y[0], F = y[1], M = y[2], Fs = y[3], Ms = y[4]
    cdef double b = (1.0 - m.nu) * m.nu_E
    cdef double u, denom, wild, sterile, emerge
    if m.law == 0:
        u = 0.0
    elif m.law == 1:
        u = m.a0
    elif m.law == 2:
        u = m.a0 * b * E + (m.delta_s - m.delta_M) * (M + Ms)
    else:
        u = m.a0 * M + b * m.a1 * E
    denom = M + m.gamma * Ms
    if denom > 0.0:
        wild = M / denom
        sterile = m.gamma * Ms / denom
    else:
        wild = 0.0
        sterile = 0.0
    emerge = m.nu * m.nu_E * E
    dy[0] = m.beta_E * F * (1.0 - E / m.K) - (m.nu_E + m.delta_E) * E
    dy[1] = emerge * wild - m.delta_F * F
    dy[2] = b * E - m.delta_M * M
    dy[3] = emerge * sterile - m.delta_F * Fs
    dy[4] = u - m.delta_s * Ms


cdef inline bint all_finite(const double* v) nogil:
    cdef int j
    for j in range(5):
        if not isfinite(v[j]):
            return False
    return True


cdef inline bint clamp(double* y, double atol, Info* info) nogil:
    cdef double lim = -10.0 * atol
    cdef int i
    for i in range(5):
        if y[i] < 0.0:
            if y[i] < lim:
                return False
            if -y[i] > info.max_clamp:
                info.max_clamp = -y[i]
            y[i] = 0.0
            info.clamped = 1
    return True


cdef int rk4_interval(const Model* m, double* y, double t0, double t1, double dt, double atol,
                      Info* info, double* tfail) nogil:
    cdef int n = <int>ceil((t1 - t0) / dt - 1e-9)
    cdef double h, k1[5], k2[5], k3[5], k4[5], tmp[5]
    cdef int i, j
    if n < 1:
        n = 1
    h = (t1 - t0) / n
    for i in range(n):
        c_rhs(m, y, k1)
        for j in range(5):
            tmp[j] = y[j] + 0.5 * h * k1[j]
        c_rhs(m, tmp, k2)
        for j in range(5):
            tmp[j] = y[j] + 0.5 * h * k2[j]
        c_rhs(m, tmp, k3)
        for j in range(5):
            tmp[j] = y[j] + h * k3[j]
        c_rhs(m, tmp, k4)
        for j in range(5):
            y[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        info.nsteps += 1
        tfail[0] = t0 + (i + 1) * h
        if not all_finite(y):
            return NONFINITE
        if not clamp(y, atol, info):
            return NEGATIVE
    return OK


cdef int rk45_interval(const Model* m, double* y, double t0, double t1, double* h_io,
                       double rtol, double atol, Info* info, double* tfail) nogil:
    cdef double t = t0, h = h_io[0], hs, err, e, sc, fac
    cdef double k1[5], k2[5], k3[5], k4[5], k5[5], k6[5], k7[5], yn[5], tmp[5]
    cdef int j
    cdef bint last
    c_rhs(m, y, k1)
    if not all_finite(k1):
        tfail[0] = t
        return NONFINITE
    while t < t1:
        if h < 1e-12 * (fabs(t) if fabs(t) > 1.0 else 1.0):
            tfail[0] = t
            h_io[0] = h
            return STEP_UNDERFLOW
        last = t + h >= t1
        hs = t1 - t if last else h
        for j in range(5):
            tmp[j] = y[j] + hs * A21 * k1[j]
        c_rhs(m, tmp, k2)
        for j in range(5):
            tmp[j] = y[j] + hs * (A31 * k1[j] + A32 * k2[j])
        c_rhs(m, tmp, k3)
        for j in range(5):
            tmp[j] = y[j] + hs * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        c_rhs(m, tmp, k4)
        for j in range(5):
            tmp[j] = y[j] + hs * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        c_rhs(m, tmp, k5)
        for j in range(5):
            tmp[j] = y[j] + hs * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j])
        c_rhs(m, tmp, k6)
        for j in range(5):
            yn[j] = y[j] + hs * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j] + B6 * k6[j])
        c_rhs(m, yn, k7)
        err = 0.0
        for j in range(5):
            e = hs * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j])
            sc = atol + rtol * (fabs(y[j]) if fabs(y[j]) > fabs(yn[j]) else fabs(yn[j]))
            err += (e / sc) * (e / sc)
        err = sqrt(err / 5.0)
        # an infinite norm just means the tolerance is out of reach at this step
        if isnan(err) or not all_finite(yn):
            tfail[0] = t
            h_io[0] = h
            return NONFINITE
        if err <= 1.0:
            t = t1 if last else t + hs
            for j in range(5):
                y[j] = yn[j]
            info.nsteps += 1
            info.clamped = 0
            if not clamp(y, atol, info):
                tfail[0] = t
                h_io[0] = h
                return NEGATIVE
            if info.clamped:
                c_rhs(m, y, k1)
            else:
                for j in range(5):
                    k1[j] = k7[j]
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
                if fac > 5.0:
                    fac = 5.0
            if not last or fac < 1.0:
                h = hs * fac
        else:
            fac = 0.9 * pow(err, -0.2)
            if fac < 0.2:
                fac = 0.2
            h = hs * fac
    tfail[0] = t1
    h_io[0] = h
    return OK


def rhs(y, p, int law, double a0, double a1):
    cdef Model m = _model(p, law, a0, a1)
    cdef double yy[5], dy[5]
    cdef int j
    for j in range(5):
        yy[j] = y[j]
    c_rhs(&m, yy, dy)
    return [dy[0], dy[1], dy[2], dy[3], dy[4]]


cdef Model _model(p, int law, double a0, double a1):
    cdef Model m
    m.beta_E = p[0]
    m.nu_E = p[1]
    m.delta_E = p[2]
    m.delta_F = p[3]
    m.delta_M = p[4]
    m.delta_s = p[5]
    m.nu = p[6]
    m.K = p[7]
    m.gamma = p[8]
    m.law = law
    m.a0 = a0
    m.a1 = a1
    return m


def advance_grid(y0, const double[::1] tgrid, double[:, ::1] out, Py_ssize_t start, params,
                 int law, law_args, int method, double h, double rtol, double atol, int watch):
    """See :func:`sitfeedback._pykernels.advance_grid`."""
    cdef Model m = _model(params, law, law_args[0], law_args[1])
    cdef double y[5]
    cdef Info info
    cdef double tfail = 0.0, Eprev, Enew
    cdef Py_ssize_t n = tgrid.shape[0], i
    cdef int j, status = OK
    info.max_clamp = 0.0
    info.clamped = 0
    info.nsteps = 0
    for j in range(5):
        y[j] = y0[j]
        out[start, j] = y[j]
    with nogil:
        i = start
        while i < n - 1:
            Eprev = y[0]
            if method == 0:
                status = rk4_interval(&m, y, tgrid[i], tgrid[i + 1], h, atol, &info, &tfail)
            else:
                status = rk45_interval(&m, y, tgrid[i], tgrid[i + 1], &h, rtol, atol, &info, &tfail)
            if status != OK:
                break
            for j in range(5):
                out[i + 1, j] = y[j]
            Enew = y[0]
            if ((watch & 1) and Eprev > m.K and Enew <= m.K) or ((watch & 2) and Eprev > 1.0 and Enew <= 1.0):
                status = EVENT
                i += 1
                tfail = tgrid[i]
                break
            i += 1
    if status == OK:
        return n - 1, OK, h, info.max_clamp, tgrid[n - 1], info.nsteps
    return i, status, h, info.max_clamp, tfail, info.nsteps
