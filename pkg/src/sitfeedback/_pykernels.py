"""Pure-Python integration kernels.

Reference implementation of the compiled ``_kernels`` extension; both expose
:func:`rhs` and :func:`advance_grid` with identical semantics and are
cross-checked by the test suite.
"""

import math

OK, EVENT, STEP_UNDERFLOW, NONFINITE, NEGATIVE = 0, 1, -1, -2, -3
WATCH_K, WATCH_EXTINCTION = 1, 2

# Dormand-Prince 5(4)
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)


def rhs(y, p, law, a0, a1):
    """Closed-loop vector field; ``p`` is the packed parameter vector."""
    E, F, M, Fs, Ms = y
    beta_E, nu_E, delta_E, delta_F, delta_M, delta_s, nu, K, gamma = p
    b = (1.0 - nu) * nu_E
    if law == 0:
        u = 0.0
    elif law == 1:
        u = a0
    elif law == 2:
        u = a0 * b * E + (delta_s - delta_M) * (M + Ms)
    else:
        u = a0 * M + b * a1 * E
    denom = M + gamma * Ms
    if denom > 0.0:
        wild = M / denom
        sterile = gamma * Ms / denom
    else:
        wild = sterile = 0.0
    emerge = nu * nu_E * E
    return [
        beta_E * F * (1.0 - E / K) - (nu_E + delta_E) * E,
        emerge * wild - delta_F * F,
        b * E - delta_M * M,
        emerge * sterile - delta_F * Fs,
        u - delta_s * Ms,
    ]


def _finite(v):
    for x in v:
        if not math.isfinite(x):
            return False
    return True


def _clamp(y, atol, state):
    # state = [max_clamp, needs_rhs]
    lim = -10.0 * atol
    for i in range(5):
        if y[i] < 0.0:
            if y[i] < lim:
                return False
            if -y[i] > state[0]:
                state[0] = -y[i]
            y[i] = 0.0
            state[1] = True
    return True


def _rk4_interval(y, t0, t1, dt, p, law, a0, a1, atol, info):
    n = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
    h = (t1 - t0) / n
    t = t0
    for i in range(n):
        k1 = rhs(y, p, law, a0, a1)
        k2 = rhs([y[j] + 0.5 * h * k1[j] for j in range(5)], p, law, a0, a1)
        k3 = rhs([y[j] + 0.5 * h * k2[j] for j in range(5)], p, law, a0, a1)
        k4 = rhs([y[j] + h * k3[j] for j in range(5)], p, law, a0, a1)
        y = [y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) for j in range(5)]
        t = t0 + (i + 1) * h
        info[2] += 1
        if not _finite(y):
            return y, NONFINITE, t
        if not _clamp(y, atol, info):
            return y, NEGATIVE, t
    return y, OK, t1


def _rk45_interval(y, t0, t1, h, p, law, a0, a1, rtol, atol, info):
    t = t0
    k1 = rhs(y, p, law, a0, a1)
    if not _finite(k1):
        return y, NONFINITE, t, h
    while t < t1:
        if h < 1e-12 * max(1.0, abs(t)):
            return y, STEP_UNDERFLOW, t, h
        last = t + h >= t1
        hs = t1 - t if last else h
        k2 = rhs([y[j] + hs * _A21 * k1[j] for j in range(5)], p, law, a0, a1)
        k3 = rhs([y[j] + hs * (_A31 * k1[j] + _A32 * k2[j]) for j in range(5)], p, law, a0, a1)
        k4 = rhs([y[j] + hs * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j]) for j in range(5)], p, law, a0, a1)
        k5 = rhs([y[j] + hs * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j] + _A54 * k4[j])
                  for j in range(5)], p, law, a0, a1)
        k6 = rhs([y[j] + hs * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j] + _A64 * k4[j] + _A65 * k5[j])
                  for j in range(5)], p, law, a0, a1)
        yn = [y[j] + hs * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j] + _B5 * k5[j] + _B6 * k6[j])
              for j in range(5)]
        k7 = rhs(yn, p, law, a0, a1)
        err = 0.0
        for j in range(5):
            e = hs * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j] + _E6 * k6[j] + _E7 * k7[j])
            sc = atol + rtol * max(abs(y[j]), abs(yn[j]))
            r = e / sc
            err += r * r
        if math.isnan(err) or not _finite(yn):
            return y, NONFINITE, t, h
        # an infinite norm just means the tolerance is out of reach at this step
        err = math.sqrt(err / 5.0)
        if err <= 1.0:
            t = t1 if last else t + hs
            y = yn
            info[2] += 1
            info[1] = False
            if not _clamp(y, atol, info):
                return y, NEGATIVE, t, h
            k1 = rhs(y, p, law, a0, a1) if info[1] else k7
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            # a clipped final step says little about the natural step size
            if not last or fac < 1.0:
                h = hs * fac
        else:
            h = hs * max(0.2, 0.9 * err ** -0.2)
    return y, OK, t1, h


def advance_grid(y0, tgrid, out, start, params, law, law_args, method, h, rtol, atol, watch):
    """Integrate across ``tgrid[start:]`` writing states into ``out``.

    Returns ``(index, status, h_next, max_clamp, t_fail, nsteps)``. With
    ``status == EVENT`` the watched crossing happened between samples
    ``index - 1`` and ``index``; integration stops there.
    """
    p = [float(v) for v in params]
    a0, a1 = float(law_args[0]), float(law_args[1])
    K = p[7]
    y = [float(v) for v in y0]
    for j in range(5):
        out[start, j] = y[j]
    n = len(tgrid)
    info = [0.0, False, 0]
    for i in range(start, n - 1):
        t0, t1 = float(tgrid[i]), float(tgrid[i + 1])
        Eprev = y[0]
        if method == 0:
            y, status, t = _rk4_interval(y, t0, t1, h, p, law, a0, a1, atol, info)
        else:
            y, status, t, h = _rk45_interval(y, t0, t1, h, p, law, a0, a1, rtol, atol, info)
        if status != OK:
            return i, status, h, info[0], t, info[2]
        for j in range(5):
            out[i + 1, j] = y[j]
        Enew = y[0]
        if (watch & WATCH_K and Eprev > K and Enew <= K) or (
            watch & WATCH_EXTINCTION and Eprev > 1.0 and Enew <= 1.0
        ):
            return i + 1, EVENT, h, info[0], t1, info[2]
    return n - 1, OK, h, info[0], float(tgrid[n - 1]), info[2]
