"""Compiled inner loops for homogenized polynomial systems.

A target system is packed as ``exps`` (terms x M exponent table over the
homogeneous coordinates ``Z = (z0, z1..zN)``), complex ``coefs`` and
``eq_ptr`` (term range of each equation).  Evaluating with ``z0 = 1`` gives
the affine system.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
ENDGAME = 1
STEP_FAILURE = 2
MAX_STEPS = 3
NONFINITE = 4


@njit(cache=True)
def eval_target(Z, exps, coefs, eq_ptr, maxdeg, F, J):
    M = Z.shape[0]
    N = eq_ptr.shape[0] - 1
    pw = np.empty((M, maxdeg + 1), dtype=np.complex128)
    for k in range(M):
        pw[k, 0] = 1.0
        for e in range(1, maxdeg + 1):
            pw[k, e] = pw[k, e - 1] * Z[k]
    pre = np.empty(M + 1, dtype=np.complex128)
    suf = np.empty(M + 1, dtype=np.complex128)
    for i in range(N):
        acc = 0j
        for k in range(M):
            J[i, k] = 0.0
        for t in range(eq_ptr[i], eq_ptr[i + 1]):
            pre[0] = coefs[t]
            for k in range(M):
                pre[k + 1] = pre[k] * pw[k, exps[t, k]]
            acc += pre[M]
            suf[M] = 1.0
            for k in range(M - 1, -1, -1):
                suf[k] = suf[k + 1] * pw[k, exps[t, k]]
            for k in range(M):
                e = exps[t, k]
                if e > 0:
                    J[i, k] += e * pw[k, e - 1] * pre[k] * suf[k + 1]
        F[i] = acc


@njit(cache=True)
def _eval_homotopy(Z, t, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht):
    M = Z.shape[0]
    N = M - 1
    eval_target(Z, exps, coefs, eq_ptr, maxdeg, F, J)
    z0 = Z[0]
    for i in range(N):
        d = degs[i]
        zi = Z[i + 1]
        G = zi**d - z0**d
        H[i] = (1.0 - t) * F[i] + gamma * t * G
        Ht[i] = -F[i] + gamma * G
        for k in range(M):
            HZ[i, k] = (1.0 - t) * J[i, k]
        HZ[i, i + 1] += gamma * t * d * zi ** (d - 1)
        HZ[i, 0] -= gamma * t * d * z0 ** (d - 1)
    acc = 0j
    for k in range(M):
        acc += patch[k] * Z[k]
        HZ[N, k] = patch[k]
    H[N] = acc - 1.0
    Ht[N] = 0.0


@njit(cache=True)
def _norm(v):
    s = 0.0
    for k in range(v.shape[0]):
        s += v[k].real ** 2 + v[k].imag ** 2
    return np.sqrt(s)


@njit(cache=True)
def _all_finite(v):
    for k in range(v.shape[0]):
        if not (np.isfinite(v[k].real) and np.isfinite(v[k].imag)):
            return False
    return True


@njit(cache=True)
def _solve(A, b):
    """Gaussian elimination with partial pivoting; NaNs instead of an exception when singular."""
    n = b.shape[0]
    M = A.copy()
    x = b.copy()
    for k in range(n):
        piv = k
        best = abs(M[k, k])
        for i in range(k + 1, n):
            if abs(M[i, k]) > best:
                best = abs(M[i, k])
                piv = i
        if best == 0.0:
            x[:] = np.nan
            return x
        if piv != k:
            for j in range(n):
                M[k, j], M[piv, j] = M[piv, j], M[k, j]
            x[k], x[piv] = x[piv], x[k]
        for i in range(k + 1, n):
            m = M[i, k] / M[k, k]
            if m != 0.0:
                for j in range(k, n):
                    M[i, j] -= m * M[k, j]
                x[i] -= m * x[k]
    for k in range(n - 1, -1, -1):
        acc = x[k]
        for j in range(k + 1, n):
            acc -= M[k, j] * x[j]
        x[k] = acc / M[k, k]
    return x


@njit(cache=True)
def _velocity(Z, t, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht):
    _eval_homotopy(Z, t, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht)
    return _solve(HZ, -Ht)


@njit(cache=True)
def track_path(Z_start, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch,
               h_init, h_min, h_max, endgame_t, tol, max_steps, max_endgame_failures,
               max_correction):
    """Track one path of ``(1-t) F + gamma t G`` from ``t = 1`` to ``t = 0``.

    RK4 predictor, Newton corrector (at most three iterations), step
    halving on failure and doubling after three consecutive successes.
    Returns ``(Z, t, status, steps)``.
    """
    M = Z_start.shape[0]
    N = M - 1
    F = np.empty(N, dtype=np.complex128)
    J = np.empty((N, M), dtype=np.complex128)
    H = np.empty(M, dtype=np.complex128)
    HZ = np.empty((M, M), dtype=np.complex128)
    Ht = np.empty(M, dtype=np.complex128)
    Z = Z_start.copy()
    t = 1.0
    h = h_init
    successes = 0
    endgame_failures = 0
    steps = 0
    while steps < max_steps:
        if t <= 0.0:
            return Z, 0.0, OK, steps
        steps += 1
        dt = h if h < t else t
        ok = True
        k1 = _velocity(Z, t, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht)
        k2 = _velocity(Z - 0.5 * dt * k1, t - 0.5 * dt, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht)
        k3 = _velocity(Z - 0.5 * dt * k2, t - 0.5 * dt, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht)
        k4 = _velocity(Z - dt * k3, t - dt, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht)
        Y = Z - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = t - dt
        if dt >= t:
            t_new = 0.0
        if not _all_finite(Y):
            ok = False
        else:
            converged = False
            prev = 1e300
            for _ in range(3):
                _eval_homotopy(Y, t_new, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, F, J, H, HZ, Ht)
                delta = _solve(HZ, -H)
                nd = _norm(delta)
                if not np.isfinite(nd) or nd > 0.5 * prev:
                    break
                if prev == 1e300 and nd > max_correction * (1.0 + _norm(Y)):
                    break
                Y = Y + delta
                prev = nd
                if nd <= tol * (1.0 + _norm(Y)):
                    converged = True
                    break
            ok = converged
        if ok:
            Z = Y
            t = t_new
            successes += 1
            if successes >= 3:
                h = min(2.0 * h, h_max)
                successes = 0
        else:
            successes = 0
            h *= 0.5
            if t <= endgame_t:
                endgame_failures += 1
                if endgame_failures >= max_endgame_failures:
                    return Z, t, ENDGAME, steps
            if h < h_min:
                if t <= endgame_t:
                    return Z, t, ENDGAME, steps
                return Z, t, STEP_FAILURE, steps
    return Z, t, MAX_STEPS, steps


@njit(cache=True)
def track_many(starts, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch,
               h_init, h_min, h_max, endgame_t, tol, max_steps, max_endgame_failures,
               max_correction):
    P, M = starts.shape
    ends = np.empty((P, M), dtype=np.complex128)
    ts = np.empty(P)
    status = np.empty(P, dtype=np.int64)
    steps = np.empty(P, dtype=np.int64)
    for p in range(P):
        Z, t, s, n = track_path(starts[p], exps, coefs, eq_ptr, maxdeg, degs, gamma, patch,
                                h_init, h_min, h_max, endgame_t, tol, max_steps, max_endgame_failures,
                                max_correction)
        ends[p] = Z
        ts[p] = t
        status[p] = s
        steps[p] = n
    return ends, ts, status, steps


@njit(cache=True)
def newton_affine(x0, exps, coefs, eq_ptr, maxdeg, max_iter, tol, least_squares):
    """Newton (or Gauss-Newton with ``least_squares``) on the affine system.

    Returns ``(x, converged, last_step, residual, iterations)``.
    """
    N = x0.shape[0]
    M = N + 1
    Z = np.empty(M, dtype=np.complex128)
    Z[0] = 1.0
    for k in range(N):
        Z[k + 1] = x0[k]
    F = np.empty(N, dtype=np.complex128)
    J = np.empty((N, M), dtype=np.complex128)
    last = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eval_target(Z, exps, coefs, eq_ptr, maxdeg, F, J)
        A = np.ascontiguousarray(J[:, 1:])
        if least_squares:
            delta = np.linalg.lstsq(A, -F)[0]
        else:
            delta = _solve(A, -F)
        if not _all_finite(delta):
            break
        for k in range(N):
            Z[k + 1] += delta[k]
        last = _norm(delta)
        if last <= tol * (1.0 + _norm(Z[1:])):
            converged = True
            break
    eval_target(Z, exps, coefs, eq_ptr, maxdeg, F, J)
    return Z[1:].copy(), converged, last, _norm(F), it


@njit(cache=True)
def affine_residual_and_jacobian(x, exps, coefs, eq_ptr, maxdeg):
    N = x.shape[0]
    Z = np.empty(N + 1, dtype=np.complex128)
    Z[0] = 1.0
    for k in range(N):
        Z[k + 1] = x[k]
    F = np.empty(N, dtype=np.complex128)
    J = np.empty((N, N + 1), dtype=np.complex128)
    eval_target(Z, exps, coefs, eq_ptr, maxdeg, F, J)
    return F, np.ascontiguousarray(J[:, 1:])
