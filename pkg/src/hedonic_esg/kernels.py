"""Numeric inner loops.

Every kernel exists as ``<name>_loop`` (plain loops, compiled by numba when it
is available) and ``<name>_numpy`` (vectorized numpy). The unsuffixed name is
bound to whichever path :data:`hedonic_esg._compat.USE_JIT` selects. Both paths
return the same numbers up to floating-point reassociation.
"""
import math

import numpy as np
from scipy.special import gammaln

from ._compat import USE_JIT, jit, select

__all__ = [
    "USE_JIT",
    "ar_arch_filter",
    "ar_arch_nll",
    "bspline_basis",
    "df_tau_stats",
    "jacobi_eigh",
]


# --------------------------------------------------------------------------
# AR(q)-ARCH(1) recursion and standardized Student-t likelihood
# --------------------------------------------------------------------------

@jit
def ar_arch_filter_loop(r, mu, phi, omega, alpha):
    n = r.shape[0]
    q = phi.shape[0]
    eps = np.empty(n)
    for t in range(n):
        acc = r[t] - mu
        for i in range(1, q + 1):
            if t - i >= 0:
                acc -= phi[i - 1] * (r[t - i] - mu)
        eps[t] = acc
    mean = 0.0
    for t in range(n):
        mean += eps[t]
    mean /= n
    var = 0.0
    for t in range(n):
        var += (eps[t] - mean) ** 2
    sigma2 = np.empty(n)
    sigma2[0] = var / n
    for t in range(1, n):
        sigma2[t] = omega + alpha * eps[t - 1] * eps[t - 1]
    return eps, sigma2


def ar_arch_filter_numpy(r, mu, phi, omega, alpha):
    dev = r - mu
    eps = dev.copy()
    for i, p in enumerate(phi, start=1):
        eps[i:] -= p * dev[:-i]
    sigma2 = np.empty_like(eps)
    sigma2[0] = eps.var()
    sigma2[1:] = omega + alpha * eps[:-1] ** 2
    return eps, sigma2


@jit
def ar_arch_nll_loop(r, mu, phi, omega, alpha, nu):
    eps, sigma2 = ar_arch_filter_loop(r, mu, phi, omega, alpha)
    n = r.shape[0]
    const = (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu)
             - 0.5 * math.log(math.pi * (nu - 2.0)))
    total = 0.0
    for t in range(n):
        s2 = sigma2[t]
        if not s2 > 0.0:
            return np.inf
        z2 = eps[t] * eps[t] / s2
        total += const - 0.5 * math.log(s2) - 0.5 * (nu + 1.0) * math.log1p(z2 / (nu - 2.0))
    return -total


def ar_arch_nll_numpy(r, mu, phi, omega, alpha, nu):
    eps, sigma2 = ar_arch_filter_numpy(r, mu, phi, omega, alpha)
    if not np.all(sigma2 > 0.0):
        return np.inf
    const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * np.log(np.pi * (nu - 2.0))
    z2 = eps * eps / sigma2
    ll = const - 0.5 * np.log(sigma2) - 0.5 * (nu + 1.0) * np.log1p(z2 / (nu - 2.0))
    return -float(ll.sum())


ar_arch_filter = select(ar_arch_filter_loop, ar_arch_filter_numpy)
ar_arch_nll = select(ar_arch_nll_loop, ar_arch_nll_numpy)


# --------------------------------------------------------------------------
# Cyclic Jacobi eigensolver for symmetric matrices
# --------------------------------------------------------------------------

@jit
def jacobi_eigh_loop(a, tol, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += A[i, j] * A[i, j]
    scale = math.sqrt(scale)
    sweeps = 0
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j] * A[i, j]
        off = math.sqrt(off)
        if off <= tol * scale or scale == 0.0:
            break
        if sweep == max_sweeps:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, sweeps


def jacobi_eigh_numpy(a, tol, max_sweeps):
    A = np.array(a, dtype=float, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    offdiag = ~np.eye(n, dtype=bool)
    sweeps = 0
    for sweep in range(max_sweeps + 1):
        off = np.sqrt(np.sum(A[offdiag] ** 2))
        if off <= tol * scale or scale == 0.0 or sweep == max_sweeps:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                A[:, p] = c * colp - s * A[:, q]
                A[:, q] = s * colp + c * A[:, q]
                rowp = A[p, :].copy()
                A[p, :] = c * rowp - s * A[q, :]
                A[q, :] = s * rowp + c * A[q, :]
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    return np.diag(A).copy(), V, sweeps


jacobi_eigh = select(jacobi_eigh_loop, jacobi_eigh_numpy)


# --------------------------------------------------------------------------
# B-spline basis (Cox-de Boor)
# --------------------------------------------------------------------------

@jit
def bspline_basis_loop(x, knots, degree):
    n = x.shape[0]
    nk = knots.shape[0]
    nbasis = nk - degree - 1
    out = np.zeros((n, nbasis))
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    N = np.empty(degree + 1)
    lo = knots[degree]
    hi = knots[nbasis]
    for row in range(n):
        xv = x[row]
        if xv < lo or xv > hi:
            continue
        # span index: knots[span] <= xv < knots[span+1], closed at the right end
        span = degree
        while span < nbasis - 1 and xv >= knots[span + 1]:
            span += 1
        N[0] = 1.0
        for j in range(1, degree + 1):
            left[j] = xv - knots[span + 1 - j]
            right[j] = knots[span + j] - xv
            saved = 0.0
            for r in range(j):
                denom = right[r + 1] + left[j - r]
                temp = 0.0
                if denom != 0.0:
                    temp = N[r] / denom
                N[r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            N[j] = saved
        for j in range(degree + 1):
            out[row, span - degree + j] = N[j]
    return out


def bspline_basis_numpy(x, knots, degree):
    x = np.asarray(x, dtype=float)
    t = np.asarray(knots, dtype=float)
    nbasis = t.shape[0] - degree - 1
    lo, hi = t[degree], t[nbasis]
    # degree-0 indicators on the active knot spans, right end closed
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, degree, nbasis - 1)
    inside = (x >= lo) & (x <= hi)
    B = np.zeros((x.shape[0], t.shape[0] - 1))
    rows = np.nonzero(inside)[0]
    B[rows, span[rows]] = 1.0
    for d in range(1, degree + 1):
        nb = t.shape[0] - 1 - d
        Bn = np.zeros((x.shape[0], nb))
        for i in range(nb):
            den1 = t[i + d] - t[i]
            den2 = t[i + d + 1] - t[i + 1]
            term = np.zeros_like(x)
            if den1 > 0:
                term += (x - t[i]) / den1 * B[:, i]
            if den2 > 0:
                term += (t[i + d + 1] - x) / den2 * B[:, i + 1]
            Bn[:, i] = term
        B = Bn
    return B[:, :nbasis]


bspline_basis = select(bspline_basis_loop, bspline_basis_numpy)


# --------------------------------------------------------------------------
# Dickey-Fuller tau statistics for simulated paths (lag 0)
# --------------------------------------------------------------------------

@jit
def df_tau_stats_loop(shocks, trend_order):
    reps, n = shocks.shape
    k = trend_order + 2
    out = np.empty(reps)
    X = np.empty((n, k))
    for rep in range(reps):
        level = 0.0
        for t in range(n):
            X[t, 0] = level
            if k > 1:
                X[t, 1] = 1.0
            if k > 2:
                X[t, 2] = t + 1.0
            level += shocks[rep, t]
        XtX = X.T @ X
        Xty = X.T @ shocks[rep]
        beta = np.linalg.solve(XtX, Xty)
        rss = 0.0
        for t in range(n):
            fit = 0.0
            for j in range(k):
                fit += X[t, j] * beta[j]
            rss += (shocks[rep, t] - fit) ** 2
        s2 = rss / (n - k)
        cov00 = np.linalg.inv(XtX)[0, 0] * s2
        out[rep] = beta[0] / math.sqrt(cov00)
    return out


def df_tau_stats_numpy(shocks, trend_order):
    reps, n = shocks.shape
    level = np.concatenate([np.zeros((reps, 1)), np.cumsum(shocks, axis=1)[:, :-1]], axis=1)
    cols = [level]
    if trend_order >= 0:
        cols.append(np.ones_like(level))
    if trend_order >= 1:
        cols.append(np.broadcast_to(np.arange(1.0, n + 1.0), level.shape))
    X = np.stack(cols, axis=2)
    k = X.shape[2]
    XtX = np.einsum("rti,rtj->rij", X, X)
    Xty = np.einsum("rti,rt->ri", X, shocks)
    beta = np.linalg.solve(XtX, Xty[..., None])[..., 0]
    resid = shocks - np.einsum("rti,ri->rt", X, beta)
    s2 = np.sum(resid * resid, axis=1) / (n - k)
    cov00 = np.linalg.inv(XtX)[:, 0, 0] * s2
    return beta[:, 0] / np.sqrt(cov00)


df_tau_stats = select(df_tau_stats_loop, df_tau_stats_numpy)
