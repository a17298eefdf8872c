"""Independent reference implementations used only by the tests.

Nothing here imports the package's calculus, moment or asymptotic modules:
the plain-time versions hardcode ``S(t) = t`` and use scipy integrators.
"""

import math

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp


def gaussian_b(params, d, order):
    """``d^order/dd^order`` of ``b0 exp(-d^2/xi^2)`` written out by hand."""
    xi, b0 = params.xi, params.b0
    e = b0 * np.exp(-d * d / xi**2)
    if order == 0:
        return e
    if order == 1:
        return -2.0 * d / xi**2 * e
    if order == 2:
        return (4.0 * d * d / xi**4 - 2.0 / xi**2) * e
    raise ValueError(order)


def plain_moment_rhs(params):
    K = params.K
    kap, a0 = params.kappa, params.a_const

    def rhs(t, y):
        mu, x, al = y[:K], y[K:2 * K], y[2 * K:]
        dmu = np.empty(K)
        dx = np.empty(K)
        for s in range(K):
            growth = a0
            drift = 0.0
            for r in range(K):
                d = x[s] - x[r]
                b0_, b1_, b2_ = (gaussian_b(params, d, k) for k in range(3))
                growth -= kap * mu[r] * (b0_ + 0.5 * b2_ * al[r] + 0.5 * b2_ * al[s])
                drift -= kap * mu[r] * b1_
            dmu[s] = mu[s] * growth
            dx[s] = al[s] * drift
        return np.concatenate([dmu, dx, np.full(K, 2.0 * params.epsilon)])

    return rhs


def plain_moments(params, times):
    """Moment trajectory for ``alpha = 1`` by a tight-tolerance DOP853 solve."""
    y0 = np.concatenate([
        np.array(params.N) * np.array(params.sigma) * math.sqrt(2.0 * math.pi),
        np.array(params.x0),
        params.epsilon * np.square(params.sigma),
    ])
    sol = solve_ivp(plain_moment_rhs(params), (times[0], times[-1]), y0, method="DOP853",
                    t_eval=times, rtol=1e-13, atol=1e-15)
    K = params.K
    return sol.y[:K].T, sol.y[K:2 * K].T, sol.y[2 * K:].T


def plain_fields(params, times, mu, xc, x, i):
    """``(v0, v1, v2)`` per particle at ``times[i]`` with ``S(t) = t``.

    The double time integrals are evaluated as nested cumulative trapezoids
    of the Duhamel integrands, with the X-polynomial expanded by hand.
    """
    eps, kap = params.epsilon, params.kappa
    K = params.K
    out = []
    tt = times[: i + 1]
    for s in range(K):
        sig2 = params.sigma[s] ** 2
        Sg = 2.0 * tt + sig2
        d = xc[: i + 1, s] - xc[0, s]
        k1 = np.zeros(i + 1)
        k2 = np.zeros(i + 1)
        for r in range(K):
            sep = xc[: i + 1, s] - xc[: i + 1, r]
            k1 -= kap * gaussian_b(params, sep, 1) * mu[: i + 1, r]
            k2 -= 0.5 * kap * gaussian_b(params, sep, 2) * mu[: i + 1, r]
        al2 = eps * Sg

        def C(v):
            return cumulative_trapezoid(v, tt, initial=0.0)

        I_, J_ = C(k1 * Sg), C(k1 * d)
        Sf = Sg[-1]
        X = x - params.x0[s]
        g0 = params.N[s] / math.sqrt(eps) * mu[i, s] / mu[0, s] * np.exp(-X * X / (2.0 * eps * Sf))
        v0 = math.sqrt(sig2 / Sf) * g0
        v1 = math.sqrt(sig2) / (math.sqrt(eps) * Sf**1.5) * g0 * (I_[-1] * X - Sf * J_[-1])
        # nested integrand k1(t2) [Sigma(t2) X - Sigma_f d(t2)] [I(t2) X - Sigma(t2) J(t2)] plus
        # the Gaussian-average corrections; expanded in powers of X
        c2 = C(k1 * Sg * I_)[-1] + C(k2 * Sg**2)[-1]
        c1 = -Sf * (C(k1 * Sg * J_)[-1] + C(k1 * d * I_)[-1]) - 2.0 * Sf * C(k2 * Sg * d)[-1]
        c0 = (Sf * (eps * Sf * C(k1 * I_)[-1] - eps * C(k1 * Sg * I_)[-1] + Sf * C(k1 * d * J_)[-1])
              + eps * Sf * (Sf * C(k2 * Sg)[-1] - C(k2 * Sg**2)[-1]) + Sf**2 * C(k2 * (d * d - al2))[-1])
        v2 = math.sqrt(sig2) / (eps * Sf**2.5) * g0 * (c2 * X * X + c1 * X + c0)
        out.append((v0, v1, v2))
    return out


def logistic(tau, u0, a, kappa, b0, W):
    """Spatially uniform solution of ``u' = a u - kappa b0 W u^2``."""
    e = np.exp(a * tau)
    return a * u0 * e / (a + kappa * b0 * W * u0 * (e - 1.0))


def heat_gaussian(x, x0, var0, mass, eps, tau):
    """Heat-equation solution ``u_t = eps u_xx`` of a Gaussian with variance ``var0``."""
    var = var0 + 2.0 * eps * tau
    return mass / math.sqrt(2.0 * math.pi * var) * np.exp(-(x - x0) ** 2 / (2.0 * var))
