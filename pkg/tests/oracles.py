"""Slow, independent reference solvers used only by the tests."""

import numpy as np
from scipy.optimize import brentq


def bisect_projection(v, total, iters=200):
    """Project ``v`` onto {x >= 0, sum x = total} by bisection on the shift."""
    lo, hi = v.min() - total - 1.0, v.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0.0).sum() > total:
            lo = mid
        else:
            hi = mid
    x = np.maximum(v - 0.5 * (lo + hi), 0.0)
    return x * (total / x.sum()) if x.sum() > 0 else x


def sort_projection(v, total):
    """Project ``v`` onto {x >= 0, sum x = total} with the sort-and-threshold rule."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u * k > css - total)[0][-1]
    return np.maximum(v - (css[rho] - total) / (rho + 1), 0.0)


def pgd_row_qp(linear, qoe, total, max_iters=200_000, tol=1e-13):
    """Accelerated projected gradient for min f.x + sum x^2/N on the scaled simplex.

    Stops when the gradient mapping at the current iterate is below
    ``tol * max(1, total)``; restarts momentum whenever the objective rises.
    """
    step = 0.5 * qoe.min()  # 1 / Lipschitz of the gradient 2x/N

    def grad(z):
        return linear + 2.0 * z / qoe

    def obj(z):
        return linear @ z + (z * z / qoe).sum()

    x = np.full(linear.size, total / linear.size)
    y, t = x.copy(), 1.0
    for it in range(max_iters):
        new = sort_projection(y - step * grad(y), total)
        if obj(new) > obj(x) and t > 1.0:
            y, t = x.copy(), 1.0
            continue
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = new + (t - 1) / t_next * (new - x)
        x, t = new, t_next
        if it % 20 == 0:
            mapped = sort_projection(x - step * grad(x), total)
            if np.abs(mapped - x).max() <= tol * max(1.0, total):
                break
    return x


def grid_minimise_2x2(f, total, levels=6, points=41):
    """Minimise f(a, b) over [0, total]^2 by repeated local grid refinement."""
    lo_a, hi_a, lo_b, hi_b = 0.0, total, 0.0, total
    best = None
    for _ in range(levels):
        A = np.linspace(lo_a, hi_a, points)
        B = np.linspace(lo_b, hi_b, points)
        best = min((f(a, b), a, b) for a in A for b in B)
        w = 2 * (hi_a - lo_a) / (points - 1)
        _, a, b = best
        lo_a, hi_a = max(0.0, a - w), min(total, a + w)
        lo_b, hi_b = max(0.0, b - w), min(total, b + w)
    return best


def qp_social_optimum(game):
    """Optimal total cost from a generic conic solver."""
    import cvxpy as cp

    x = cp.Variable((game.n_mvnos, game.n_rrhs), nonneg=True)
    load = cp.sum(x, axis=0)
    cost = cp.sum(cp.multiply(1.0 / game.qoe_users, cp.square(load))) + cp.sum(cp.multiply(game.price_terms, x))
    prob = cp.Problem(cp.Minimize(cost), [cp.sum(x, axis=1) == game.user_counts])
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return float(prob.value)


def root_find_users(params, capacity, d):
    """N_r solving the SINR constraint numerically (load-linear form, no pole)."""
    p = params.k * (params.d0 / d) ** params.alpha
    s, noise, mu = params.sinr_min, params.noise, params.mu

    def g(users):
        interferers = mu * users / (capacity - mu * users) - 1.0
        return p - s * (noise + interferers * p)

    hi = capacity / mu * (1 - 1e-15)
    return brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
