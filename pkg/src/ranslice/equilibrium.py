"""Nash equilibrium and social optimum of the slicing game.

Two distributed solvers reach the (unique) equilibrium:

* sequential best-response dynamics, where each best response is a
  diagonal QP over a scaled simplex solved exactly from its KKT conditions;
* exponential learning, where every MVNO accumulates negative marginal
  costs into scores and plays the softmax of its scores.

The social optimum is found centrally by accelerated projected gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .costs import congestion_levels, marginal_costs, potential, social_welfare
from .model import GameInstance, check_policy, feasible_uniform


# --------------------------------------------------------------------------
# scaled-simplex QP with diagonal curvature


def separable_simplex_qp(linear: np.ndarray, qoe: np.ndarray, total: float) -> tuple[np.ndarray, float]:
    """Minimise ``sum_r linear_r x_r + x_r^2 / qoe_r`` s.t. ``x >= 0, sum x = total``.

    Stationarity gives ``x_r = max(0, (lam - linear_r) qoe_r / 2)``; the
    multiplier ``lam`` is located by scanning breakpoints in increasing order
    of ``linear``. Returns ``(x, lam)``.
    """
    R = linear.size
    if total <= 0:
        return np.zeros(R), float(linear.min())
    order = linear.argsort(kind="stable")
    f = linear[order]
    w = qoe[order]
    lam_k = (2.0 * total + (f * w).cumsum()) / w.cumsum()
    # active set = first k entries where lam_k does not exceed the next breakpoint
    stop = lam_k[:-1] <= f[1:]
    k = int(stop.argmax()) if stop.any() else R - 1
    lam = lam_k[k]
    x = np.zeros(R)
    x[order[: k + 1]] = np.maximum((lam - f[: k + 1]) * w[: k + 1] * 0.5, 0.0)
    # tidy rounding so the row sums exactly
    s = x.sum()
    if s > 0:
        x *= total / s
    return x, float(lam)


def batched_simplex_qp(linear: np.ndarray, qoe: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Row-wise :func:`separable_simplex_qp` for a stack of problems.

    ``linear`` and ``qoe`` are (M, R) (``qoe`` may also be (R,)); ``totals``
    is (M,). Returns the (M, R) minimisers.
    """
    linear = np.atleast_2d(linear)
    M, R = linear.shape
    qoe = np.broadcast_to(qoe, (M, R))
    totals = np.asarray(totals, dtype=float)
    order = np.argsort(linear, axis=1, kind="stable")
    f = np.take_along_axis(linear, order, axis=1)
    w = np.take_along_axis(qoe, order, axis=1)
    lam_k = (2.0 * totals[:, None] + np.cumsum(f * w, axis=1)) / np.cumsum(w, axis=1)
    nxt = np.concatenate([f[:, 1:], np.full((M, 1), np.inf)], axis=1)
    k = np.argmax(lam_k <= nxt, axis=1)
    lam = lam_k[np.arange(M), k]
    active = np.arange(R)[None, :] <= k[:, None]
    xs = np.where(active, np.maximum((lam[:, None] - f) * w / 2.0, 0.0), 0.0)
    out = np.empty_like(xs)
    np.put_along_axis(out, order, xs, axis=1)
    sums = out.sum(axis=1)
    scale = np.where(sums > 0, totals / np.where(sums > 0, sums, 1.0), 0.0)
    return out * scale[:, None]


def project_scaled_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto ``{x >= 0, sum x = total_row}``."""
    v = np.atleast_2d(v)
    total = np.broadcast_to(np.asarray(total, dtype=float), (v.shape[0],))
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - total[:, None]
    idx = np.arange(1, v.shape[1] + 1)
    cond = u - css / idx > 0
    rho = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


# --------------------------------------------------------------------------
# reports


@dataclass
class Snapshot:
    iteration: int
    policy: np.ndarray
    potential: float
    congestion: np.ndarray


@dataclass
class SolveReport:
    final_policy: np.ndarray
    iterations: int
    converged: bool
    residual: float
    trajectory: list[Snapshot] = field(default_factory=list)
    potentials: list[float] = field(default_factory=list)

    @property
    def policy(self) -> np.ndarray:
        return self.final_policy


def _snapshot(game, it, xi) -> Snapshot:
    return Snapshot(it, xi.copy(), potential(game, xi), congestion_levels(game, xi))


# --------------------------------------------------------------------------
# best-response dynamics


def best_response_linear_term(game: GameInstance, xi: np.ndarray, m: int) -> np.ndarray:
    """Opponents' congestion plus own price term, per RRH."""
    others = xi.sum(axis=0) - xi[m]
    return others / game.qoe_users + game.price_terms[m]


def best_response(game: GameInstance, xi: np.ndarray, m: int) -> np.ndarray:
    """MVNO ``m``'s unique cost-minimising row against the other rows of ``xi``."""
    f = best_response_linear_term(game, xi, m)
    x, _ = separable_simplex_qp(f, game.qoe_users, game.user_counts[m])
    return x


def solve_brd(
    game: GameInstance,
    xi0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_rounds: int = 1000,
    record: bool = False,
) -> SolveReport:
    """Sequential best-response dynamics in canonical player order.

    Stops once a full round moves no entry by more than ``tol * max(1, n_m)``.
    ``potentials`` holds the potential after every single-player update.
    """
    xi = feasible_uniform(game) if xi0 is None else check_policy(game, xi0).copy()
    scale = np.maximum(1.0, game.user_counts)
    load = xi.sum(axis=0)
    inv_n = 1.0 / game.qoe_users
    eta = game.price_terms
    n = game.user_counts
    report = SolveReport(xi, 0, False, np.inf)
    if record:
        report.trajectory.append(_snapshot(game, 0, xi))
        report.potentials.append(potential(game, xi))
    for rnd in range(1, max_rounds + 1):
        worst = 0.0
        for m in range(game.n_mvnos):
            load -= xi[m]
            new, _ = separable_simplex_qp(load * inv_n + eta[m], game.qoe_users, n[m])
            worst = max(worst, float(np.abs(new - xi[m]).max() / scale[m]))
            xi[m] = new
            load += new
            if record:
                report.potentials.append(potential(game, xi))
        # refresh accumulated load to keep rounding drift out
        load = xi.sum(axis=0)
        report.iterations = rnd
        report.residual = worst
        if record:
            report.trajectory.append(_snapshot(game, rnd, xi))
        if worst <= tol:
            report.converged = True
            break
    report.final_policy = xi
    return report


# --------------------------------------------------------------------------
# exponential learning


@dataclass(frozen=True)
class FixedStep:
    gamma: float

    def __call__(self, n: int) -> float:
        return self.gamma


@dataclass(frozen=True)
class DecayingStep:
    """gamma_n = scale / n**beta with beta in (0.5, 1]."""

    beta: float = 0.75
    scale: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0.5, 1]")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def __call__(self, n: int) -> float:
        return self.scale / n**self.beta


StepRule = Union[FixedStep, DecayingStep]


def default_fixed_step(game: GameInstance, factor: float = 0.5) -> float:
    """``factor / (max_r 1/N_r * max_m n_m)``, a rough inverse Lipschitz constant."""
    n_max = float(game.user_counts.max())
    if n_max <= 0:
        return factor
    return factor * float(game.qoe_users.min()) / n_max


def congestion_step_scale(game: GameInstance, factor: float = 5.0) -> float:
    """Step scale ``factor / max_r congestion`` at the uniform starting policy.

    Congestion levels are public, so every MVNO can compute this before
    learning starts. Marginal costs are of the order of the congestion, so
    the scale makes the first score update of order ``factor``.
    """
    peak = float((game.user_counts.sum() / game.n_rrhs / game.qoe_users).max())
    return factor / peak if peak > 0 else factor


@dataclass(frozen=True)
class LearnerState:
    scores: np.ndarray
    step_rule: StepRule
    iteration: int = 0

    @classmethod
    def initial(cls, game: GameInstance, step_rule: StepRule, xi0: np.ndarray | None = None) -> "LearnerState":
        """Zero scores, or scores whose softmax reproduces an interior ``xi0``."""
        if xi0 is None:
            z = np.zeros((game.n_mvnos, game.n_rrhs))
        else:
            xi0 = check_policy(game, xi0)
            n = game.user_counts
            with np.errstate(divide="ignore"):
                z = np.log(xi0 / np.where(n > 0, n, 1.0)[:, None])
            z[n <= 0] = 0.0
            if not np.all(np.isfinite(z)):
                raise ValueError("learning needs a strictly positive starting policy")
        return cls(z, step_rule, 0)


def softmax_policy(scores: np.ndarray, user_counts: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return user_counts[:, None] * e / e.sum(axis=1, keepdims=True)


def learning_step(game: GameInstance, state: LearnerState, xi: np.ndarray) -> tuple[LearnerState, np.ndarray]:
    """One simultaneous update of all MVNOs.

    Every MVNO reads marginal costs at the same incoming ``xi``, lowers the
    score of each RRH by step * marginal cost, and plays the softmax of its
    scores scaled to its user count. Scores are re-centred per row, which
    leaves the policy unchanged.
    """
    n = state.iteration + 1
    gamma = state.step_rule(n)
    z = state.scores - gamma * marginal_costs(game, xi)
    z = z - z.mean(axis=1, keepdims=True)
    return LearnerState(z, state.step_rule, n), softmax_policy(z, game.user_counts)


def solve_learning(
    game: GameInstance,
    xi0: np.ndarray | None = None,
    step_rule: StepRule | None = None,
    tol: float = 1e-6,
    max_iters: int = 10**6,
    criterion: str = "change",
    record_every: int = 0,
    gap_tol: float | None = None,
) -> SolveReport:
    """Iterate :func:`learning_step` until the policy settles.

    ``criterion="change"`` stops when no entry moves by more than ``tol``
    (relative to ``max(1, n_m)``) in one iteration. ``"rate"`` divides that
    change by the current step size, which keeps the test meaningful when
    the step decays.

    A share that the softmax has pushed to ~1e-16 barely moves even when its
    RRH has become the cheapest, so both tests can stop early. With
    ``gap_tol`` set, stopping also needs every MVNO's own Nash gap
    ``(xi_m . v_m - n_m min_r v_mr) / max(1, n_m)`` below ``gap_tol``; each
    MVNO computes it from the marginal costs it already observes.
    """
    if criterion not in ("change", "rate"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if step_rule is None:
        step_rule = FixedStep(default_fixed_step(game))
    state = LearnerState.initial(game, step_rule, xi0)
    xi = softmax_policy(state.scores, game.user_counts)
    scale = np.maximum(1.0, game.user_counts)[:, None]
    report = SolveReport(xi, 0, False, np.inf)
    if record_every:
        report.trajectory.append(_snapshot(game, 0, xi))

    inv_n = 1.0 / game.qoe_users
    eta = game.price_terms
    n_users = game.user_counts[:, None]
    z = state.scores.copy()
    for it in range(1, max_iters + 1):
        gamma = step_rule(it)
        v = xi.sum(axis=0) * inv_n + eta + xi * inv_n
        gap_ok = gap_tol is None or float(
            (((xi * v).sum(axis=1) - game.user_counts * v.min(axis=1)) / scale[:, 0]).max()
        ) <= gap_tol
        z -= gamma * v
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        new = n_users * e / e.sum(axis=1, keepdims=True)
        delta = float((np.abs(new - xi) / scale).max())
        xi = new
        residual = delta / gamma if criterion == "rate" and gamma > 0 else delta
        report.iterations = it
        report.residual = residual
        if record_every and it % record_every == 0:
            report.trajectory.append(_snapshot(game, it, xi))
        if residual <= tol and gap_ok:
            report.converged = True
            break
    report.final_policy = xi
    return report


# --------------------------------------------------------------------------
# social optimum


def _social_gradient(game: GameInstance, xi: np.ndarray) -> np.ndarray:
    return 2.0 * xi.sum(axis=0) / game.qoe_users + game.price_terms


def frank_wolfe_gap(game: GameInstance, xi: np.ndarray) -> float:
    """Upper bound on ``social_welfare(xi) - optimum`` from linearisation."""
    g = _social_gradient(game, xi)
    return float(((g * xi).sum(axis=1) - game.user_counts * g.min(axis=1)).sum())


def monge_split(game: GameInstance, loads: np.ndarray) -> np.ndarray:
    """Cheapest way to split per-RRH ``loads`` among the MVNOs.

    The monetary cost pi_m * p_r is a product, so with MVNOs sorted by
    decreasing weight and RRHs by increasing price the cost matrix is
    Monge and the north-west corner rule solves the transport problem.
    ``loads`` must sum to the total demand.
    """
    n = game.user_counts
    players = np.argsort(-game.price_weights, kind="stable")
    rrhs = np.argsort(game.prices, kind="stable")
    out = np.zeros((game.n_mvnos, game.n_rrhs))
    need = n[players].astype(float)
    room = np.asarray(loads, dtype=float)[rrhs].copy()
    i = j = 0
    while i < len(players) and j < len(rrhs):
        q = min(need[i], room[j])
        out[players[i], rrhs[j]] += q
        need[i] -= q
        room[j] -= q
        if need[i] <= room[j]:
            i += 1
        else:
            j += 1
    # absorb rounding so every row sums exactly to its demand
    for m in range(game.n_mvnos):
        out[m] *= n[m] / out[m].sum() if out[m].sum() > 0 else 0.0
    return out


def solve_social_optimum(
    game: GameInstance,
    tol: float = 1e-8,
    max_iters: int = 100_000,
    xi0: np.ndarray | None = None,
    gap_rtol: float = 1e-7,
    stall_iters: int = 500,
    polish: bool = True,
) -> SolveReport:
    """Minimise total cost over all feasible policies.

    Accelerated projected gradient with backtracking and function-value
    restarts. Steps are taken in the metric ``sum (x_r - y_r)^2 / N_r``,
    where the curvature of every column is the same, so the projection is
    the diagonal row QP of :func:`batched_simplex_qp`.

    The objective is flat along re-splits of a fixed RRH load among MVNOs
    (only the small price terms tell them apart). ``polish`` periodically
    replaces the iterate by the cheapest split of its own loads
    (:func:`monge_split`), which never increases the cost.

    Exits when the Euclidean gradient-mapping inf-norm is at most ``tol``
    or the Frank-Wolfe gap certifies the objective to ``gap_rtol``
    relative accuracy; after ``stall_iters`` iterations without decrease
    the loop stops and ``converged`` records whether either certificate
    holds. ``residual`` is the gradient-mapping norm.
    """
    n = game.user_counts
    qoe = game.qoe_users
    inv_n = 1.0 / qoe
    xi = feasible_uniform(game) if xi0 is None else check_policy(game, xi0).copy()
    lipschitz = 2.0 * game.n_mvnos * float(inv_n.max())
    step = 1.0 / (2.0 * game.n_mvnos)  # metric-scaled step, L = 2M there
    y = xi.copy()
    t_mom = 1.0
    f_xi = social_welfare(game, xi)
    report = SolveReport(xi, 0, False, np.inf)

    def increment(g_base, d):
        # exact change of the quadratic objective along d
        dx = d.sum(axis=0)
        return float((g_base * d).sum() + (dx * dx) @ inv_n)

    def mapping_norm(point, s):
        g = _social_gradient(game, point)
        return float(np.abs(point - project_scaled_simplex(point - s * g, n)).max() / s)

    def certified():
        nonlocal xi, f_xi, y, t_mom
        if polish:
            alt = monge_split(game, xi.sum(axis=0))
            f_alt = social_welfare(game, alt)
            if f_alt < f_xi:
                xi, f_xi, y, t_mom = alt, f_alt, alt.copy(), 1.0
        report.residual = mapping_norm(xi, 1.0 / lipschitz)
        return report.residual <= tol or frank_wolfe_gap(game, xi) <= gap_rtol * max(1.0, abs(f_xi))

    since_progress = 0
    for it in range(1, max_iters + 1):
        report.iterations = it
        if it % 10 == 1 and certified():
            report.converged = True
            break
        if since_progress >= stall_iters:
            report.converged = certified()
            break
        g = _social_gradient(game, y)
        s = step * 2.0
        while True:
            # argmin <g, x> + sum (x - y)^2 / (2 s N_r) over each scaled simplex
            cand = batched_simplex_qp(g - y * (inv_n / s), 2.0 * s * qoe, n)
            d = cand - y
            dx = d.sum(axis=0)
            if (dx * dx) @ inv_n <= ((d * d) @ inv_n).sum() / (2.0 * s):
                break
            s *= 0.5
        step = s
        change = increment(_social_gradient(game, xi), cand - xi)
        since_progress = since_progress + 1 if change >= -1e-15 * abs(f_xi) else 0
        if change > 0:
            # momentum overshot: restart from the last accepted point
            t_mom = 1.0
            y = xi.copy()
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = cand + ((t_mom - 1.0) / t_next) * (cand - xi)
        xi, f_xi, t_mom = cand, f_xi + change, t_next
    report.final_policy = xi
    return report


# --------------------------------------------------------------------------
# price of anarchy


class DegenerateWelfareError(ValueError):
    pass


def poa_bound(n_mvnos: int) -> float:
    """Worst-case PoA for ``n_mvnos`` players, (3M+1)/(2M+2)."""
    return (3 * n_mvnos + 1) / (2 * n_mvnos + 2)


@dataclass
class PoaResult:
    poa: float
    bound: float
    cost_ne: float
    cost_opt: float
    ne: SolveReport
    opt: SolveReport

    def __iter__(self):
        return iter((self.poa, self.bound))


def price_of_anarchy(
    game: GameInstance,
    brd_tol: float = 1e-10,
    opt_tol: float = 1e-9,
    eps: float = 1e-12,
) -> PoaResult:
    """Equilibrium cost over optimal cost, with the M-player worst-case bound.

    Unpacks as ``poa, bound = price_of_anarchy(game)``.
    """
    ne = solve_brd(game, tol=brd_tol, max_rounds=100_000)
    opt = solve_social_optimum(game, tol=opt_tol, xi0=ne.final_policy)
    c_ne = social_welfare(game, ne.final_policy)
    c_opt = social_welfare(game, opt.final_policy)
    if c_opt <= eps:
        raise DegenerateWelfareError("optimal social cost is zero; PoA undefined")
    return PoaResult(c_ne / c_opt, poa_bound(game.n_mvnos), c_ne, c_opt, ne, opt)
