"""Minimum-relative-entropy reweighting of scenario priors under linear views.

Solves, for a panel prior ``p`` over J scenarios,

    minimize    sum_j  q_j (ln q_j - ln p_j)
    subject to  lower <= G q <= upper        (one row is the normalization)

by Lagrangian duality: the optimum has the exponential-tilt form
``q_j ∝ p_j exp(-(G^T lam)_j)`` and the dual is smooth and concave, so a
projected quasi-Newton pass (multipliers of one-sided rows are sign
constrained) followed by a Newton polish on the active rows drives the
constraint residual to tolerance. All posterior arithmetic happens in log
space; weights that would fall below the positivity floor are reported via
:class:`~epcovar.errors.DegenerateError` rather than clipped, so pathological
split-support posteriors surface instead of being masked.

Sign conventions: the reported multiplier vector has one entry per constraint
row, normalization included. Multipliers of upper-bounded rows are >= 0, of
lower-bounded rows <= 0, and complementary slackness holds within tolerance.
One-sided constraints already satisfied by the prior leave it untouched;
unattainable ones raise :class:`~epcovar.errors.InfeasibleError` carrying the
best residual as a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateError, InfeasibleError
from .scenario import Probabilities, ScenarioPanel, as_weights
from .views import LinearConstraintSet

_LOG_FLOOR = math.log(1e-300)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8           # max absolute constraint violation
    max_iter: int = 10_000
    polish_iter: int = 60       # Newton refinement steps after quasi-Newton


@dataclass(frozen=True)
class SolveReport:
    posterior: Probabilities
    multipliers: np.ndarray     # one per constraint row, normalization included
    residual: float             # max constraint violation at the posterior
    iterations: int
    entropy: float              # achieved KL divergence to the prior, in nats


def relative_entropy(post, prior) -> float:
    """KL divergence sum q ln(q/p) in nats between discrete distributions."""
    q = as_weights(post)
    p = as_weights(prior)
    if q.size != p.size:
        raise ValueError(f"length mismatch: post has {q.size}, prior has {p.size}")
    if np.any(q <= 0.0) or np.any(p <= 0.0):
        raise ValueError("relative entropy needs strictly positive weights")
    return float(q @ (np.log(q) - np.log(p)))


def _effective_bounds(constraints: LinearConstraintSet, lam: np.ndarray) -> np.ndarray:
    """Per-row bound the dual currently prices: upper for lam >= 0, lower otherwise."""
    lo, hi = constraints.lower, constraints.upper
    b = np.where(lo == hi, lo, np.where(lam >= 0.0, hi, lo))
    # one-sided rows have only one finite side regardless of the sign of lam
    b = np.where(np.isinf(b), np.where(np.isinf(lo), hi, lo), b)
    return b


def dual_value_and_gradient(
    lam, panel: ScenarioPanel, constraints: LinearConstraintSet
) -> tuple[float, np.ndarray]:
    """Dual objective (minimization form) of the tilt problem and its gradient.

    With ``q(lam)_j = p_j exp(-(G^T lam)_j)`` (unnormalized; the normalization
    row carries its own multiplier), returns

        value    = sum_j q(lam)_j + lam . b(lam) - 1
        gradient = b(lam) - G q(lam)

    which is zero at lam = 0 with gradient ``b - G p``. The gradient vanishes
    on equality rows at the optimum. Exponents are shifted by their maximum so
    large multipliers degrade to an infinite value instead of overflowing.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (constraints.n_rows,):
        raise ValueError(f"expected {constraints.n_rows} multipliers, got {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("multipliers must be finite")
    g = constraints.matrix
    b = _effective_bounds(constraints, lam)
    exponents = np.log(panel.prior) - g.T @ lam
    shift = float(exponents.max())
    scaled = np.exp(exponents - shift)
    log_z = shift + math.log(float(scaled.sum()))
    if log_z > 700.0:
        return math.inf, b - (g @ scaled) * math.exp(700.0)
    q = np.exp(exponents)
    value = float(q.sum()) + float(lam @ b) - 1.0
    return value, b - g @ q


def _split_rows(constraints: LinearConstraintSet):
    """Expand rows into (kind, bound, original index) triples, skipping the
    normalization row. Two-sided finite rows become an le/ge pair."""
    rows = []
    for k in range(constraints.n_rows):
        if k == constraints.normalization_row:
            continue
        lo, hi = constraints.lower[k], constraints.upper[k]
        if lo == hi:
            rows.append(("eq", lo, k))
        else:
            if np.isfinite(hi):
                rows.append(("le", hi, k))
            if np.isfinite(lo):
                rows.append(("ge", lo, k))
    return rows


def solve(
    panel: ScenarioPanel,
    constraints: LinearConstraintSet,
    options: SolverOptions = SolverOptions(),
) -> SolveReport:
    """Minimum-KL posterior under the compiled constraints.

    Returns a :class:`SolveReport`; raises :class:`InfeasibleError` when the
    residual cannot be brought below ``options.tol`` and
    :class:`DegenerateError` when posterior mass falls below the positivity
    floor (1e-300).
    """
    log_p = np.log(panel.prior)
    split = _split_rows(constraints)
    n_dual = len(split)
    kinds = [s[0] for s in split]
    bounds_vec = np.array([s[1] for s in split], dtype=float)
    g_dual = (
        constraints.matrix[[s[2] for s in split], :]
        if n_dual
        else np.zeros((0, panel.size))
    )

    def log_posterior(lam: np.ndarray) -> tuple[np.ndarray, float]:
        a = log_p - (g_dual.T @ lam if n_dual else 0.0)
        shift = float(a.max())
        log_z = shift + math.log(float(np.exp(a - shift).sum()))
        return a - log_z, log_z

    def objective(lam: np.ndarray) -> tuple[float, np.ndarray]:
        lp, log_z = log_posterior(lam)
        value = log_z + float(lam @ bounds_vec)
        return value, bounds_vec - g_dual @ np.exp(lp)

    def max_violation(lam: np.ndarray) -> float:
        lp, _ = log_posterior(lam)
        achieved = constraints.matrix @ np.exp(lp)
        gap = np.maximum(constraints.lower - achieved, achieved - constraints.upper)
        return float(max(gap.max(), 0.0))

    iterations = 0
    lam = np.zeros(n_dual)
    if n_dual:
        box = [
            (0.0, None) if k == "le" else (None, 0.0) if k == "ge" else (None, None)
            for k in kinds
        ]
        # short quasi-Newton passes interleaved with Newton refinement: rows
        # with near-zero posterior mass (e.g. far-tail bins) make the dual
        # almost flat in some directions, where the exact-Hessian polish is
        # far more effective than further quasi-Newton iterations
        budget = options.max_iter
        while True:
            res = minimize(
                objective,
                lam,
                jac=True,
                method="L-BFGS-B",
                bounds=box,
                options={"maxiter": min(budget, 400), "ftol": 1e-18, "gtol": 1e-12},
            )
            lam = res.x
            iterations += int(res.nit)
            budget -= int(res.nit)
            lam, polish_steps = _newton_polish(
                lam, kinds, bounds_vec, g_dual, log_posterior, options
            )
            iterations += polish_steps
            if max_violation(lam) <= options.tol or budget <= 0 or int(res.nit) == 0:
                break

    lp, log_z = log_posterior(lam)
    q = np.exp(lp)  # underflow to 0.0 here only affects the residual check
    achieved = constraints.matrix @ q
    viol = np.maximum(constraints.lower - achieved, achieved - constraints.upper)
    residual = float(max(viol.max(), 0.0))
    if residual > options.tol:
        worst = constraints.labels[int(np.argmax(viol))]
        raise InfeasibleError(
            f"constraints unattained: residual {residual:.3e} on row '{worst}' "
            f"exceeds tolerance {options.tol:.1e}",
            residual=residual,
        )
    min_log = float(lp.min())
    if min_log < _LOG_FLOOR:
        raise DegenerateError(
            f"posterior weight underflows the positivity floor "
            f"(min log-weight {min_log:.1f})",
            min_log_weight=min_log,
        )

    multipliers = np.zeros(constraints.n_rows)
    for (_, _, orig), value in zip(split, lam):
        multipliers[orig] += value
    multipliers[constraints.normalization_row] = log_z
    entropy = float(q @ (lp - log_p))
    return SolveReport(
        posterior=Probabilities(q),
        multipliers=multipliers,
        residual=residual,
        iterations=iterations,
        entropy=max(entropy, 0.0),
    )


def pool(posteriors, confidences) -> Probabilities:
    """Confidence-weighted mixture of per-view posteriors.

    ``confidences`` must sum to one (within 1e-10); each must lie in (0, 1),
    except that a single confidence of exactly 1 is accepted. The mixture is a
    pointwise convex combination, so it sums to one but need not satisfy any
    individual view exactly. To leave residual weight on the prior, pass the
    prior itself as one of the elements with the leftover confidence.
    """
    ps = [as_weights(p) for p in posteriors]
    c = np.asarray(confidences, dtype=float)
    if len(ps) == 0:
        raise ValueError("pool needs at least one posterior")
    if c.size != len(ps):
        raise ValueError(f"{len(ps)} posteriors but {c.size} confidences")
    sizes = {p.size for p in ps}
    if len(sizes) != 1:
        raise ValueError(f"posteriors disagree on scenario count: {sorted(sizes)}")
    if np.any(c <= 0.0) or np.any(c > 1.0):
        raise ValueError("confidences must lie in (0, 1]")
    if np.any(c == 1.0) and c.size > 1:
        raise ValueError("a confidence of exactly 1 is only valid for a single view")
    total = float(c.sum())
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"confidences sum to {total!r}, expected 1")
    mixed = np.zeros(ps[0].size)
    for weight, p in zip(c, ps):
        mixed += weight * p
    return Probabilities(mixed)


def _newton_polish(lam, kinds, bounds_vec, g_dual, log_posterior, options):
    """Drive active-row residuals to machine level with exact-Hessian Newton.

    The Hessian of the dual on the active set is the posterior covariance of
    the constraint rows; a least-squares solve keeps redundant (rank-deficient)
    row sets well-behaved. One-sided multipliers are projected back onto their
    sign after every step.
    """
    lam = lam.copy()
    eq = np.array([k == "eq" for k in kinds])
    le = np.array([k == "le" for k in kinds])
    ge = np.array([k == "ge" for k in kinds])
    target = min(options.tol * 1e-4, 1e-12)

    def residual_vec(lp):
        return bounds_vec - g_dual @ np.exp(lp)

    steps = 0
    for _ in range(options.polish_iter):
        lp, _ = log_posterior(lam)
        r = residual_vec(lp)
        # r_k = b_k - (Gq)_k: negative on violated le rows, positive on violated ge rows
        active = eq | (le & ((lam > 0.0) | (r < -target))) | (ge & ((lam < 0.0) | (r > target)))
        if not active.any():
            break
        if float(np.abs(r[active]).max()) <= target:
            break
        q = np.exp(lp)
        ga = g_dual[active]
        mean = ga @ q
        cov = (ga * q) @ ga.T - np.outer(mean, mean)
        step, *_ = np.linalg.lstsq(cov, -r[active], rcond=None)
        base = np.abs(r[active]).max()
        scale = 1.0
        for _ in range(40):
            trial = lam.copy()
            trial[np.flatnonzero(active)] += scale * step
            trial[le] = np.maximum(trial[le], 0.0)
            trial[ge] = np.minimum(trial[ge], 0.0)
            lp_t, _ = log_posterior(trial)
            r_t = residual_vec(lp_t)
            act_t = eq | (le & ((trial > 0.0) | (r_t < -target))) | (
                ge & ((trial < 0.0) | (r_t > target))
            )
            worst = np.abs(r_t[act_t]).max() if act_t.any() else 0.0
            if worst < base or scale < 1e-8:
                lam = trial
                break
            scale *= 0.5
        steps += 1
    return lam, steps
