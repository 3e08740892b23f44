"""Acceptance suite: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per
criterion. Tolerances are fixed here, not configurable. Expected values come
from independent oracles: inverse-CDF references, Monte-Carlo rank bands,
dense/primal brute-force minimizers, finite differences, and the
parameter-space entropy minimizer.
"""

import math
import time

import numpy as np
from scipy.special import ndtri

from _oracles import (
    brute_force_min_kl,
    pair_candidate_minimum,
    quantile_pinned_marginal,
    tilt_mean_by_bisection,
)
from epcovar.analytics import (
    BivariateNormalParams,
    covar_correlation_view,
    covar_expectation_view,
    covar_mean_variance_view,
    covar_quantile_view,
    covar_relative_view,
    covar_value_view,
    covar_variance_view,
    delta_covar_view,
    kl_bivariate_normal,
    numeric_posterior_params,
    var_normal,
    var_normal_x,
)
from epcovar.engine import ep_covar_on_panel
from epcovar.estimation import (
    fit_t_copula,
    fit_t_marginal,
    pinball_loss,
    quantile_regression_covar,
)
from epcovar.scenario import build_panel
from epcovar.solver import dual_value_and_gradient, solve
from epcovar.views import (
    LinearConstraintSet,
    compile_view,
    distribution_view,
    expectation_view,
    mean_variance_view,
    quantile_view,
    value_view,
    variance_view,
)

ALPHA = 0.95
Z95 = ndtri(ALPHA)
SENS_PARAMS = dict(mu_x=0.10, mu_y=0.02, sigma_x=0.10, sigma_y=0.08)  # wide pair
QUANT_PARAMS = dict(mu_x=0.30, mu_y=0.02, sigma_x=0.08, sigma_y=0.05)  # quantile pair


def _verdict(cid: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {cid}: {detail}")
    assert ok, f"{cid}: {detail}"


def random_params(rng, rho=None):
    return BivariateNormalParams(
        mu_x=float(rng.normal(0.0, 0.2)),
        mu_y=float(rng.normal(0.0, 0.2)),
        sigma_x=float(rng.uniform(0.02, 0.4)),
        sigma_y=float(rng.uniform(0.02, 0.4)),
        rho=float(rng.uniform(-0.95, 0.95)) if rho is None else rho,
    )


def normal_grid_panel(p, n=241, span=6.0):
    gx = np.linspace(p.mu_x - span * p.sigma_x, p.mu_x + span * p.sigma_x, n)
    gy = np.linspace(p.mu_y - span * p.sigma_y, p.mu_y + span * p.sigma_y, n)
    mx, my = np.meshgrid(gx, gy, indexing="ij")
    zx = (mx - p.mu_x) / p.sigma_x
    zy = (my - p.mu_y) / p.sigma_y
    dens = np.exp(-(zx**2 - 2 * p.rho * zx * zy + zy**2) / (2 * (1 - p.rho**2)))
    return build_panel(mx.ravel(), my.ravel(), dens.ravel())


def test_c01_discrete_engine_matches_closed_forms_on_a_fine_grid():
    """Scenario reweighting on a 241x241 grid reproduces the closed forms for
    mean, variance, combined, and (type-consistently imposed) quantile views
    within 1% of sigma_Y, in under a minute."""
    start = time.perf_counter()
    worst = 0.0
    for rho in (-0.8, 0.0, 0.5, 0.8):
        p = BivariateNormalParams(rho=rho, **SENS_PARAMS)
        panel = normal_grid_panel(p, n=241, span=6.0)
        q_x = var_normal_x(p, ALPHA)
        q1 = q_x + 0.25 * p.sigma_x
        # a quantile pin only fixes a marginal moment pair; impose exactly
        # those two moments so the discrete posterior stays in-family
        m_star, s_star = quantile_pinned_marginal(p.mu_x, p.sigma_x, q1, Z95)
        cases = [
            (expectation_view(0.15), covar_expectation_view(p, 0.15, "eq", ALPHA)),
            (variance_view(0.02), covar_variance_view(p, 0.02, "eq", ALPHA)),
            (mean_variance_view(0.15, 0.02), covar_mean_variance_view(p, 0.15, 0.02, ALPHA)),
            (mean_variance_view(m_star, s_star**2), covar_quantile_view(p, q1, "eq", ALPHA)),
        ]
        for view, closed in cases:
            got, rep = ep_covar_on_panel(panel, view, ALPHA)
            assert rep.residual <= 1e-8
            worst = max(worst, abs(got - closed.covar) / p.sigma_y)
    elapsed = time.perf_counter() - start
    _verdict(
        "criterion 1 (grid EP vs closed forms)",
        worst <= 0.01 and elapsed < 60.0,
        f"worst |diff|/sigma_y = {worst:.5f} (tol 0.01), runtime {elapsed:.1f}s (< 60s)",
    )


def test_c02_combined_view_decomposition_identity():
    """combined CoVaR + VaR = mean-view CoVaR + variance-view CoVaR, at 1e-12
    over 1000 random parameter draws."""
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        p = random_params(rng)
        m1 = float(rng.normal(0.0, 0.3))
        s1 = float(rng.uniform(0.0004, 0.2))
        lhs = covar_mean_variance_view(p, m1, s1, ALPHA).covar + var_normal(p, ALPHA)
        rhs = covar_expectation_view(p, m1).covar + covar_variance_view(p, s1).covar
        worst = max(worst, abs(lhs - rhs))
    _verdict(
        "criterion 2 (decomposition identity)",
        worst <= 1e-12,
        f"max residual {worst:.2e} over 1000 draws (tol 1e-12)",
    )


def test_c03_spillover_decomposition_and_traditional_bound():
    """Combined-view spillover splits exactly into its parts, and the
    point-conditioned spillover at X = VaR_X stays strictly below the
    mean-shift spillover rho sigma_Y z for every positive correlation."""
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(1000):
        p = random_params(rng)
        m1 = float(rng.normal(0.0, 0.3))
        s1 = float(rng.uniform(0.0004, 0.2))
        combined = delta_covar_view(p, mean_variance_view(m1, s1), ALPHA)
        split = delta_covar_view(p, expectation_view(m1), ALPHA) + delta_covar_view(
            p, variance_view(s1), ALPHA
        )
        worst = max(worst, abs(combined - split))
    strict = True
    for rho in np.linspace(0.01, 0.99, 99):
        p = BivariateNormalParams(rho=float(rho), **SENS_PARAMS)
        got = delta_covar_view(p, value_view(var_normal_x(p, ALPHA)), ALPHA)
        strict = strict and (got < p.rho * p.sigma_y * Z95)
    _verdict(
        "criterion 3 (spillover decomposition + bound)",
        worst <= 1e-12 and strict,
        f"max split residual {worst:.2e} (tol 1e-12); strict bound on 99 "
        f"correlations: {strict}",
    )


def test_c04_one_sided_collapse_rules_exact():
    """For mean, variance, quantile, and correlation views, a one-sided view
    already satisfied by the prior leaves CoVaR = VaR exactly; otherwise it
    binds at the equality value exactly. 500 draws per family."""
    rng = np.random.default_rng(103)
    checked = 0
    ok = True
    for _ in range(500):
        p = random_params(rng)
        var = var_normal(p, ALPHA)
        families = [
            (p.mu_x, float(rng.normal(0.0, 0.3)),
             lambda v, r: covar_expectation_view(p, v, r, ALPHA)),
            (p.sigma_x**2, float(rng.uniform(0.0004, 0.2)),
             lambda v, r: covar_variance_view(p, v, r, ALPHA)),
            (var_normal_x(p, ALPHA),
             float(var_normal_x(p, ALPHA) + p.sigma_x * rng.normal()),
             lambda v, r: covar_quantile_view(p, v, r, ALPHA)),
            (p.rho, float(rng.uniform(-0.95, 0.95)),
             lambda v, r: covar_correlation_view(p, v, r, ALPHA)),
        ]
        for prior_value, view_value, op in families:
            eq = op(view_value, "eq").covar
            for relation in ("le", "ge"):
                satisfied = (
                    prior_value <= view_value if relation == "le"
                    else prior_value >= view_value
                )
                out = op(view_value, relation)
                if satisfied:
                    ok = ok and out.collapsed_to_var and out.covar == var
                else:
                    ok = ok and out.covar == eq
                checked += 1
        if not ok:
            break
    _verdict(
        "criterion 4 (collapse rules)",
        ok and checked == 500 * 4 * 2,
        f"{checked} branch evaluations, all exact",
    )


def test_c05_fixed_points_and_scan_shapes():
    """Sensitivity curves pass through (prior parameter, VaR) exactly; the
    variance scan is monotone for nonzero correlation and the correlation
    scan's direction follows the prior correlation's sign."""
    ok = True
    details = []
    for rho in (-0.5, 0.3, 0.8):
        p = BivariateNormalParams(rho=rho, **SENS_PARAMS)
        var = var_normal(p, ALPHA)
        fixed = (
            covar_variance_view(p, p.sigma_x**2).covar == var
            and covar_quantile_view(p, var_normal_x(p, ALPHA)).covar == var
            and covar_correlation_view(p, p.rho).covar == var
        )
        scan = np.linspace(0.002, 0.05, 41)
        variance_curve = [covar_variance_view(p, float(s)).covar for s in scan]
        monotone = all(a <= b + 1e-15 for a, b in zip(variance_curve, variance_curve[1:]))
        grid = np.linspace(-0.95, 0.95, 39)
        corr_curve = [covar_correlation_view(p, float(r)).covar for r in grid]
        diffs = np.diff(corr_curve)
        direction = bool(np.all(diffs >= -1e-14)) if rho > 0 else bool(np.all(diffs <= 1e-14))
        ok = ok and fixed and monotone and direction
        details.append(f"rho={rho}: fixed={fixed}, monotone={monotone}, direction={direction}")
    _verdict("criterion 5 (fixed points and shapes)", ok, "; ".join(details))


def test_c06_half_line_conditioning_matches_monte_carlo():
    """Root-found CoVaR under X <= l and X >= l sits inside a 3-standard-error
    order-statistic band of a 10^7-sample conditional quantile, for five
    parameter sets including l = VaR_X."""
    start = time.perf_counter()
    base = BivariateNormalParams(rho=0.5, **SENS_PARAMS)
    cases = [
        (base, "le", var_normal_x(base, ALPHA)),
        (base, "ge", var_normal_x(base, ALPHA)),
        (base, "ge", base.mu_x),
        (BivariateNormalParams(0.0, 0.0, 1.0, 1.0, 0.7), "le", 1.0),
        (BivariateNormalParams(0.05, 0.01, 0.2, 0.05, -0.6), "ge", 0.05),
    ]
    n = 10_000_000
    ok = True
    details = []
    for i, (p, relation, level) in enumerate(cases):
        rng = np.random.default_rng(1000 + i)
        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        x = p.mu_x + p.sigma_x * z1
        y = p.mu_y + p.sigma_y * (p.rho * z1 + math.sqrt(1 - p.rho**2) * z2)
        mask = x <= level if relation == "le" else x >= level
        sample = np.sort(y[mask])
        m = sample.size
        sigma_count = math.sqrt(m * ALPHA * (1 - ALPHA))
        lo_idx = max(int(math.floor(ALPHA * m - 3 * sigma_count)) - 1, 0)
        hi_idx = min(int(math.ceil(ALPHA * m + 3 * sigma_count)), m - 1)
        got = covar_value_view(p, level, relation, ALPHA).covar
        inside = sample[lo_idx] <= got <= sample[hi_idx]
        ok = ok and inside
        details.append(f"set{i + 1} {relation}: inside={inside}")
    elapsed = time.perf_counter() - start
    _verdict(
        "criterion 6 (conditioning vs Monte Carlo)",
        ok and elapsed < 120.0,
        "; ".join(details) + f"; runtime {elapsed:.0f}s (< 120s)",
    )


def test_c07_quantile_closed_form_matches_numeric_minimizer():
    """The quantile-view closed form agrees with the independent
    parameter-space entropy minimizer within 1e-3 sigma_Y across
    correlations and ten view levels each."""
    worst = 0.0
    for rho in (0.3, 0.6, 0.9, -0.4):
        p = BivariateNormalParams(rho=rho, **QUANT_PARAMS)
        q_x = var_normal_x(p, ALPHA)
        for q1 in np.linspace(q_x - 1.5 * p.sigma_x, q_x + 2.0 * p.sigma_x, 10):
            closed = covar_quantile_view(p, float(q1), "eq", ALPHA).covar
            orc = numeric_posterior_params(p, quantile_view(float(q1), ALPHA), ALPHA)
            rebuilt = orc.mu_y + orc.sigma_y * Z95
            worst = max(worst, abs(rebuilt - closed) / p.sigma_y)
    _verdict(
        "criterion 7 (quantile view vs numeric minimizer)",
        worst <= 1e-3,
        f"worst |diff|/sigma_y = {worst:.2e} over 40 cases (tol 1e-3)",
    )


def test_c08_entropy_formula_matches_matrix_form():
    """The bivariate-normal relative entropy agrees with the standard
    trace/determinant form within 1e-12 on 10,000 random nonsingular pairs."""
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(10_000):
        prior = random_params(rng)
        post = random_params(rng)
        got = kl_bivariate_normal(post, prior)
        s = np.array(
            [
                [prior.sigma_x**2, prior.rho * prior.sigma_x * prior.sigma_y],
                [prior.rho * prior.sigma_x * prior.sigma_y, prior.sigma_y**2],
            ]
        )
        st = np.array(
            [
                [post.sigma_x**2, post.rho * post.sigma_x * post.sigma_y],
                [post.rho * post.sigma_x * post.sigma_y, post.sigma_y**2],
            ]
        )
        dm = np.array([post.mu_x - prior.mu_x, post.mu_y - prior.mu_y])
        si = np.linalg.inv(s)
        want = 0.5 * (
            np.trace(si @ st) - 2.0 + dm @ si @ dm
            + math.log(np.linalg.det(s) / np.linalg.det(st))
        )
        worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    _verdict(
        "criterion 8 (entropy formula)",
        worst <= 1e-12,
        f"max relative residual {worst:.2e} over 10000 pairs (tol 1e-12)",
    )


def test_c09_discrete_solver_exactness():
    """Two-scenario tilt reproduced to 1e-10 against a bisection oracle; dual
    gradient matches central differences to 1e-6 on 20 random systems; the
    solved entropy never exceeds a brute-force minimum by more than 1e-6."""
    panel = build_panel([0.0, 1.0], [0.0, 1.0])
    cs = compile_view(expectation_view(0.75), panel)
    oracle, _ = tilt_mean_by_bisection(panel.x, panel.prior, 0.75)
    rep = solve(panel, cs)
    tilt_ok = bool(np.max(np.abs(rep.posterior.weights - oracle)) <= 1e-10)
    tilt_ok = tilt_ok and bool(np.max(np.abs(rep.posterior.weights - [0.25, 0.75])) <= 1e-10)

    rng = np.random.default_rng(105)
    grad_worst = 0.0
    h = 1e-6
    for _ in range(20):
        j = int(rng.integers(3, 9))
        panel_r = build_panel(
            rng.normal(size=j), rng.normal(size=j), rng.uniform(0.2, 1.0, j)
        )
        rows = np.vstack([rng.normal(size=j), np.ones(j)])
        target = float(rows[0] @ panel_r.prior + 0.1 * rng.normal())
        cs_r = LinearConstraintSet(rows, np.array([target, 1.0]), np.array([target, 1.0]))
        lam = rng.normal(scale=0.5, size=2)
        _, grad = dual_value_and_gradient(lam, panel_r, cs_r)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            up, _ = dual_value_and_gradient(lam + e, panel_r, cs_r)
            dn, _ = dual_value_and_gradient(lam - e, panel_r, cs_r)
            grad_worst = max(grad_worst, abs((up - dn) / (2 * h) - grad[k]))

    rng = np.random.default_rng(106)
    gap_worst = -math.inf
    for _ in range(25):
        j = int(rng.integers(2, 7))
        panel_r = build_panel(
            rng.normal(size=j), rng.normal(size=j), rng.uniform(0.2, 1.0, j)
        )
        lo_x, hi_x = panel_r.x.min(), panel_r.x.max()
        target = float(rng.uniform(lo_x + 0.2 * (hi_x - lo_x), hi_x - 0.2 * (hi_x - lo_x)))
        cs_r = compile_view(expectation_view(target), panel_r)
        rep_r = solve(panel_r, cs_r)
        oracle_kl = brute_force_min_kl(panel_r, cs_r)
        gap_worst = max(gap_worst, rep_r.entropy - oracle_kl)
    _verdict(
        "criterion 9 (discrete solver exactness)",
        tilt_ok and grad_worst <= 1e-6 and gap_worst <= 1e-6,
        f"tilt exact: {tilt_ok}; max gradient diff {grad_worst:.2e} (tol 1e-6); "
        f"max entropy excess over oracle {gap_worst:.2e} (tol 1e-6)",
    )


def test_c10_binned_distribution_view_fidelity():
    """On a four-atom panel, a binned probability view is matched to 1e-8 per
    bin and the posterior mean equals the probability-weighted atom sum."""
    x = np.repeat([25.0, 50.0, 75.0, 100.0], 5)
    rng = np.random.default_rng(107)
    panel = build_panel(x, rng.normal(0.0, 1.0, x.size))
    probs = (0.9630, 0.0370, 0.0, 0.0)
    view = distribution_view([12.5, 37.5, 62.5, 87.5, 112.5], probs)
    cs = compile_view(view, panel)
    rep = solve(panel, cs)
    masses = [
        float(rep.posterior.weights[x == atom].sum())
        for atom in (25.0, 50.0, 75.0, 100.0)
    ]
    mass_err = max(abs(m - t) for m, t in zip(masses, probs))
    mean = float(rep.posterior.weights @ x)
    want_mean = sum(pr * atom for pr, atom in zip(probs, (25.0, 50.0, 75.0, 100.0)))
    mean_err = abs(mean - want_mean)
    assert abs(want_mean - 25.925) < 1e-12  # hand-computed expected move
    _verdict(
        "criterion 10 (distribution view fidelity)",
        mass_err <= 1e-8 and mean_err <= 1e-8,
        f"max bin-mass error {mass_err:.2e}, posterior-mean error {mean_err:.2e} "
        f"(tol 1e-8; mean target {want_mean})",
    )


def test_c11_relative_view_volatility_ratio_collapse():
    """When the correlation equals the volatility ratio sigma_Y/sigma_X, a
    relative view carries no information about Y: CoVaR = VaR exactly, over
    100 random mean/variance view parameters."""
    rng = np.random.default_rng(108)
    ok = True
    for _ in range(100):
        sx = float(rng.uniform(0.05, 0.4))
        rho = float(rng.uniform(0.05, 0.95))
        p = BivariateNormalParams(
            mu_x=float(rng.normal(0.0, 0.2)), mu_y=float(rng.normal(0.0, 0.2)),
            sigma_x=sx, sigma_y=rho * sx, rho=rho,
        )
        d = float(rng.normal(0.0, 0.3))
        s_sq = float(rng.uniform(0.0004, 0.2))
        out = covar_relative_view(p, d, s_sq, ALPHA)
        ok = ok and out.covar == var_normal(p, ALPHA) and out.collapsed_to_var
    _verdict("criterion 11 (relative-view collapse)", ok, "100 draws, all exact")


def test_c12_estimation_recovery_at_contract_tolerances():
    """Marginal and copula fitters recover seeded synthetic parameters within
    their contract tolerances; the quantile-regression baseline equals the
    pair-enumeration oracle on 50 random instances."""
    rng = np.random.default_rng(109)
    data = rng.standard_t(5.0, 50_000)
    fit = fit_t_marginal(data)
    marg_ok = (
        abs(fit.location) <= 0.02 and abs(fit.scale - 1.0) <= 0.02
        and abs(fit.dof - 5.0) <= 0.6
    )
    normal_fit = fit_t_marginal(np.random.default_rng(110).standard_normal(50_000))
    marg_ok = marg_ok and normal_fit.dof >= 30.0

    from scipy.special import stdtr

    rng = np.random.default_rng(111)
    n = 50_000
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    zc = 0.7 * z1 + math.sqrt(1 - 0.49) * z2
    w = rng.chisquare(4.0, n) / 4.0
    u = np.clip(stdtr(4.0, z1 / np.sqrt(w)), 1e-9, 1 - 1e-9)
    v = np.clip(stdtr(4.0, zc / np.sqrt(w)), 1e-9, 1 - 1e-9)
    cop = fit_t_copula(u, v)
    cop_ok = abs(cop.rho - 0.7) <= 0.02 and abs(cop.dof - 4.0) <= 1.0

    rng = np.random.default_rng(112)
    qr_worst = 0.0
    for _ in range(50):
        m = int(rng.integers(10, 40))
        x = rng.normal(size=m)
        y = 0.5 * x + rng.standard_t(4, m)
        level = float(rng.uniform(0.1, 0.9))
        qfit, _ = quantile_regression_covar(x, y, level, 0.0)
        got = pinball_loss(y - qfit.intercept - qfit.slope * x, level)
        oracle, _ = pair_candidate_minimum(x, y, level)
        qr_worst = max(qr_worst, abs(got - oracle))
    _verdict(
        "criterion 12 (estimation recovery)",
        marg_ok and cop_ok and qr_worst <= 1e-12,
        f"marginal fit ({fit.location:+.3f}, {fit.scale:.3f}, {fit.dof:.2f}) ok={marg_ok}; "
        f"copula fit ({cop.rho:.3f}, {cop.dof:.2f}) ok={cop_ok}; "
        f"max QR objective gap {qr_worst:.2e}",
    )
