"""Shared helpers for the test suite: grid quadrature over variational
densities and inverse-CDF reference sampling for 1-D targets."""

import math

import numpy as np

from glossva import adiff
from glossva.family import global_scale, log_q, mu_i_of, t_i_of


def global_sd(params):
    return 1.0 / math.exp(params.t_g_star[0])


def quadrature_1d(model, params, variant, n_points=2001, width=10.0):
    """Integral of exp(log_q) over [mu_G +- width * sd] for d=1, n=0."""
    mu = params.mu_g[0]
    sd = global_sd(params)
    grid = np.linspace(mu - width * sd, mu + width * sd, n_points)
    vals = np.array(
        [math.exp(adiff.value(log_q(model, params, variant, [t]))) for t in grid]
    )
    from scipy.integrate import simpson

    return float(simpson(vals, x=grid))


def quadrature_2d(model, params, variant, n_points=201, width=10.0):
    """Integral of exp(log_q) over a (theta_G, b_1) grid for d=1, n=1."""
    mu = params.mu_g[0]
    sd = global_sd(params)
    tgrid = np.linspace(mu - width * sd, mu + width * sd, n_points)
    total_rows = np.empty(n_points)
    from scipy.integrate import simpson

    for r, t in enumerate(tgrid):
        scale = t_i_of(params, 0, [t], base=variant.base)
        m = mu_i_of(params, 0, [t], scale)[0]
        s = 1.0 / math.exp(scale.log_diag[0])
        bgrid = np.linspace(m - width * s, m + width * s, n_points)
        vals = np.array(
            [
                math.exp(adiff.value(log_q(model, params, variant, [t, b])))
                for b in bgrid
            ]
        )
        total_rows[r] = simpson(vals, x=bgrid)
    return float(simpson(total_rows, x=tgrid))


def u_brute_force_average(model, params, variant, eps, n_u, seed):
    """Mean and MC standard error of the indicator integrand over uniform
    u draws at fixed eps.

    The integrand is a deterministic function of the reflect/keep pattern,
    so distinct patterns are evaluated once and reused across draws.
    """
    from glossva import linalg
    from glossva.elbo import indicator_elbo, split_eps

    sig = model.signature
    eps_g, eps_i = split_eps(sig, eps)
    g_scale = global_scale(params)
    shift = linalg.tri_solve(g_scale.tri, eps_g, transpose=True)
    theta_plus = [m + s for m, s in zip(params.mu_g, shift)]
    theta_minus = [m - s for m, s in zip(params.mu_g, shift)]
    if variant.skewed_global:
        from glossva.family import w_global

        wg = adiff.value(w_global(model, params, theta_plus, base=variant.base))
    else:
        wg = 1.0  # a keep-probability of one: reflections never trigger
    branch_ws = []
    for theta in (theta_plus, theta_minus):
        ws = []
        for i in range(sig.n):
            scale = t_i_of(params, i, theta, base=variant.base)
            mu = mu_i_of(params, i, theta, scale)
            shift_i = linalg.tri_solve(scale.tri, eps_i[i], transpose=True)
            b = [m + s for m, s in zip(mu, shift_i)]
            if variant.skewed_local:
                from glossva.family import w_local

                ws.append(
                    adiff.value(
                        w_local(model, params, i, b, theta, scale=scale, mu_i=mu)
                    )
                )
            else:
                ws.append(1.0)
        branch_ws.append(ws)

    cache = {}

    def integrand(pattern):
        if pattern not in cache:
            u = [1.0 if refl else 0.0 for refl in pattern]
            cache[pattern] = indicator_elbo(model, params, variant, eps, u)
        return cache[pattern]

    rng = np.random.default_rng(seed)
    u = rng.random((n_u, sig.n + 1))
    vals = np.empty(n_u)
    for k in range(n_u):
        g_ref = bool(u[k, 0] > wg)
        ws = branch_ws[1 if g_ref else 0]
        pattern = (g_ref,) + tuple(
            bool(u[k, 1 + i] > ws[i]) for i in range(sig.n)
        )
        vals[k] = integrand(pattern)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_u))


def staged_fit(model, variant, stages, base_seed=1):
    """Coarse-to-fine training: each stage warm-starts from the previous.

    `stages` is a list of (iterations, learning_rate, samples_per_gradient).
    """
    from glossva.train import TrainConfig, fit

    result = None
    for k, (iters, lr, sps) in enumerate(stages):
        config = TrainConfig(
            iterations=iters,
            learning_rate=lr,
            samples_per_gradient=sps,
            seed=base_seed + k,
            monitor_stride=iters,
            monitor_samples=5,
        )
        result = fit(
            model,
            variant,
            config,
            initial=None if result is None else result.params,
        )
    return result


def inverse_cdf_draws(model, params, variant, n_draws, seed, n_points=4001, width=10.0):
    """Reference draws from grid-normalized exp(log_q) for d=1, n=0."""
    mu = params.mu_g[0]
    sd = global_sd(params)
    grid = np.linspace(mu - width * sd, mu + width * sd, n_points)
    dens = np.array(
        [math.exp(adiff.value(log_q(model, params, variant, [t]))) for t in grid]
    )
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))])
    cdf /= cdf[-1]
    # strictly increasing support for interpolation
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    u = np.random.default_rng(seed).random(n_draws)
    return np.interp(u, cdf[keep], grid[keep])
