"""Analytically u-marginalized ELBO and its reparameterization gradient.

The rejection-free sampler thresholds uniform variables to decide
reflections, which makes the naive pathwise estimator discontinuous.
Integrating the uniforms out replaces each reflect/keep indicator by its
probability, so for a fixed Gaussian draw eps the estimator is a
branch-weighted combination of kernel and entropy evaluations at the
kept and reflected points, at both levels of the hierarchy.  The result
is smooth in lambda and differentiable on the adiff tape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import adiff, linalg
from .adiff import TraceInvalidError
from .family import (
    LOG_2,
    LOG_2PI,
    CondScale,
    Variant,
    VariationalParams,
    clamp_unit,
    global_scale,
    mu_i_of,
    t_i_of,
)
from .model import HierarchicalModel


@dataclass
class ElboSample:
    value: float
    gradient: np.ndarray
    eps: np.ndarray
    w_global: list  # weight of the kept global branch, [] if unskewed
    w_local: list  # per global branch: list of per-group kept weights


def split_eps(signature, eps):
    if len(eps) != signature.dim_total:
        raise ValueError("eps must have one coordinate per model dimension")
    eps_g = list(eps[: signature.d])
    eps_i = []
    off = signature.d
    for di in signature.d_i:
        eps_i.append(list(eps[off : off + di]))
        off += di
    return eps_g, eps_i


def _log_w(w):
    return adiff.log(clamp_unit(w))


def _elbo_impl(model: HierarchicalModel, params, variant: Variant, eps, info=None):
    sig = model.signature
    eps_g, eps_i = split_eps(sig, eps)
    sq_eps_g = sum(e * e for e in eps_g)

    g_scale = global_scale(params)
    shift = linalg.tri_solve(g_scale.tri, eps_g, transpose=True)
    theta_hat = [mg + s for mg, s in zip(params.mu_g, shift)]

    if variant.skewed_global:
        theta_ref = [mg - s for mg, s in zip(params.mu_g, shift)]
        branch_points = [theta_hat, theta_ref]
    else:
        branch_points = [theta_hat]

    # per-branch local maps; reused by the marginal-kernel approximation
    # and by the branch contributions
    branches = []
    for theta in branch_points:
        scales = []
        mus = []
        for i in range(sig.n):
            scale = t_i_of(params, i, theta, base=variant.base)
            scales.append(scale)
            mus.append(mu_i_of(params, i, theta, scale))
        branches.append(
            {"theta": theta, "scales": scales, "mus": mus,
             "prior": model.log_prior_global(theta)}
        )

    # global branch weights from the approximate marginal kernel
    if variant.skewed_global:
        log_ht = []
        for br in branches:
            acc = br["prior"]
            for i in range(sig.n):
                acc = acc + 0.5 * sig.d_i[i] * LOG_2PI
                for ld in br["scales"][i].log_diag:
                    acc = acc - ld
                acc = acc + model.log_h_local(i, br["mus"][i], br["theta"])
            log_ht.append(acc)
        w_g = clamp_unit(adiff.sigmoid(log_ht[0] - log_ht[1]))
        one_minus_w_g = clamp_unit(1.0 - w_g)
        branch_weights = [w_g, one_minus_w_g]
        if info is not None:
            info["w_global"].append(adiff.value(w_g))
    else:
        branch_weights = [1.0]

    # T_G'(theta - mu_G) = +-eps_G identically, so the Gaussian entropy
    # term is the same in both branches
    log_phi_g = -0.5 * sig.d * LOG_2PI - 0.5 * sq_eps_g
    for ld in g_scale.log_diag:
        log_phi_g = log_phi_g + ld

    total = 0.0
    for bi, (br, bw) in enumerate(zip(branches, branch_weights)):
        theta = br["theta"]
        log_q_g = log_phi_g
        if variant.skewed_global:
            log_q_g = log_q_g + LOG_2 + _log_w(branch_weights[bi])
        branch_total = br["prior"] - log_q_g
        local_ws = []
        for i in range(sig.n):
            scale = br["scales"][i]
            mu_i = br["mus"][i]
            shift_i = linalg.tri_solve(scale.tri, eps_i[i], transpose=True)
            b_hat = [m + s for m, s in zip(mu_i, shift_i)]
            log_phi = -0.5 * sig.d_i[i] * LOG_2PI - 0.5 * sum(
                e * e for e in eps_i[i]
            )
            for ld in scale.log_diag:
                log_phi = log_phi + ld
            lh_hat = model.log_h_local(i, b_hat, theta)
            if variant.skewed_local:
                b_ref = [m - s for m, s in zip(mu_i, shift_i)]
                lh_ref = model.log_h_local(i, b_ref, theta)
                w_i = clamp_unit(adiff.sigmoid(lh_hat - lh_ref))
                one_minus = clamp_unit(1.0 - w_i)
                branch_total = (
                    branch_total
                    + w_i * lh_hat
                    + one_minus * lh_ref
                    - log_phi
                    - LOG_2
                    - w_i * _log_w(w_i)
                    - one_minus * _log_w(one_minus)
                )
                local_ws.append(adiff.value(w_i))
            else:
                branch_total = branch_total + lh_hat - log_phi
        if info is not None:
            info["w_local"].append(local_ws)
        total = total + bw * branch_total
    return total


def elbo_marginalized(model, params, variant, eps):
    """Single-eps estimator with the uniforms integrated out."""
    return _elbo_impl(model, params, variant, eps)


def elbo_gradient(model, params: VariationalParams, variant, eps) -> ElboSample:
    """Value and gradient with respect to the flat packed lambda."""
    sig = model.signature
    tape = adiff.Tape()
    flat = params.pack()
    leaves = [tape.var(float(v)) for v in flat]
    taped = VariationalParams.unpack(leaves, sig)
    info = {"w_global": [], "w_local": []}
    out = _elbo_impl(model, taped, variant, eps, info=info)
    grad = np.array(tape.gradient(out, leaves))
    grad[VariationalParams.frozen_mask(sig, variant)] = 0.0
    return ElboSample(
        value=adiff.value(out),
        gradient=grad,
        eps=np.asarray(eps, dtype=float),
        w_global=info["w_global"],
        w_local=info["w_local"],
    )


def elbo_estimate(model, params, variant, n_samples, seed):
    """Mean and standard error over fresh eps draws; seed-reproducible."""
    from .family import stream_rng

    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    dim = model.signature.dim_total
    values = np.empty(n_samples)
    for j in range(n_samples):
        eps = stream_rng(seed, j, 0).standard_normal(dim)
        values[j] = adiff.value(elbo_marginalized(model, params, variant, eps))
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return mean, se


def indicator_elbo(model, params, variant: Variant, eps, u):
    """Non-marginalized integrand: thresholds the uniforms explicitly.

    Used as the brute-force oracle for the marginalization identity;
    averaging over u at fixed eps recovers elbo_marginalized.
    """
    from .family import log_q

    sig = model.signature
    eps_g, eps_i = split_eps(sig, eps)
    u_g, u_i = u[0], u[1:]
    g_scale = global_scale(params)
    shift = linalg.tri_solve(g_scale.tri, eps_g, transpose=True)
    theta_g = [mg + s for mg, s in zip(params.mu_g, shift)]
    if variant.skewed_global:
        from .family import w_global

        w = adiff.value(w_global(model, params, theta_g, base=variant.base))
        if u_g > w:
            theta_g = [mg - s for mg, s in zip(params.mu_g, shift)]
    theta = list(theta_g)
    for i in range(sig.n):
        scale = t_i_of(params, i, theta_g, base=variant.base)
        mu_i = mu_i_of(params, i, theta_g, scale)
        shift_i = linalg.tri_solve(scale.tri, eps_i[i], transpose=True)
        b_i = [m + s for m, s in zip(mu_i, shift_i)]
        if variant.skewed_local:
            from .family import w_local

            w_i = adiff.value(
                w_local(model, params, i, b_i, theta_g, scale=scale, mu_i=mu_i)
            )
            if u_i[i] > w_i:
                b_i = [m - s for m, s in zip(mu_i, shift_i)]
        theta.extend(b_i)
    return adiff.value(model.log_h_joint(theta)) - adiff.value(
        log_q(model, params, variant, theta)
    )
