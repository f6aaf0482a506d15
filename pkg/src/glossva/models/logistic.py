"""Random-intercept logistic regression for longitudinal binary data.

Linear predictor per observation:

    logit Pr(y_ij = 1) = x_ij' beta + b_i,
    x_ij = (1, smoke_i, age_ij, smoke_i * age_ij)

Global parameters theta_G = (beta, eta), d = 5.  Under the default
prior, theta_G ~ N(0, 10^2 I_5) and b_i ~ N(0, exp(-2 eta)), so eta is
the log precision-root of the random intercepts.  The alternative
Huang-Wand-style prior keeps beta ~ N(0, 10^2 I) but places a
half-t(2, 10) prior on the random-intercept standard deviation sigma,
with eta = log sigma.

Age covariates are centered at the midpoint of the visit range (visits
j = 0..n_i-1 are coded as j - (n_i - 1)/2); the CSV loader passes the
age column through unchanged, so observed-data files should arrive
already centered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import adiff
from ..model import HierarchicalModel, ModelSignature

LOG_2PI = math.log(2.0 * math.pi)

GLOBAL_NAMES = ("beta0", "beta_smoke", "beta_age", "beta_smoke_age", "eta")


@dataclass
class LongitudinalBinaryData:
    """Per group: covariate rows (n_i x 4) and binary responses (n_i,)."""

    x: list  # list of np.ndarray, shape (n_i, 4)
    y: list  # list of np.ndarray, shape (n_i,), values in {0, 1}

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError("covariates and responses disagree on group count")
        for i, (xi, yi) in enumerate(zip(self.x, self.y)):
            if xi.ndim != 2 or xi.shape[1] != 4:
                raise ValueError(f"group {i}: need 4 covariate columns")
            if xi.shape[0] != yi.shape[0] or xi.shape[0] == 0:
                raise ValueError(f"group {i}: empty group or row mismatch")
            if not np.isin(yi, (0, 1)).all():
                raise ValueError(f"group {i}: responses must be 0/1")

    @property
    def n(self):
        return len(self.x)


def _bernoulli_logit_loglik(x_rows, y_vals, beta, b):
    total = 0.0
    for x_row, y in zip(x_rows, y_vals):
        lp = b
        for xk, bk in zip(x_row, beta):
            if xk != 0.0:
                lp = lp + xk * bk
        # y*lp - log(1 + exp(lp)), stable in both tails
        total = total + y * lp - adiff.softplus(lp)
    return total


def logistic_mixed_model(data: LongitudinalBinaryData, prior="normal_theta"):
    """Build the hierarchical model for a binary longitudinal dataset."""
    if prior not in ("normal_theta", "huang_wand"):
        raise ValueError(f"unknown prior {prior!r}")
    x_rows = [xi.tolist() for xi in data.x]
    y_vals = [yi.tolist() for yi in data.y]
    n = data.n

    def log_prior_global(theta_g):
        total = -2.5 * LOG_2PI - 5.0 * math.log(10.0)
        for t in theta_g:
            total = total - t * t / 200.0
        if prior == "huang_wand":
            eta = theta_g[4]
            # remove the N(0, 100) factor on eta, add half-t(2, 10) on
            # sigma = exp(eta) with the exp-transform Jacobian
            total = total + eta * eta / 200.0 + 0.5 * LOG_2PI + math.log(10.0)
            sigma_sq = adiff.exp(2.0 * eta)
            total = total - 1.5 * adiff.log1p(sigma_sq / 200.0) + eta
        return total

    if prior == "normal_theta":

        def local_prior(b, eta):
            # b ~ N(0, exp(-2 eta))
            return -0.5 * LOG_2PI + eta - 0.5 * b * b * adiff.exp(2.0 * eta)

    else:

        def local_prior(b, eta):
            # b ~ N(0, exp(2 eta)), eta = log sigma
            return -0.5 * LOG_2PI - eta - 0.5 * b * b * adiff.exp(-2.0 * eta)

    def log_h_local(i, b_i, theta_g):
        beta = theta_g[:4]
        eta = theta_g[4]
        b = b_i[0]
        return _bernoulli_logit_loglik(x_rows[i], y_vals[i], beta, b) + local_prior(
            b, eta
        )

    signature = ModelSignature(
        n=n, d=5, d_i=(1,) * n, global_names=GLOBAL_NAMES, local_names=("b",)
    )
    return HierarchicalModel(
        signature=signature,
        log_prior_global=log_prior_global,
        log_h_local=log_h_local,
        kind="logistic",
        extra={"prior": prior, "data": data},
    )


def simulate_logistic(n, n_i, beta, eta, seed, smoke_prob=0.5):
    """Simulated dataset from the model's own generative process.

    Ages are coded j - (n_i - 1)/2 for visits j = 0..n_i-1; smoking
    status is a per-group Bernoulli draw.
    """
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (4,):
        raise ValueError("beta must have 4 entries")
    ages = np.arange(n_i) - (n_i - 1) / 2.0
    xs, ys = [], []
    sd_b = math.exp(-eta)
    for _ in range(n):
        smoke = float(rng.random() < smoke_prob)
        x = np.column_stack(
            [np.ones(n_i), np.full(n_i, smoke), ages, smoke * ages]
        )
        b = rng.normal(0.0, sd_b)
        p = 1.0 / (1.0 + np.exp(-(x @ beta + b)))
        ys.append((rng.random(n_i) < p).astype(float))
        xs.append(x)
    return LongitudinalBinaryData(x=xs, y=ys)
