"""Mixed-effects Poisson regression for longitudinal count data.

Linear predictor per observation:

    log mu_ij = x_ij' beta + z_ij' b_i,
    x_ij = (1, base_i, trt_i, base_i * trt_i, age_i, visit_ij)
    z_ij = (1, visit_ij)

Global parameters theta_G = (beta, vech(C*)), d = 9, where C is the
lower Cholesky factor of the random-effects covariance, b_i ~ N(0, CC').
Prior: theta_G ~ N(0, 10^2 I_9) on the unconstrained coordinates.

Visit codes follow the common centering (j - (n_i - 1)/2) / n_i for
visits j = 0..n_i-1 in the simulator; CSV files supply their own codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import adiff, linalg
from ..model import HierarchicalModel, ModelSignature

LOG_2PI = math.log(2.0 * math.pi)

GLOBAL_NAMES = (
    "beta0",
    "beta_base",
    "beta_trt",
    "beta_base_trt",
    "beta_age",
    "beta_visit",
    "cstar11",
    "cstar21",
    "cstar22",
)


@dataclass
class LongitudinalCountData:
    """Per patient: fixed-effect rows (n_i x 6), random-effect rows
    (n_i x 2), and non-negative integer counts (n_i,)."""

    x: list
    z: list
    y: list

    def __post_init__(self):
        if not (len(self.x) == len(self.z) == len(self.y)):
            raise ValueError("covariates and responses disagree on group count")
        for i, (xi, zi, yi) in enumerate(zip(self.x, self.z, self.y)):
            if xi.ndim != 2 or xi.shape[1] != 6:
                raise ValueError(f"patient {i}: need 6 fixed-effect columns")
            if zi.ndim != 2 or zi.shape[1] != 2:
                raise ValueError(f"patient {i}: need 2 random-effect columns")
            if xi.shape[0] != yi.shape[0] or xi.shape[0] == 0:
                raise ValueError(f"patient {i}: empty group or row mismatch")
            if (yi < 0).any() or not np.allclose(yi, np.round(yi)):
                raise ValueError(f"patient {i}: counts must be non-negative integers")

    @property
    def n(self):
        return len(self.x)


def poisson_mixed_model(data: LongitudinalCountData):
    """Build the hierarchical model for a count longitudinal dataset."""
    x_rows = [xi.tolist() for xi in data.x]
    z_rows = [zi.tolist() for zi in data.z]
    y_vals = [yi.tolist() for yi in data.y]
    lgamma_y = [[math.lgamma(y + 1.0) for y in yi] for yi in y_vals]
    n = data.n

    def log_prior_global(theta_g):
        total = -4.5 * LOG_2PI - 9.0 * math.log(10.0)
        for t in theta_g:
            total = total - t * t / 200.0
        return total

    def log_h_local(i, b_i, theta_g):
        beta = theta_g[:6]
        c = linalg.star_inverse(linalg.unvech(theta_g[6:9], 2))
        # likelihood
        total = 0.0
        for x_row, z_row, y, lgy in zip(x_rows[i], z_rows[i], y_vals[i], lgamma_y[i]):
            lp = 0.0
            for xk, bk in zip(x_row, beta):
                if xk != 0.0:
                    lp = lp + xk * bk
            for zk, bv in zip(z_row, b_i):
                if zk != 0.0:
                    lp = lp + zk * bv
            total = total + y * lp - adiff.exp(lp) - lgy
        # b ~ N(0, CC')
        half = linalg.tri_solve(c, b_i)
        total = total - LOG_2PI - 0.5 * linalg.sq_norm(half)
        for dk in c.diagonal():
            total = total - adiff.log(dk)
        return total

    signature = ModelSignature(
        n=n,
        d=9,
        d_i=(2,) * n,
        global_names=GLOBAL_NAMES,
        local_names=("b0", "b_visit"),
    )
    return HierarchicalModel(
        signature=signature,
        log_prior_global=log_prior_global,
        log_h_local=log_h_local,
        kind="poisson",
        extra={
            "data": data,
            "cstar_slice": (6, 9),
            "cstar_dim": 2,
            "cstar_is_precision": False,
        },
    )


def simulate_poisson(n, n_i, beta, chol_cov, seed):
    """Simulated dataset: base, age ~ N(0, 1); trt ~ Bernoulli(1/2);
    visits coded (j - (n_i - 1)/2) / n_i; b_i ~ N(0, CC')."""
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (6,):
        raise ValueError("beta must have 6 entries")
    chol_cov = np.asarray(chol_cov, dtype=float)
    if chol_cov.shape != (2, 2):
        raise ValueError("chol_cov must be 2x2 lower triangular")
    visits = (np.arange(n_i) - (n_i - 1) / 2.0) / n_i
    xs, zs, ys = [], [], []
    for _ in range(n):
        base = rng.normal()
        trt = float(rng.random() < 0.5)
        age = rng.normal()
        x = np.column_stack(
            [
                np.ones(n_i),
                np.full(n_i, base),
                np.full(n_i, trt),
                np.full(n_i, base * trt),
                np.full(n_i, age),
                visits,
            ]
        )
        z = np.column_stack([np.ones(n_i), visits])
        b = chol_cov @ rng.standard_normal(2)
        mu = np.exp(x @ beta + z @ b)
        ys.append(rng.poisson(mu).astype(float))
        xs.append(x)
        zs.append(z)
    return LongitudinalCountData(x=xs, z=zs, y=ys)
