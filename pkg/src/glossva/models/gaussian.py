"""Conjugate linear-Gaussian toy model and 1-D scalar targets.

The toy model is fully Gaussian, so the exact posterior is available in
closed form: theta_G ~ N(0, tau^2), b_i | theta_G ~ N(theta_G,
sigma_b^2), y_ij | b_i ~ N(b_i, sigma_y^2).  It is the reference case
in which the conditionally structured Gaussian family is exact and the
marginal-kernel approximation used by the global skew weight is tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import HierarchicalModel, ModelSignature

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class LinearGaussianData:
    y: list  # list of np.ndarray, one per group
    tau: float = 1.0
    sigma_b: float = 1.0
    sigma_y: float = 1.0

    @property
    def n(self):
        return len(self.y)


def linear_gaussian_model(data: LinearGaussianData):
    tau2 = data.tau**2
    sb2 = data.sigma_b**2
    sy2 = data.sigma_y**2
    y = [yi.tolist() for yi in data.y]

    def log_prior_global(theta_g):
        t = theta_g[0]
        return -0.5 * LOG_2PI - math.log(data.tau) - t * t / (2.0 * tau2)

    def log_h_local(i, b_i, theta_g):
        b = b_i[0]
        t = theta_g[0]
        diff = b - t
        total = -0.5 * LOG_2PI - math.log(data.sigma_b) - diff * diff / (2.0 * sb2)
        for yij in y[i]:
            r = yij - b
            total = total - 0.5 * LOG_2PI - math.log(data.sigma_y) - r * r / (2.0 * sy2)
        return total

    signature = ModelSignature(
        n=data.n,
        d=1,
        d_i=(1,) * data.n,
        global_names=("theta",),
        local_names=("b",),
    )
    return HierarchicalModel(
        signature=signature,
        log_prior_global=log_prior_global,
        log_h_local=log_h_local,
        kind="linear_gaussian",
        extra={"data": data},
    )


def simulate_linear_gaussian(n, n_i, seed, tau=1.0, sigma_b=1.0, sigma_y=1.0):
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, tau)
    ys = []
    for _ in range(n):
        b = rng.normal(theta, sigma_b)
        ys.append(rng.normal(b, sigma_y, size=n_i))
    return LinearGaussianData(y=ys, tau=tau, sigma_b=sigma_b, sigma_y=sigma_y)


def conjugate_posterior(data: LinearGaussianData):
    """Exact joint posterior of (b_1..b_n, theta_G): mean and precision.

    Ordering is locals first, global last, matching the block structure
    of the variational precision factor.
    """
    n = data.n
    tau2 = data.tau**2
    sb2 = data.sigma_b**2
    sy2 = data.sigma_y**2
    dim = n + 1
    omega = np.zeros((dim, dim))
    rhs = np.zeros(dim)
    for i, yi in enumerate(data.y):
        omega[i, i] = 1.0 / sb2 + len(yi) / sy2
        omega[i, n] = omega[n, i] = -1.0 / sb2
        rhs[i] = np.sum(yi) / sy2
    omega[n, n] = 1.0 / tau2 + n / sb2
    mean = np.linalg.solve(omega, rhs)
    return mean, omega


def exact_variational_params(data: LinearGaussianData):
    """Variational parameters reproducing the exact posterior.

    The Cholesky factor of the arrow-shaped joint precision has exactly
    the sparsity of the variational factor T, so the map is exact.
    """
    from ..family import VariationalParams

    n = data.n
    mean, omega = conjugate_posterior(data)
    chol = np.linalg.cholesky(omega)  # lower, ordering (b_1..b_n, theta)
    t_g = chol[n, n]
    params = VariationalParams.zeros_like_signature(
        linear_gaussian_model(data).signature
    )
    params.mu_g[0] = float(mean[n])
    params.t_g_star[0] = math.log(t_g)
    for i in range(n):
        params.m[i][0] = float(mean[i])
        params.t_gi[i][0, 0] = float(chol[n, i])
        params.f[i][0] = math.log(chol[i, i])
    return params


def scalar_target_model(log_kernel, name="scalar"):
    """A 1-D model with no groups whose global prior is the target kernel.

    With n = 0 the marginal-kernel approximation is exact, so the
    global skew weight uses the true target.
    """
    signature = ModelSignature(
        n=0, d=1, d_i=(), global_names=("theta",), local_names=()
    )
    return HierarchicalModel(
        signature=signature,
        log_prior_global=lambda theta_g: log_kernel(theta_g[0]),
        log_h_local=lambda i, b, t: 0.0,
        kind=f"target_{name}",
    )
