"""Mixed multinomial logit model for panel choice data.

Utilities per respondent i, scenario j, alternative t:

    U_ijt = at*b_at + td*b_td + fee*b_fee + (li*fee)*b_lf + (res*fee)*b_rf
            + at*b_i1 + td*b_i2 + fee*b_i3

with softmax choice probabilities over the three alternatives.  Random
coefficients b_i ~ N(0, Sigma) with a hierarchical half-t-type prior on
Sigma built from inverse-Wishart and Gamma pieces.  The unconstrained
global vector is

    theta_G = (beta(5), vech(C*)(6), log a_1..3),   d = 14,

where C is the lower Cholesky factor of the precision Omega = Sigma^-1.
The prior on theta_G is the transformed density of the hierarchical
prior, including the Cholesky-map and log-transform Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import adiff, linalg
from ..model import HierarchicalModel, ModelSignature

LOG_2PI = math.log(2.0 * math.pi)

ALTERNATIVES = ("FSP", "PSP", "PUP")

GLOBAL_NAMES = (
    "beta_at",
    "beta_td",
    "beta_fee",
    "beta_li_fee",
    "beta_res_fee",
    "cstar11",
    "cstar21",
    "cstar31",
    "cstar22",
    "cstar32",
    "cstar33",
    "log_a1",
    "log_a2",
    "log_a3",
)

SIGMA_SQ = 1.0e6
NU = 2.0
A_SCALE = 1.0e3


@dataclass
class PanelChoiceData:
    """Per respondent: attribute arrays (scenarios x 3 alternatives),
    binary li/res indicators, and chosen alternative indices."""

    at: list  # np.ndarray (J, 3)
    td: list
    fee: list
    li: list  # scalar 0/1 per respondent
    res: list
    chosen: list  # np.ndarray (J,), values in {0, 1, 2}

    def __post_init__(self):
        fields = (self.at, self.td, self.fee, self.li, self.res, self.chosen)
        if len({len(f) for f in fields}) != 1:
            raise ValueError("respondent field lengths disagree")
        for i in range(len(self.at)):
            shape = self.at[i].shape
            if len(shape) != 2 or shape[1] != 3:
                raise ValueError(f"respondent {i}: need attributes per 3 alternatives")
            if self.td[i].shape != shape or self.fee[i].shape != shape:
                raise ValueError(f"respondent {i}: attribute shapes disagree")
            ch = self.chosen[i]
            if ch.shape != (shape[0],) or not np.isin(ch, (0, 1, 2)).all():
                raise ValueError(f"respondent {i}: exactly one chosen alternative "
                                 "index in 0..2 per scenario")

    @property
    def n(self):
        return len(self.at)


def _log_softmax_chosen(utilities, chosen):
    lse = adiff.log_sum_exp(adiff.log_sum_exp(utilities[0], utilities[1]), utilities[2])
    return utilities[chosen] - lse


def _log_prior_global_factory(d_l):
    """Transformed hierarchical prior on (beta, vech(C*), log a)."""
    n_beta = 5
    n_chol = d_l * (d_l + 1) // 2
    df = NU + d_l - 1.0
    elim = linalg.elimination(d_l)
    comm = linalg.commutation(d_l)
    i_plus_k = Matrix_from_numpy(np.eye(d_l * d_l) + comm)
    elim_m = Matrix_from_numpy(elim)
    elim_t = Matrix_from_numpy(elim.T)
    log_gamma_p = float(
        d_l * (d_l - 1) / 4.0 * math.log(math.pi)
        + sum(math.lgamma(df / 2.0 - 0.5 * j) for j in range(d_l))
    )

    def log_prior_global(theta_g):
        beta = theta_g[:n_beta]
        cstar = linalg.unvech(theta_g[n_beta : n_beta + n_chol], d_l)
        log_a = theta_g[n_beta + n_chol :]
        c = linalg.star_inverse(cstar)
        c_diag = c.diagonal()
        a_vals = [adiff.exp(la) for la in log_a]

        # beta ~ N(0, sigma^2 I)
        total = -0.5 * n_beta * (LOG_2PI + math.log(SIGMA_SQ))
        for bk in beta:
            total = total - bk * bk / (2.0 * SIGMA_SQ)

        # Omega = CC' | a ~ Wishart(df, diag(1 / (2 nu a_l)))
        # log det Omega = 2 sum log C_ll; tr(V^-1 Omega) = sum 2 nu a_l Omega_ll
        log_det_omega = 0.0
        for dk in c_diag:
            log_det_omega = log_det_omega + 2.0 * adiff.log(dk)
        trace_term = 0.0
        for l in range(d_l):
            omega_ll = 0.0
            for k in range(l + 1):
                clk = c[l, k]
                omega_ll = omega_ll + clk * clk
            trace_term = trace_term + 2.0 * NU * a_vals[l] * omega_ll
        log_det_v = 0.0
        for l in range(d_l):
            log_det_v = log_det_v - (adiff.log(a_vals[l]) + math.log(2.0 * NU))
        total = (
            total
            + 0.5 * (df - d_l - 1.0) * log_det_omega
            - 0.5 * trace_term
            - 0.5 * df * d_l * math.log(2.0)
            - 0.5 * df * log_det_v
            - log_gamma_p
        )

        # Jacobian of vech(Omega) w.r.t. vech(C*):
        # |det(L (I + K) (C kron I) L')| * prod C_ll
        c_kron = linalg.kron_identity_right(c.to_matrix(), d_l)
        jac = elim_m.matmul(i_plus_k).matmul(c_kron).matmul(elim_t)
        det = linalg.det_generic(jac)
        total = total + adiff.log(abs_generic(det))
        for dk in c_diag:
            total = total + adiff.log(dk)

        # a_l ~ Gamma(1/2, 1/A^2) with log transform Jacobian
        rate = 1.0 / (A_SCALE * A_SCALE)
        for la, a in zip(log_a, a_vals):
            total = (
                total
                + la
                + 0.5 * math.log(rate)
                - math.lgamma(0.5)
                - 0.5 * adiff.log(a)
                - rate * a
            )
        return total

    return log_prior_global


def Matrix_from_numpy(arr):
    return linalg.Matrix(arr.shape[0], arr.shape[1], [float(v) for v in arr.ravel()])


def abs_generic(x):
    return -x if adiff.value(x) < 0.0 else x


def mmnl_model(data: PanelChoiceData):
    """Build the hierarchical model for a panel choice dataset."""
    n = data.n
    d_l = 3
    log_prior_global = _log_prior_global_factory(d_l)

    at = [a.tolist() for a in data.at]
    td = [a.tolist() for a in data.td]
    fee = [a.tolist() for a in data.fee]
    li = [float(v) for v in data.li]
    res = [float(v) for v in data.res]
    chosen = [c.astype(int).tolist() for c in data.chosen]

    def log_h_local(i, b_i, theta_g):
        beta = theta_g[:5]
        c = linalg.star_inverse(linalg.unvech(theta_g[5:11], d_l))
        total = 0.0
        for j in range(len(chosen[i])):
            utilities = []
            for t in range(3):
                a_jt = at[i][j][t]
                t_jt = td[i][j][t]
                f_jt = fee[i][j][t]
                u = (
                    a_jt * (beta[0] + b_i[0])
                    + t_jt * (beta[1] + b_i[1])
                    + f_jt * (beta[2] + b_i[2])
                    + (li[i] * f_jt) * beta[3]
                    + (res[i] * f_jt) * beta[4]
                )
                utilities.append(u)
            total = total + _log_softmax_chosen(utilities, chosen[i][j])
        # b ~ N(0, Sigma) with Sigma^-1 = CC'
        half = c.to_matrix().transpose_matvec(b_i)  # C' b
        total = total - 0.5 * d_l * LOG_2PI - 0.5 * linalg.sq_norm(half)
        for dk in c.diagonal():
            total = total + adiff.log(dk)
        return total

    signature = ModelSignature(
        n=n,
        d=14,
        d_i=(3,) * n,
        global_names=GLOBAL_NAMES,
        local_names=("b_at", "b_td", "b_fee"),
    )
    return HierarchicalModel(
        signature=signature,
        log_prior_global=log_prior_global,
        log_h_local=log_h_local,
        kind="mmnl",
        extra={
            "data": data,
            "cstar_slice": (5, 11),
            "cstar_dim": 3,
            "cstar_is_precision": True,
        },
    )


def simulate_mmnl(n, beta, chol_precision, seed, n_scenarios=8):
    """Simulated dataset from the generative process.

    Attributes at/td are uniform on [0, 2], fees uniform on [0, 3] with
    the first alternative free (fee 0), li/res Bernoulli(1/2), and
    b_i ~ N(0, (CC')^-1) for the supplied precision Cholesky factor.
    """
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (5,):
        raise ValueError("beta must have 5 entries")
    chol_precision = np.asarray(chol_precision, dtype=float)
    if chol_precision.shape != (3, 3):
        raise ValueError("chol_precision must be 3x3 lower triangular")
    sigma = np.linalg.inv(chol_precision @ chol_precision.T)
    chol_sigma = np.linalg.cholesky(sigma)
    ats, tds, fees, lis, ress, chs = [], [], [], [], [], []
    for _ in range(n):
        at = rng.uniform(0.0, 2.0, size=(n_scenarios, 3))
        td = rng.uniform(0.0, 2.0, size=(n_scenarios, 3))
        fee = rng.uniform(0.0, 3.0, size=(n_scenarios, 3))
        fee[:, 0] = 0.0
        li_i = float(rng.random() < 0.5)
        res_i = float(rng.random() < 0.5)
        b = chol_sigma @ rng.standard_normal(3)
        u = (
            at * (beta[0] + b[0])
            + td * (beta[1] + b[1])
            + fee * (beta[2] + b[2])
            + li_i * fee * beta[3]
            + res_i * fee * beta[4]
        )
        p = np.exp(u - u.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        ch = np.array([rng.choice(3, p=row) for row in p])
        ats.append(at)
        tds.append(td)
        fees.append(fee)
        lis.append(li_i)
        ress.append(res_i)
        chs.append(ch)
    return PanelChoiceData(at=ats, td=tds, fee=fees, li=lis, res=ress, chosen=chs)
