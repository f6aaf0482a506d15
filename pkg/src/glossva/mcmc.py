"""Adaptive random-walk Metropolis oracle for desk-scale validation.

Gaussian proposals on the full unconstrained theta; the proposal scale
is adapted during burn-in by Robbins-Monro on the log scale toward a
target acceptance rate, then frozen so the retained chain targets the
exact posterior kernel.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import HierarchicalModel


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 50_000
    burn_in: int = 10_000
    thinning: int = 1
    target_acceptance: float = 0.234
    adaptation_window: int = 50
    seed: int = 0
    initial_scale: float = 0.1

    def __post_init__(self):
        if self.burn_in >= self.iterations:
            raise ValueError("burn-in must be smaller than iterations")
        if self.thinning < 1 or self.adaptation_window < 1:
            raise ValueError("thinning and adaptation window must be >= 1")


@dataclass
class ChainOutput:
    draws: np.ndarray  # retained draws, one row per kept iteration
    acceptance_trace: list  # (iteration, window acceptance rate)
    ess: np.ndarray  # effective sample size per coordinate
    final_scale: float
    labels: list

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.labels)
            writer.writerows(self.draws.tolist())


SCALE_FLOOR = 1e-8


def run_mcmc(model: HierarchicalModel, config: McmcConfig) -> ChainOutput:
    dim = model.signature.dim_total
    rng = np.random.default_rng(config.seed)
    theta = np.zeros(dim)
    log_h = _log_h(model, theta)
    if not math.isfinite(log_h):
        raise ValueError("log kernel is not finite at the zero initialization")

    log_scale = math.log(config.initial_scale)
    kept = []
    acc_trace = []
    window_acc = 0
    window_count = 0
    window_index = 0
    for it in range(1, config.iterations + 1):
        proposal = theta + math.exp(log_scale) * rng.standard_normal(dim)
        log_h_prop = _log_h(model, proposal)
        if math.log(rng.random()) < log_h_prop - log_h:
            theta = proposal
            log_h = log_h_prop
            window_acc += 1
        window_count += 1
        if window_count == config.adaptation_window:
            rate = window_acc / window_count
            acc_trace.append((it, rate))
            if it <= config.burn_in:
                window_index += 1
                log_scale += (rate - config.target_acceptance) / math.sqrt(
                    window_index
                )
                if math.exp(log_scale) < SCALE_FLOOR:
                    log_scale = math.log(SCALE_FLOOR)
                    warnings.warn("proposal scale hit its floor; target may be "
                                  "degenerate")
            window_acc = 0
            window_count = 0
        if it > config.burn_in and (it - config.burn_in) % config.thinning == 0:
            kept.append(theta.copy())

    draws = np.array(kept)
    return ChainOutput(
        draws=draws,
        acceptance_trace=acc_trace,
        ess=np.array([effective_sample_size(draws[:, j]) for j in range(dim)]),
        final_scale=math.exp(log_scale),
        labels=model.signature.theta_labels(),
    )


def _log_h(model, theta):
    from .adiff import TraceInvalidError

    try:
        return float(model.log_h_joint(list(theta)))
    except TraceInvalidError:
        return -math.inf


def effective_sample_size(x):
    """ESS via Geyer's initial positive sequence on FFT autocorrelations."""
    n = len(x)
    if n < 4:
        return float(max(n, 1))
    x = np.asarray(x, dtype=float) - np.mean(x)
    var = np.dot(x, x) / n
    if var == 0.0:
        return 1.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(f * np.conj(f))[:n].real / (n * var)
    # sum of adjacent pairs, truncated at the first negative pair
    tau = acf[0]
    for k in range(1, n // 2):
        pair = acf[2 * k - 1] + acf[2 * k]
        if pair < 0.0:
            break
        tau += 2.0 * pair
    return float(max(n / max(tau, 1.0), 1.0))


def summarize(draws):
    """Per-coordinate mean, sd, and (biased) skewness of a chain."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] < 10:
        raise ValueError("need at least 10 draws to summarize")
    mean = draws.mean(axis=0)
    centered = draws - mean
    sd = np.sqrt((centered**2).mean(axis=0))
    skew = np.full(draws.shape[1], np.nan)
    ok = sd > 0
    skew[ok] = (centered[:, ok] ** 3).mean(axis=0) / sd[ok] ** 3
    if not ok.all():
        warnings.warn("degenerate coordinate(s): skewness undefined for sd = 0")
    return mean, sd, skew
