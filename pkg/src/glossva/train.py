"""Stochastic gradient ascent over the packed lambda with Adam.

The optimizer is plain Adam with a fixed step size and infinity-norm
gradient clipping; one eps draw per iteration by default.  Post-hoc
skew variants are trained under their unskewed base family; the ladder
runner fits each base once and shares the parameters bitwise.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .adiff import TraceInvalidError
from .elbo import elbo_estimate, elbo_gradient
from .family import (
    LADDER,
    VariationalParams,
    base_name,
    save_params,
    stream_rng,
    variant_by_name,
    variant_name,
)
from .model import HierarchicalModel

GRAD_CLIP = 100.0  # infinity-norm clip, survives early-phase tail draws
MAX_RETRIES = 5

INIT_JITTER_SD = 0.01


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 150_000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    monitor_stride: int = 500
    monitor_samples: int = 20
    samples_per_gradient: int = 1
    restarts: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.learning_rate <= 0:
            raise ValueError("need positive iterations and learning rate")
        if self.samples_per_gradient < 1:
            raise ValueError("need samples_per_gradient >= 1")


@dataclass
class FitResult:
    params: VariationalParams
    variant: str
    trace: list  # (iteration, elbo estimate)
    wall_clock: float
    config: TrainConfig
    final_elbo: float = math.nan

    def save(self, out_dir):
        """FitResult on disk: JSON summary + lambda file + CSV trace."""
        from pathlib import Path

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_params(
            self.params,
            out_dir / "lambda.json",
            meta={"variant": self.variant, "seed": self.config.seed},
        )
        with (out_dir / "trace.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "elbo"])
            writer.writerows(self.trace)
        summary = {
            "variant": self.variant,
            "wall_clock_seconds": self.wall_clock,
            "final_elbo": self.final_elbo,
            "config": {
                "iterations": self.config.iterations,
                "learning_rate": self.config.learning_rate,
                "adam": [self.config.beta1, self.config.beta2, self.config.adam_eps],
                "seed": self.config.seed,
                "monitor_stride": self.config.monitor_stride,
                "samples_per_gradient": self.config.samples_per_gradient,
            },
        }
        with (out_dir / "fitresult.json").open("w") as fh:
            json.dump(summary, fh, indent=1)


def init_params(model: HierarchicalModel, variant, rng_seed=0) -> VariationalParams:
    """Standard-normal base family with jitter on the mean blocks."""
    sig = model.signature
    params = VariationalParams.zeros_like_signature(sig)
    rng = stream_rng(rng_seed, 0, 0)
    params.mu_g = list(rng.normal(0.0, INIT_JITTER_SD, sig.d))
    for i in range(sig.n):
        params.m[i] = list(rng.normal(0.0, INIT_JITTER_SD, sig.d_i[i]))
    return params


def fit(model: HierarchicalModel, variant, config: TrainConfig, initial=None) -> FitResult:
    """Adam ascent on the marginalized-ELBO gradient.

    `initial` warm-starts from existing parameters (e.g. a coarser fit);
    by default a fresh jittered initialization is used.
    """
    if isinstance(variant, str):
        requested = variant
        variant = variant_by_name(variant)
    else:
        requested = variant_name(variant)
    train_variant = variant.training_variant()
    sig = model.signature

    if initial is None:
        params = init_params(model, train_variant, rng_seed=config.seed)
    else:
        params = initial.copy_values()
    lam = np.array(params.pack(), dtype=float)
    frozen = VariationalParams.frozen_mask(sig, train_variant)
    m = np.zeros_like(lam)
    v = np.zeros_like(lam)
    trace = []
    t0 = time.perf_counter()
    dim_eps = sig.dim_total

    for it in range(1, config.iterations + 1):
        grads = []
        value = 0.0
        for k in range(config.samples_per_gradient):
            for attempt in range(MAX_RETRIES + 1):
                eps = stream_rng(config.seed, it, 1 + k + attempt * 4096).standard_normal(
                    dim_eps
                )
                try:
                    sample = elbo_gradient(
                        model,
                        VariationalParams.unpack(list(lam), sig),
                        train_variant,
                        eps,
                    )
                    break
                except TraceInvalidError:
                    if attempt == MAX_RETRIES:
                        raise RuntimeError(
                            f"gradient step failed {MAX_RETRIES + 1} times at "
                            f"iteration {it}"
                        )
            grads.append(sample.gradient)
            value += sample.value
        grad = np.mean(grads, axis=0)
        value /= config.samples_per_gradient
        np.clip(grad, -GRAD_CLIP, GRAD_CLIP, out=grad)

        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        m_hat = m / (1.0 - config.beta1**it)
        v_hat = v / (1.0 - config.beta2**it)
        step = config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        step[frozen] = 0.0
        lam = lam + step  # ascent

        if it % config.monitor_stride == 0 or it == config.iterations:
            est, _ = elbo_estimate(
                model,
                VariationalParams.unpack(list(lam), sig),
                variant,
                config.monitor_samples,
                seed=config.seed + 1_000_000 + it,
            )
            trace.append((it, est))

    wall = time.perf_counter() - t0
    final_params = VariationalParams.unpack(list(lam), sig)
    return FitResult(
        params=final_params,
        variant=requested,
        trace=trace,
        wall_clock=wall,
        config=config,
        final_elbo=trace[-1][1] if trace else math.nan,
    )


def run_ladder(model: HierarchicalModel, config: TrainConfig, variants=LADDER):
    """Fit every requested variant, sharing base fits with post-hoc views.

    Returns an ordered dict name -> FitResult.  Post-hoc variants reuse
    the base fit's parameters bitwise; their wall-clock is the base cost.
    """
    results = {}
    base_fits = {}
    for name in variants:
        trained = base_name(name)
        if trained not in base_fits:
            base_fits[trained] = fit(model, trained, config)
    for name in variants:
        base = base_fits[base_name(name)]
        if name == base.variant:
            results[name] = base
        else:
            results[name] = replace(base, variant=name)
    return results
