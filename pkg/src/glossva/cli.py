"""Config-driven command line: fit variants, run the oracle sampler,
draw from fitted approximations, and produce comparison reports.

Subcommands:

    fit      --config FILE [--seed N] [--out DIR] [--variants NAME ...]
    mcmc     --config FILE [--seed N] [--out DIR]
    sample   --config FILE --params LAMBDA.json --count N [--seed N] --out FILE
    compare  --config FILE [--seed N] [--out DIR] [--variants NAME ...]

Configuration is TOML.  Unknown keys anywhere in the file are hard
errors.  Flags override the corresponding config values.  The env var
GLOSS_THREADS caps the number of concurrently fitted variants.

Config schema::

    out = "runs/toy"          # output directory
    seed = 1                  # default seed for all sections

    [model]
    kind = "logistic"         # logistic | poisson | mmnl | linear_gaussian
    data = "wheeze.csv"       # CSV path, or use [model.simulate]
    prior = "normal_theta"    # logistic only: normal_theta | huang_wand

    [model.simulate]          # kind-specific generative settings
    n = 20
    n_i = 4
    beta = [0.5, -0.5, 0.3, 0.0]
    eta = 0.5
    seed = 7

    [fit]
    variants = ["G-VA", "CSG-VA", "GLOSS-VA"]
    iterations = 2000
    learning_rate = 0.005
    monitor_stride = 200
    monitor_samples = 20
    samples_per_gradient = 1
    seed = 1

    [mcmc]
    iterations = 20000
    burn_in = 5000
    thinning = 2
    target_acceptance = 0.234
    adaptation_window = 50
    initial_scale = 0.1
    seed = 1

    [compare]
    draws = 2000
    seed = 1
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import compare as compare_draws
from .diagnostics import export_report, merge_reports
from .family import (
    LADDER,
    base_name,
    load_params,
    sample_matrix,
    variant_by_name,
)
from .mcmc import McmcConfig, run_mcmc
from .models import (
    linear_gaussian_model,
    load_csv,
    logistic_mixed_model,
    mmnl_model,
    poisson_mixed_model,
    simulate_linear_gaussian,
    simulate_logistic,
    simulate_mmnl,
    simulate_poisson,
)
from .train import TrainConfig, fit as train_fit

MODEL_KINDS = ("logistic", "poisson", "mmnl", "linear_gaussian")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing

_SIMULATE_KEYS = {
    "logistic": {"n", "n_i", "beta", "eta", "seed", "smoke_prob"},
    "poisson": {"n", "n_i", "beta", "chol_cov", "seed"},
    "mmnl": {"n", "beta", "chol_precision", "seed", "n_scenarios"},
    "linear_gaussian": {"n", "n_i", "seed", "tau", "sigma_b", "sigma_y"},
}

_FIT_KEYS = {
    "variants",
    "iterations",
    "learning_rate",
    "monitor_stride",
    "monitor_samples",
    "samples_per_gradient",
    "seed",
}

_MCMC_KEYS = {
    "iterations",
    "burn_in",
    "thinning",
    "target_acceptance",
    "adaptation_window",
    "initial_scale",
    "seed",
}

_COMPARE_KEYS = {"draws", "seed"}


def _check_keys(table, allowed, where):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {where}: {', '.join(sorted(unknown))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


@dataclass
class ExperimentConfig:
    model: dict
    out: Path
    seed: int
    fit: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    path: Path = None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    _check_keys(raw, {"model", "fit", "mcmc", "compare", "out", "seed"}, str(path))
    if "model" not in raw:
        raise ConfigError(f"{path}: missing required [model] table")
    model = raw["model"]
    _check_keys(model, {"kind", "data", "prior", "simulate"}, "[model]")
    kind = model.get("kind")
    if kind not in MODEL_KINDS:
        raise ConfigError(
            f"[model] kind must be one of {', '.join(MODEL_KINDS)}, got {kind!r}"
        )
    if ("data" in model) == ("simulate" in model):
        raise ConfigError("[model] needs exactly one of `data` or [model.simulate]")
    if "simulate" in model:
        _check_keys(model["simulate"], _SIMULATE_KEYS[kind], "[model.simulate]")
    if "prior" in model and kind != "logistic":
        raise ConfigError("[model] `prior` applies to the logistic kind only")
    for section, allowed in (
        ("fit", _FIT_KEYS),
        ("mcmc", _MCMC_KEYS),
        ("compare", _COMPARE_KEYS),
    ):
        if section in raw:
            _check_keys(raw[section], allowed, f"[{section}]")
    for name in raw.get("fit", {}).get("variants", []):
        variant_by_name(name)  # raises on unknown names
    return ExperimentConfig(
        model=model,
        out=Path(raw.get("out", "out")),
        seed=int(raw.get("seed", 0)),
        fit=raw.get("fit", {}),
        mcmc=raw.get("mcmc", {}),
        compare=raw.get("compare", {}),
        raw=raw,
        path=path,
    )


def build_model(config: ExperimentConfig):
    model = config.model
    kind = model["kind"]
    if "data" in model:
        base = config.path.parent if config.path else Path(".")
        data_path = Path(model["data"])
        if not data_path.is_absolute():
            data_path = base / data_path
        if kind == "linear_gaussian":
            raise ConfigError("linear_gaussian supports [model.simulate] only")
        data = load_csv(data_path, kind)
    else:
        sim = dict(model["simulate"])
        sim.setdefault("seed", config.seed)
        if kind == "logistic":
            data = simulate_logistic(**sim)
        elif kind == "poisson":
            data = simulate_poisson(**sim)
        elif kind == "mmnl":
            data = simulate_mmnl(**sim)
        else:
            data = simulate_linear_gaussian(**sim)
    if kind == "logistic":
        return logistic_mixed_model(data, prior=model.get("prior", "normal_theta"))
    if kind == "poisson":
        return poisson_mixed_model(data)
    if kind == "mmnl":
        return mmnl_model(data)
    return linear_gaussian_model(data)


def train_config(config: ExperimentConfig) -> TrainConfig:
    fit = config.fit
    return TrainConfig(
        iterations=int(fit.get("iterations", 150_000)),
        learning_rate=float(fit.get("learning_rate", 1e-3)),
        seed=int(fit.get("seed", config.seed)),
        monitor_stride=int(fit.get("monitor_stride", 500)),
        monitor_samples=int(fit.get("monitor_samples", 20)),
        samples_per_gradient=int(fit.get("samples_per_gradient", 1)),
    )


def mcmc_config(config: ExperimentConfig) -> McmcConfig:
    mcmc = config.mcmc
    return McmcConfig(
        iterations=int(mcmc.get("iterations", 50_000)),
        burn_in=int(mcmc.get("burn_in", 10_000)),
        thinning=int(mcmc.get("thinning", 1)),
        target_acceptance=float(mcmc.get("target_acceptance", 0.234)),
        adaptation_window=int(mcmc.get("adaptation_window", 50)),
        seed=int(mcmc.get("seed", config.seed)),
        initial_scale=float(mcmc.get("initial_scale", 0.1)),
    )


def worker_count(n_jobs):
    """Worker cap from GLOSS_THREADS; defaults to serial execution."""
    raw = os.environ.get("GLOSS_THREADS", "1")
    try:
        cap = max(1, int(raw))
    except ValueError:
        raise ConfigError(f"GLOSS_THREADS must be an integer, got {raw!r}")
    return max(1, min(n_jobs, cap))


def variant_dirname(name):
    return name.replace("^", "_")


def write_manifest(out_dir, command, config: ExperimentConfig, extra):
    payload = {
        "command": command,
        "config_file": str(config.path) if config.path else None,
        "config": config.raw,
        "seed": config.seed,
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    payload.update(extra)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "manifest.json").open("w") as fh:
        json.dump(payload, fh, indent=1, default=str)


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(config: ExperimentConfig, variants=None, log=print):
    model = build_model(config)
    tconf = train_config(config)
    variants = list(variants or config.fit.get("variants", LADDER))
    for name in variants:
        variant_by_name(name)

    bases = sorted({base_name(name) for name in variants})
    t0 = time.perf_counter()

    def fit_base(name):
        log(f"fitting {name} ({tconf.iterations} iterations)")
        return name, train_fit(model, name, tconf)

    with ThreadPoolExecutor(max_workers=worker_count(len(bases))) as pool:
        base_fits = dict(pool.map(fit_base, bases))

    results = {}
    for name in variants:
        base = base_fits[base_name(name)]
        results[name] = base if name == base.variant else replace(base, variant=name)
        sub = config.out / variant_dirname(name)
        results[name].save(sub)
        log(f"{name}: final ELBO {results[name].final_elbo:.4f} -> {sub}")

    write_manifest(
        config.out,
        "fit",
        config,
        {
            "variants": {name: variant_dirname(name) for name in variants},
            "wall_clock_seconds": time.perf_counter() - t0,
            "per_variant_seconds": {
                name: results[name].wall_clock for name in variants
            },
        },
    )
    return results


def cmd_mcmc(config: ExperimentConfig, log=print):
    model = build_model(config)
    mconf = mcmc_config(config)
    log(f"running oracle chain ({mconf.iterations} iterations)")
    t0 = time.perf_counter()
    chain = run_mcmc(model, mconf)
    config.out.mkdir(parents=True, exist_ok=True)
    chain.export_csv(config.out / "mcmc_draws.csv")
    summary = {
        "retained_draws": int(chain.draws.shape[0]),
        "min_ess": float(chain.ess.min()),
        "final_scale": chain.final_scale,
        "acceptance_tail": chain.acceptance_trace[-5:],
    }
    with (config.out / "mcmc_summary.json").open("w") as fh:
        json.dump(summary, fh, indent=1)
    write_manifest(
        config.out,
        "mcmc",
        config,
        {"wall_clock_seconds": time.perf_counter() - t0, "mcmc": summary},
    )
    log(f"kept {summary['retained_draws']} draws, min ESS {summary['min_ess']:.1f}")
    return chain


def cmd_sample(config: ExperimentConfig, params_file, count, seed, out_file, log=print):
    model = build_model(config)
    params, meta = load_params(params_file)
    if params.signature != model.signature:
        raise ConfigError(
            "lambda file signature does not match the configured model"
        )
    name = meta.get("variant")
    if name is None:
        raise ConfigError("lambda file metadata does not record a variant")
    variant = variant_by_name(name)
    draws = sample_matrix(model, params, variant, count, seed)
    out_file = Path(out_file)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with out_file.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(model.signature.theta_labels())
        writer.writerows(draws.tolist())
    log(f"wrote {count} draws from {name} to {out_file}")
    return draws


def cmd_compare(config: ExperimentConfig, variants=None, log=print):
    model = build_model(config)
    variants = list(variants or config.fit.get("variants", LADDER))
    t0 = time.perf_counter()

    # reuse existing artifacts, produce missing ones
    missing = [
        name
        for name in variants
        if not (config.out / variant_dirname(name) / "lambda.json").exists()
    ]
    if missing:
        cmd_fit(config, variants=variants, log=log)
    draws_file = config.out / "mcmc_draws.csv"
    if not draws_file.exists():
        cmd_mcmc(config, log=log)
    oracle = np.loadtxt(draws_file, delimiter=",", skiprows=1, ndmin=2)

    n_draws = int(config.compare.get("draws", 2000))
    seed = int(config.compare.get("seed", config.seed))
    labels = model.signature.theta_labels()
    reports = []
    for name in variants:
        sub = config.out / variant_dirname(name)
        params, _ = load_params(sub / "lambda.json")
        vi = sample_matrix(model, params, variant_by_name(name), n_draws, seed)
        trace = []
        with (sub / "trace.csv").open(newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            trace = [(int(r[0]), float(r[1])) for r in reader]
        reports.append(
            compare_draws(
                vi,
                oracle,
                labels,
                variant=name,
                cstar_slice=model.extra.get("cstar_slice"),
                cstar_dim=model.extra.get("cstar_dim"),
                cstar_is_precision=model.extra.get("cstar_is_precision", False),
                elbo_trace=trace,
            )
        )
        log(f"compared {name} ({n_draws} draws vs {oracle.shape[0]} oracle draws)")
    report_dir = config.out / "report"
    files = export_report(merge_reports(reports), report_dir)
    write_manifest(
        report_dir,
        "compare",
        config,
        {
            "variants": variants,
            "draws": n_draws,
            "wall_clock_seconds": time.perf_counter() - t0,
        },
    )
    log(f"report written to {report_dir}")
    return files


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="glossva",
        description="Fit skew-corrected structured variational approximations "
        "to hierarchical models and compare them against an MCMC oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")

    p_fit = sub.add_parser("fit", help="fit the configured variants")
    common(p_fit)
    p_fit.add_argument("--variants", nargs="+", default=None, metavar="NAME")

    p_mcmc = sub.add_parser("mcmc", help="run the oracle chain")
    common(p_mcmc)

    p_sample = sub.add_parser("sample", help="draw from a fitted approximation")
    common(p_sample)
    p_sample.add_argument("--params", required=True, help="lambda.json from a fit")
    p_sample.add_argument("--count", type=int, required=True)

    p_cmp = sub.add_parser("compare", help="fit/oracle comparison report")
    common(p_cmp)
    p_cmp.add_argument("--variants", nargs="+", default=None, metavar="NAME")
    return parser


def _apply_overrides(config: ExperimentConfig, args):
    if args.seed is not None:
        config.seed = args.seed
        config.fit = {**config.fit, "seed": args.seed}
        config.mcmc = {**config.mcmc, "seed": args.seed}
        config.compare = {**config.compare, "seed": args.seed}
    if args.out is not None:
        config.out = Path(args.out)
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = _apply_overrides(load_config(args.config), args)
        if args.command == "fit":
            cmd_fit(config, variants=args.variants)
        elif args.command == "mcmc":
            cmd_mcmc(config)
        elif args.command == "sample":
            if args.out is None:
                raise ConfigError("sample requires --out FILE for the draws CSV")
            cmd_sample(
                config,
                args.params,
                args.count,
                args.seed if args.seed is not None else config.seed,
                args.out,
            )
        else:
            cmd_compare(config, variants=args.variants)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
