"""Comparison of variational draws against oracle draws.

Produces per-coordinate marginal moments and skewness, two-sample
Kolmogorov-Smirnov statistics, and derived random-effects covariance
summaries (variances, covariances, pairwise correlations computed per
draw from the Cholesky coordinates, then summarized).

CSV schemas (column order is part of the contract for the plotting
component):

    marginals.csv      variant,coordinate,source,mean,sd,skewness
    ks.csv             variant,coordinate,ks_statistic,p_value
    derived_sigma.csv  variant,quantity,source,mean,sd
    elbo_trace.csv     variant,iteration,elbo
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .mcmc import summarize

MARGINALS_HEADER = ["variant", "coordinate", "source", "mean", "sd", "skewness"]
KS_HEADER = ["variant", "coordinate", "ks_statistic", "p_value"]
SIGMA_HEADER = ["variant", "quantity", "source", "mean", "sd"]
TRACE_HEADER = ["variant", "iteration", "elbo"]


@dataclass
class ComparisonReport:
    marginals: list = field(default_factory=list)  # rows per MARGINALS_HEADER
    ks: list = field(default_factory=list)
    derived_sigma: list = field(default_factory=list)
    elbo_trace: list = field(default_factory=list)


def derived_sigma_draws(draws, cstar_slice, cstar_dim, is_precision):
    """Per-draw variances, covariances, and correlations of the
    random-effects covariance implied by the vech(C*) coordinates."""
    lo, hi = cstar_slice
    coords = np.asarray(draws)[:, lo:hi]
    p = cstar_dim
    rows_idx, cols_idx = [], []
    for j in range(p):
        for i in range(j, p):
            rows_idx.append(i)
            cols_idx.append(j)
    out = {}
    n_draws = coords.shape[0]
    sigmas = np.empty((n_draws, p, p))
    for k in range(n_draws):
        c = np.zeros((p, p))
        c[rows_idx, cols_idx] = coords[k]
        c[np.diag_indices(p)] = np.exp(np.diag(c))
        if is_precision:
            omega = c @ c.T
            sigma = np.linalg.inv(omega)
        else:
            sigma = c @ c.T
        sigmas[k] = sigma
    for i in range(p):
        out[f"var[{i}]"] = sigmas[:, i, i]
    for i in range(p):
        for j in range(i):
            out[f"cov[{i},{j}]"] = sigmas[:, i, j]
            denom = np.sqrt(sigmas[:, i, i] * sigmas[:, j, j])
            out[f"corr[{i},{j}]"] = sigmas[:, i, j] / denom
    return out


def compare(
    vi_draws,
    oracle_draws,
    labels,
    variant="VI",
    cstar_slice=None,
    cstar_dim=None,
    cstar_is_precision=False,
    elbo_trace=None,
) -> ComparisonReport:
    """All marginal and derived statistics for one variant."""
    vi_draws = np.asarray(vi_draws, dtype=float)
    oracle_draws = np.asarray(oracle_draws, dtype=float)
    if vi_draws.shape[1] != len(labels) or oracle_draws.shape[1] != len(labels):
        raise ValueError("draw matrices do not match the coordinate labels")
    report = ComparisonReport()
    for source, draws in (("vi", vi_draws), ("oracle", oracle_draws)):
        mean, sd, skew = summarize(draws)
        for j, label in enumerate(labels):
            report.marginals.append(
                [variant, label, source, mean[j], sd[j], skew[j]]
            )
    for j, label in enumerate(labels):
        ks = stats.ks_2samp(vi_draws[:, j], oracle_draws[:, j])
        report.ks.append([variant, label, float(ks.statistic), float(ks.pvalue)])
    if cstar_slice is not None:
        for source, draws in (("vi", vi_draws), ("oracle", oracle_draws)):
            derived = derived_sigma_draws(
                draws, cstar_slice, cstar_dim, cstar_is_precision
            )
            for name, values in derived.items():
                report.derived_sigma.append(
                    [variant, name, source, float(values.mean()), float(values.std())]
                )
    if elbo_trace is not None:
        for iteration, value in elbo_trace:
            report.elbo_trace.append([variant, iteration, value])
    return report


def merge_reports(reports):
    merged = ComparisonReport()
    for r in reports:
        merged.marginals.extend(r.marginals)
        merged.ks.extend(r.ks)
        merged.derived_sigma.extend(r.derived_sigma)
        merged.elbo_trace.extend(r.elbo_trace)
    return merged


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def export_report(report: ComparisonReport, out_dir):
    """Write the four CSV artifacts; overwrites existing files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / "marginals.csv", MARGINALS_HEADER, report.marginals)
    _write(out_dir / "ks.csv", KS_HEADER, report.ks)
    _write(out_dir / "derived_sigma.csv", SIGMA_HEADER, report.derived_sigma)
    _write(out_dir / "elbo_trace.csv", TRACE_HEADER, report.elbo_trace)
    return [
        out_dir / name
        for name in ("marginals.csv", "ks.csv", "derived_sigma.csv", "elbo_trace.csv")
    ]


def load_report(out_dir) -> ComparisonReport:
    """Round-trip loader for exported reports."""
    out_dir = Path(out_dir)
    report = ComparisonReport()
    casts = {
        "marginals.csv": (MARGINALS_HEADER, report.marginals, [str, str, str, float, float, float]),
        "ks.csv": (KS_HEADER, report.ks, [str, str, float, float]),
        "derived_sigma.csv": (SIGMA_HEADER, report.derived_sigma, [str, str, str, float, float]),
        "elbo_trace.csv": (TRACE_HEADER, report.elbo_trace, [str, int, float]),
    }
    for name, (header, rows, types) in casts.items():
        with (out_dir / name).open(newline="") as fh:
            reader = csv.reader(fh)
            got = next(reader)
            if got != header:
                raise ValueError(f"{name}: unexpected header {got}")
            for row in reader:
                rows.append([t(v) for t, v in zip(types, row)])
    return report
