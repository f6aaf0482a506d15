"""Shared plumbing for the figure scripts: CSV loading with schema
validation and Gaussian kernel density estimation.

The scripts only visualize CSV contents; every statistic they draw was
computed upstream and read verbatim from the documented schemas:

    marginals.csv      variant,coordinate,source,mean,sd,skewness
    ks.csv             variant,coordinate,ks_statistic,p_value
    derived_sigma.csv  variant,quantity,source,mean,sd
    elbo_trace.csv     variant,iteration,elbo
    *_draws.csv        one labeled column per posterior coordinate
"""

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np


class SchemaError(Exception):
    pass


def load_table(path, required):
    """Rows of a CSV as a list of dicts; missing columns are an error."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing column(s) {', '.join(missing)}; "
                f"found {', '.join(header) or '(empty file)'}"
            )
        return list(reader)


def load_draws(path):
    """Labeled draw matrix: (column labels, float array of shape (n, k))."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        labels = next(reader, None)
        if not labels:
            raise SchemaError(f"{path}: missing header row")
        rows = [[float(v) for v in row] for row in reader]
    if not rows:
        raise SchemaError(f"{path}: no draws")
    return labels, np.asarray(rows)


def silverman_bandwidth(x):
    """Silverman's rule of thumb: 0.9 min(sd, IQR/1.34) n^{-1/5}."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    sd = x.std()
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread == 0.0:
        spread = max(abs(x[0]), 1.0) * 1e-3  # degenerate sample
    return 0.9 * spread * n ** (-0.2)


def kde_curve(x, n_points=400, pad=3.0):
    """Gaussian KDE evaluated on an equispaced grid spanning the data."""
    x = np.asarray(x, dtype=float)
    bw = silverman_bandwidth(x)
    grid = np.linspace(x.min() - pad * bw, x.max() + pad * bw, n_points)
    z = (grid[:, None] - x[None, :]) / bw
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(x) * bw * math.sqrt(2 * math.pi))
    return grid, dens


def make_parser(description):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="directory with the run's CSV artifacts")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the rendered images")
    return parser


def run(main, argv=None):
    """Script entry wrapper: schema problems exit 2 with a clear message."""
    try:
        main(argv)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    sys.exit(0)
