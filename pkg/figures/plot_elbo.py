"""Objective-trace figure: estimated ELBO against iteration number for
every variant in elbo_trace.csv, iteration axis on a log scale.
Writes elbo_trace.png to --out DIR.
"""

import sys
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from _common import load_table, make_parser, run


def traces(rows):
    out = {}
    for row in rows:
        out.setdefault(row["variant"], []).append(
            (int(row["iteration"]), float(row["elbo"]))
        )
    return {v: sorted(points) for v, points in out.items()}


def render(per_variant):
    fig, ax = plt.subplots(figsize=(6, 4))
    if not per_variant:
        warnings.warn("no trace rows to plot; rendering empty axes")
    for k, (variant, points) in enumerate(sorted(per_variant.items())):
        its = [it for it, _ in points]
        vals = [v for _, v in points]
        ax.plot(its, vals, color=f"C{k}", label=variant, lw=1.2)
    ax.set_xscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("estimated objective")
    if per_variant:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def main(argv=None):
    args = make_parser(__doc__).parse_args(argv)
    rows = load_table(
        Path(args.in_dir) / "elbo_trace.csv", ["variant", "iteration", "elbo"]
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig = render(traces(rows))
    target = out_dir / "elbo_trace.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    print(f"wrote {target}")


if __name__ == "__main__":
    run(main, sys.argv[1:])
