"""Scatter panels of fitted-vs-oracle marginal statistics.

Reads marginals.csv from --in DIR and renders one panel per statistic
(mean, sd, skewness): fitted values on the y axis, oracle values on the
x axis, one marker family per variant, with the identity line as the
reference ("close to the diagonal" is the success picture).
Writes local_scatter.png.
"""

import sys
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from _common import load_table, make_parser, run

STATS = ("mean", "sd", "skewness")


def scatter_points(rows):
    """Per-variant paired (oracle, fitted) values for each statistic.

    Returns {stat: {variant: (oracle array, fitted array)}}; coordinates
    present for only one source are skipped.
    """
    table = {}
    for row in rows:
        key = (row["variant"], row["coordinate"])
        table.setdefault(key, {})[row["source"]] = row
    out = {stat: {} for stat in STATS}
    for (variant, _), sources in sorted(table.items()):
        if "vi" not in sources or "oracle" not in sources:
            continue
        for stat in STATS:
            xs, ys = out[stat].setdefault(variant, ([], []))
            xs.append(float(sources["oracle"][stat]))
            ys.append(float(sources["vi"][stat]))
    return {
        stat: {v: (np.array(xs), np.array(ys)) for v, (xs, ys) in per.items()}
        for stat, per in out.items()
    }


def render(points):
    fig, axes = plt.subplots(1, len(STATS), figsize=(4 * len(STATS), 3.6))
    for ax, stat in zip(axes, STATS):
        per_variant = points[stat]
        allvals = [v for pair in per_variant.values() for arr in pair for v in arr]
        if not allvals:
            warnings.warn("no paired rows to plot; rendering empty axes")
            lo, hi = -1.0, 1.0
        else:
            lo, hi = min(allvals), max(allvals)
            margin = 0.05 * (hi - lo or 1.0)
            lo, hi = lo - margin, hi + margin
        ax.plot([lo, hi], [lo, hi], "k-", lw=0.8)
        for k, (variant, (xs, ys)) in enumerate(sorted(per_variant.items())):
            ax.plot(xs, ys, "o", ms=4, color=f"C{k}", label=variant, alpha=0.8)
        ax.set_xlim(lo, hi)
        ax.set_ylim(lo, hi)
        ax.set_xlabel(f"oracle {stat}")
        ax.set_ylabel(f"fitted {stat}")
        ax.set_aspect("equal")
    if axes[0].get_legend_handles_labels()[0]:
        axes[0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def main(argv=None):
    args = make_parser(__doc__).parse_args(argv)
    rows = load_table(
        Path(args.in_dir) / "marginals.csv",
        ["variant", "coordinate", "source", "mean", "sd", "skewness"],
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig = render(scatter_points(rows))
    target = out_dir / "local_scatter.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    print(f"wrote {target}")


if __name__ == "__main__":
    run(main, sys.argv[1:])
