"""Random-effects covariance summary grid.

Reads derived_sigma.csv from --in DIR and lays the quantities out on a
p x p grid: variances on the diagonal, covariances below it, pairwise
correlations above it. Each cell shows the fitted and oracle means with
one-sd error bars, one bar pair per variant. Writes sigma_grid.png.
"""

import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from _common import SchemaError, load_table, make_parser, run

QUANTITY = re.compile(r"^(var|cov|corr)\[(\d+)(?:,(\d+))?\]$")


def grid_layout(rows):
    """{(i, j): {variant: {source: (mean, sd)}}} plus the dimension p."""
    cells = {}
    p = 0
    for row in rows:
        match = QUANTITY.match(row["quantity"])
        if not match:
            raise SchemaError(
                f"derived_sigma.csv: unrecognized quantity {row['quantity']!r}"
            )
        kind, i, j = match.group(1), int(match.group(2)), match.group(3)
        j = i if j is None else int(j)
        # variances (i, i); covariances below; correlations mirrored above
        pos = (i, i) if kind == "var" else ((i, j) if kind == "cov" else (j, i))
        p = max(p, i + 1, j + 1)
        cells.setdefault(pos, {}).setdefault(row["variant"], {})[row["source"]] = (
            float(row["mean"]), float(row["sd"])
        )
    return cells, p


def render(cells, p):
    fig, axes = plt.subplots(p, p, figsize=(3 * p, 2.4 * p), squeeze=False)
    styles = {"vi": ("C0", "fitted"), "oracle": ("k", "oracle")}
    for i in range(p):
        for j in range(p):
            ax = axes[i][j]
            per_variant = cells.get((i, j))
            if per_variant is None:
                ax.set_axis_off()
                continue
            variants = sorted(per_variant)
            for k, variant in enumerate(variants):
                for off, source in ((-0.15, "vi"), (0.15, "oracle")):
                    if source not in per_variant[variant]:
                        continue
                    mean, sd = per_variant[variant][source]
                    color, label = styles[source]
                    ax.errorbar([k + off], [mean], yerr=[sd], fmt="o",
                                ms=4, color=color, capsize=3,
                                label=label if k == 0 else None)
            kind = "var" if i == j else ("cov" if i > j else "corr")
            pair = f"[{i}]" if i == j else f"[{max(i, j)},{min(i, j)}]"
            ax.set_title(f"{kind}{pair}", fontsize=9)
            ax.set_xticks(range(len(variants)))
            ax.set_xticklabels(variants, rotation=45, fontsize=7)
    if axes[0][0].get_legend_handles_labels()[0]:
        axes[0][0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def main(argv=None):
    args = make_parser(__doc__).parse_args(argv)
    rows = load_table(
        Path(args.in_dir) / "derived_sigma.csv",
        ["variant", "quantity", "source", "mean", "sd"],
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if rows:
        cells, p = grid_layout(rows)
    else:
        cells, p = {}, 1
    fig = render(cells, p)
    target = out_dir / "sigma_grid.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    print(f"wrote {target}")


if __name__ == "__main__":
    run(main, sys.argv[1:])
