"""Marginal density overlays: per-variant KDE of sampled draws against
the oracle draws, one panel per posterior coordinate.

Expects in --in DIR: mcmc_draws.csv plus one or more <name>_draws.csv
files with matching column labels. Writes marginals_<name>.png each.
"""

import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from _common import SchemaError, kde_curve, load_draws, make_parser, run


def variant_draw_files(in_dir):
    files = sorted(
        p for p in Path(in_dir).glob("*_draws.csv") if p.name != "mcmc_draws.csv"
    )
    if not files:
        raise SchemaError(
            f"{in_dir}: no <variant>_draws.csv files next to mcmc_draws.csv"
        )
    return files


def render(labels, vi, oracle, title):
    k = len(labels)
    cols = min(k, 3)
    rows = math.ceil(k / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows),
                             squeeze=False)
    for j, label in enumerate(labels):
        ax = axes[j // cols][j % cols]
        for draws, style, name in ((oracle[:, j], "k-", "oracle"),
                                   (vi[:, j], "C0--", "fitted")):
            grid, dens = kde_curve(draws)
            ax.plot(grid, dens, style, label=name)
        ax.set_title(label, fontsize=9)
        ax.set_yticks([])
    for j in range(k, rows * cols):
        axes[j // cols][j % cols].set_axis_off()
    axes[0][0].legend(frameon=False, fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    return fig


def main(argv=None):
    args = make_parser(__doc__).parse_args(argv)
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle_labels, oracle = load_draws(in_dir / "mcmc_draws.csv")
    for path in variant_draw_files(in_dir):
        name = path.name[: -len("_draws.csv")]
        labels, vi = load_draws(path)
        if labels != oracle_labels:
            raise SchemaError(
                f"{path}: draw columns {labels} do not match the oracle "
                f"columns {oracle_labels}"
            )
        fig = render(labels, vi, oracle, name)
        target = out_dir / f"marginals_{name}.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        print(f"wrote {target}")


if __name__ == "__main__":
    run(main, sys.argv[1:])
