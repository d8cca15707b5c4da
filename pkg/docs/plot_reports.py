"""Render PNG figures from the CSVs written by the proxsampler CLI.

Optional helper; the CLI itself never plots. Needs matplotlib.

    python docs/plot_reports.py RUN_DIR [--out FIG_DIR]
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path: Path) -> list[dict[str, str]]:
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def plot_trace(rows: list[dict[str, str]], out: Path) -> None:
    steps = [int(r["step"]) for r in rows]
    coords = [k for k in rows[0] if k.startswith("x")]
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for k in coords:
        top.plot(steps, [float(r[k]) for r in rows], lw=0.8, label=k)
    top.set_ylabel("chain 0 state")
    top.legend(loc="upper right", fontsize="small")
    bottom.plot(steps[1:], [float(r["proposals"]) for r in rows[1:]], lw=0.8)
    bottom.set_ylabel("mean proposals")
    bottom.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(out / "trace.png", dpi=120)
    plt.close(fig)


def plot_tails(rows: list[dict[str, str]], out: Path) -> None:
    r = [float(x["r"]) for x in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(r, [float(x["empirical"]) for x in rows], "o-", label="empirical")
    ax.semilogy(r, [float(x["ci_upper"]) for x in rows], "v--", label="Wilson upper")
    ax.semilogy(r, [float(x["bound"]) for x in rows], "s-", label="bound")
    ax.set_xlabel("r")
    ax.set_ylabel("Pr(l(X) - E l(X) >= r)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "tail_report.png", dpi=120)
    plt.close(fig)


def plot_baselines(rows: list[dict[str, str]], out: Path) -> None:
    names = [x["method"] for x in rows]
    w2 = [float(x["w2"]) for x in rows]
    err = [[v - float(x["w2_lo"]) for v, x in zip(w2, rows)], [float(x["w2_hi"]) - v for v, x in zip(w2, rows)]]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(names, w2, yerr=err, capsize=4)
    ax.set_ylabel("W2 to reference")
    fig.tight_layout()
    fig.savefig(out / "baselines.png", dpi=120)
    plt.close(fig)


PLOTTERS = {"trace.csv": plot_trace, "tail_report.csv": plot_tails, "baselines.csv": plot_baselines}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("run_dir", type=Path)
    parser.add_argument("--out", type=Path, help="figure directory (default: RUN_DIR)")
    args = parser.parse_args()
    out = args.out or args.run_dir
    out.mkdir(parents=True, exist_ok=True)
    found = False
    for name, plot in PLOTTERS.items():
        path = args.run_dir / name
        if path.exists():
            plot(read_csv(path), out)
            print(f"wrote {out / (Path(name).stem + '.png')}")
            found = True
    if not found:
        parser.error(f"no known CSV in {args.run_dir}")


if __name__ == "__main__":
    main()
