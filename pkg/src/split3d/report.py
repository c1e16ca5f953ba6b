"""Report output: CSV tables and matplotlib figures written next to them."""

from __future__ import annotations

import csv
import statistics
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

HIST_BINS = 20


def write_csv(path: str | Path, rows: Iterable[Mapping], fields: Sequence[str]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def mean_or_none(values: Iterable[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return statistics.fmean(present) if present else None


def histogram_rows(distances: Sequence[float], bins: int = HIST_BINS) -> list[dict]:
    """Counts of normalized F2F displacements over ``bins`` equal bins of [0, 1]."""
    counts = [0] * bins
    for d in distances:
        counts[min(int(d * bins), bins - 1)] += 1
    return [{"bin_low": i / bins, "bin_high": (i + 1) / bins, "count": c}
            for i, c in enumerate(counts)]


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def histogram_figure(distances: Sequence[float], path: str | Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(distances, bins=HIST_BINS, range=(0.0, 1.0), color="#4c72b0", edgecolor="white")
    ax.set_xlabel("normalized F2F via displacement")
    ax.set_ylabel("ports")
    ax.set_xlim(0, 1)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def campaign_figure(rows: Sequence[Mapping], path: str | Path, title: str = "") -> Path:
    """Per-seed CCR and HD bars with their means."""
    seeds = [r["seed"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2), sharex=True)
    for ax, field, label in zip(axes, ("ccr", "hd"), ("CCR (%)", "HD (%)")):
        values = [r[field] if r[field] is not None else 0.0 for r in rows]
        ax.bar([str(s) for s in seeds], values, color="#55a868")
        avg = mean_or_none(r[field] for r in rows)
        if avg is not None:
            ax.axhline(avg, color="black", linestyle="--", linewidth=1, label=f"mean {avg:.1f}")
            ax.legend(loc="upper right", frameon=False)
        ax.set_ylim(0, 100)
        ax.set_xlabel("seed")
        ax.set_ylabel(label)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def sweep_figure(rows: Sequence[Mapping], path: str | Path, title: str = "") -> Path:
    """Mean cut size (and mean CCR/HD when present) against the move fraction, per strategy."""
    with_security = any(r.get("ccr") is not None for r in rows)
    fig, axes = plt.subplots(1, 2 if with_security else 1, figsize=(9 if with_security else 5, 3.2),
                             squeeze=False)
    groups: dict[tuple[str, str], dict[float, list[Mapping]]] = {}
    for r in rows:
        groups.setdefault((r["benchmark"], r["strategy"]), {}).setdefault(r["fraction"], []).append(r)
    for (bench, strategy), by_fraction in sorted(groups.items()):
        xs = sorted(by_fraction)
        label = f"{bench} {strategy}"
        axes[0][0].plot(xs, [statistics.fmean(r["cut_size"] for r in by_fraction[x]) for x in xs],
                        marker="o", label=label)
        if with_security:
            ys = [mean_or_none(r.get("ccr") for r in by_fraction[x]) for x in xs]
            axes[0][1].plot(xs, ys, marker="o", label=f"{label} CCR")
            ys = [mean_or_none(r.get("hd") for r in by_fraction[x]) for x in xs]
            axes[0][1].plot(xs, ys, marker="s", linestyle="--", label=f"{label} HD")
    axes[0][0].set_xlabel("move fraction")
    axes[0][0].set_ylabel("mean cut size")
    axes[0][0].legend(fontsize=7, frameon=False)
    if with_security:
        axes[0][1].set_xlabel("move fraction")
        axes[0][1].set_ylabel("percent")
        axes[0][1].set_ylim(0, 100)
        axes[0][1].legend(fontsize=7, frameon=False)
    if title:
        fig.suptitle(title)
    return _save(fig, path)
