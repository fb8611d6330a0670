"""Figure rendering for training logs and evaluation reports.

Uses the Agg backend and writes PNG files next to the delimited outputs. All
helpers take explicit output paths and never open interactive windows.
"""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DPI = 150


def new_figure(width: float = 6.4, height: float | None = None):
    if height is None:
        height = width * GOLDEN
    return plt.subplots(figsize=(width, height))


def save_figure(fig, path: str) -> str:
    fig.savefig(path, dpi=DPI, bbox_inches="tight", metadata={"Software": "fsdd"})
    plt.close(fig)
    return path


def plot_training_log(log_path: str, out_path: str) -> str:
    """Loss and smoothed loss against the step index from a training CSV."""
    steps, loss, ema = [], [], []
    with open(log_path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            loss.append(float(row["loss"]))
            ema.append(float(row["ema_loss"]))
    fig, ax = new_figure()
    ax.plot(steps, loss, lw=0.8, alpha=0.5, label="loss")
    ax.plot(steps, ema, lw=1.6, label="smoothed")
    ax.set_xlabel("step")
    ax.set_ylabel("cross-entropy")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    ax.set_title("training loss")
    return save_figure(fig, out_path)


def plot_support_comparison(
    empirical: dict, reference: dict, out_path: str, max_atoms: int = 20
) -> str:
    """Per-atom probability bars: empirical vs reference on the top reference atoms."""
    atoms = sorted(reference, key=lambda a: -reference[a])[:max_atoms]
    extra = sorted(set(empirical) - set(atoms), key=lambda a: -empirical[a])
    atoms += extra[: max(0, max_atoms - len(atoms))]
    other_emp = sum(p for a, p in empirical.items() if a not in set(atoms))
    other_ref = sum(p for a, p in reference.items() if a not in set(atoms))
    def atom_label(pos, atom):
        if len(atom) > 12:
            return f"atom{pos}"
        sep = "" if max(atom, default=0) <= 9 else "-"
        return sep.join(map(str, atom))

    labels = [atom_label(p, a) for p, a in enumerate(atoms)]
    emp = [empirical.get(a, 0.0) for a in atoms]
    ref = [reference.get(a, 0.0) for a in atoms]
    if other_emp > 0 or other_ref > 0:
        labels.append("other")
        emp.append(other_emp)
        ref.append(other_ref)
    pos = np.arange(len(labels))
    fig, ax = new_figure(max(6.4, 0.45 * len(labels)))
    ax.bar(pos - 0.2, ref, width=0.4, label="reference")
    ax.bar(pos + 0.2, emp, width=0.4, label="samples")
    ax.set_xticks(pos)
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("probability")
    ax.legend(frameon=False)
    ax.set_title("support comparison")
    return save_figure(fig, out_path)


def plot_sum_histogram(sums, target_sum: int, out_path: str) -> str:
    """Histogram of sample totals around the required fixed sum."""
    sums = np.asarray(sums, dtype=np.int64)
    lo = min(int(sums.min()), target_sum) - 1
    hi = max(int(sums.max()), target_sum) + 1
    edges = np.arange(lo, hi + 2) - 0.5
    fig, ax = new_figure()
    ax.hist(sums, bins=edges, color="#4878cf")
    ax.axvline(target_sum, color="k", ls="--", lw=1.0, label=f"target M={target_sum}")
    ax.set_xlabel("sample total")
    ax.set_ylabel("count")
    ax.legend(frameon=False)
    ax.set_title("fixed-sum adherence")
    return save_figure(fig, out_path)
