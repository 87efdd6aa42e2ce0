"""Figures written next to the JSON/TSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps re-runs byte-stable
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def training_curve(history, path, loss_key="train_loss", title="training"):
    epochs = [h["epoch"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(epochs, [h[loss_key] for h in history], color="tab:blue", label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(epochs, [h["val_accuracy"] for h in history], color="tab:orange", label="val accuracy")
    ax2.set_ylim(0, 1.05)
    ax2.set_ylabel("validation accuracy", color="tab:orange")
    for h in history:
        if h.get("event"):
            ax.axvline(h["epoch"], color="grey", lw=0.8, ls=":")
    ax.set_title(title)
    return _save(fig, path)


def audit_summary(report, path, split=""):
    fig, (left, right) = plt.subplots(1, 2, figsize=(8, 3.5))
    labels = ["answerable", "ambiguous", "unmentioned"]
    counts = [report.answerable_count, report.unanswerable_count, report.unmentioned_subject_count]
    left.bar(labels, counts, color=["tab:green", "tab:orange", "tab:red"])
    left.set_ylabel("questions")
    left.set_title(f"verdicts ({split})" if split else "verdicts")
    names = ["naive", "distribution", "noise-adjusted"]
    bounds = [report.naive_upperbound, report.distribution_upperbound, report.noise_adjusted_upperbound]
    bars = right.bar(names, bounds, color="tab:blue")
    for bar, b in zip(bars, bounds):
        right.annotate(f"{100 * b:.1f}%", (bar.get_x() + bar.get_width() / 2, b), ha="center", va="bottom")
    right.set_ylim(0, 1.1)
    right.set_title("accuracy upperbounds")
    return _save(fig, path)


def eval_summary(report, path, split=""):
    from .pipeline import BUCKETS

    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    left.bar(["strict", "any interp."], [report.strict_accuracy, report.any_interpretation_accuracy],
             color=["tab:blue", "tab:cyan"])
    left.set_ylim(0, 1.05)
    left.set_title(f"accuracy ({split})" if split else "accuracy")
    right.barh(list(BUCKETS), [report.buckets[b] for b in BUCKETS], color="tab:red")
    right.invert_yaxis()
    right.set_xlabel("failures")
    right.set_title("error buckets")
    return _save(fig, path)
