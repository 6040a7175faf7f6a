"""Render the stats table as figure files next to the CSV export."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .knowledge_base import LevelStats  # noqa: E402

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "apidrift"}}


def _boundary_labels(rows):
    return [f"{r.boundary[0]}:{r.boundary[1]}" for r in rows]


def render_stats_figures(rows: list[LevelStats], out_dir) -> list[Path]:
    """Four PNGs: signature counts, change-type distribution, semantic verdict
    distribution, accumulated totals. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_boundary = [r for r in rows if r.boundary is not None]
    total = next((r for r in rows if r.boundary is None), None)
    labels = _boundary_labels(per_boundary)
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    xs = range(len(per_boundary))
    width = 0.4
    ax.bar([x - width / 2 for x in xs], [r.additions for r in per_boundary],
           width, label="additions", color="#4878d0")
    ax.bar([x + width / 2 for x in xs], [r.removals for r in per_boundary],
           width, label="removals", color="#d65f5f")
    ax.set_xticks(list(xs), labels, rotation=45, ha="right")
    ax.set_ylabel("APIs")
    ax.set_title("Signature-incompatible APIs per boundary")
    ax.legend()
    fig.tight_layout()
    path = out / "signature_counts.png"
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ct_names = ["Return", "Exception", "Control", "Other", "Dependent", "No Change"]
    ct_attrs = ["ct_return", "ct_exception", "ct_control", "ct_other",
                "ct_dependent", "ct_nochange"]
    source = total if total is not None else LevelStats(boundary=None)
    counts = [getattr(source, a) for a in ct_attrs]
    ax.bar(ct_names, counts, color="#6acc64")
    ax.set_ylabel("retained-changed pairs")
    ax.set_title("Code change type distribution")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    path = out / "change_types.png"
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    verdict_names = ["RVA only", "EHM only", "both"]
    verdict_counts = [source.rva_only, source.ehm_only, source.both]
    ax.bar(verdict_names, verdict_counts, color=["#4878d0", "#d65f5f", "#956cb4"])
    ax.set_ylabel("APIs")
    ax.set_title("Semantic incompatibility type distribution")
    fig.tight_layout()
    path = out / "semantic_types.png"
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(labels, [r.accumulated for r in per_boundary], color="#b0b0b0",
           label="accumulated")
    ax.plot(labels, [r.incompatible_total for r in per_boundary],
            color="black", marker="o", label="per boundary")
    ax.set_ylabel("incompatible APIs")
    ax.set_title("Accumulated detected incompatible APIs")
    plt.setp(ax.get_xticklabels(), rotation=45, ha="right")
    ax.legend()
    fig.tight_layout()
    path = out / "accumulated.png"
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    written.append(path)
    return written
