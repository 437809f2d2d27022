"""Deterministic figure rendering from the solver CLI's CSV artifacts.

The renderer never recomputes physics: it reads the CSV tables, plots the
declared quantity, and saves a PNG.  Determinism is guaranteed by building
every figure inside an isolated rc context (pinned size, fonts, and style),
using the Agg canvas directly, and stripping the writer's software tag from
the PNG metadata.  No timestamps, hostnames, or random state enter the file,
so identical CSV inputs give byte-identical images.
"""

from __future__ import annotations

import csv
import os

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .registry import FIGURES, FigureSpec


class ArtifactError(Exception):
    """A required CSV artifact is missing or ill-formed."""


_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.titlesize": 11.0,
    "axes.labelsize": 10.0,
    "legend.fontsize": 9.0,
    "xtick.labelsize": 9.0,
    "ytick.labelsize": 9.0,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.6,
    "legend.framealpha": 0.9,
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120.0,
}

_SAVE_DPI = 120.0

_AXIS_LABELS = {
    "spectrum": ("detuning", "transmittance magnitude |t|"),
    "envelope": ("time", "Ramsey envelope C(t)"),
    "noise_spectrum": ("frequency ω", "noise power spectrum S(ω)"),
}


def _lookup(figure_id: str) -> FigureSpec:
    try:
        return FIGURES[figure_id]
    except KeyError:
        known = ", ".join(sorted(FIGURES))
        raise ArtifactError(f"unknown figure id {figure_id!r} (known: {known})") from None


def _read_columns(csv_dir: str, filename: str, columns: tuple[str, ...]) -> dict[str, np.ndarray]:
    path = os.path.join(csv_dir, filename)
    if not os.path.isfile(path):
        raise ArtifactError(f"missing artifact: {filename} (looked in {csv_dir!r})")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ArtifactError(f"ill-formed artifact {filename}: empty file")
        for column in columns:
            if column not in header:
                raise ArtifactError(
                    f"ill-formed artifact {filename}: missing column {column!r}"
                    f" (header has: {', '.join(header)})"
                )
        rows = [row for row in reader if row]
    if not rows:
        raise ArtifactError(f"ill-formed artifact {filename}: no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ArtifactError(
                f"ill-formed artifact {filename}: row {i + 2} has {len(row)} fields,"
                f" expected {len(header)}"
            )
    data: dict[str, np.ndarray] = {}
    for column in columns:
        j = header.index(column)
        values = np.empty(len(rows))
        for i, row in enumerate(rows):
            try:
                values[i] = float(row[j])
            except ValueError:
                raise ArtifactError(
                    f"ill-formed artifact {filename}: non-numeric value {row[j]!r}"
                    f" in column {column!r} (row {i + 2})"
                ) from None
        data[column] = values
    return data


def _curves(spec: FigureSpec, csv_dir: str) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for filename in spec.filenames():
        data = _read_columns(csv_dir, filename, spec.columns)
        if spec.kind == "spectrum":
            out.append((data["delta"], np.hypot(data["re_t"], data["im_t"])))
        elif spec.kind == "envelope":
            out.append((data["t"], data["re_C"]))
        else:
            out.append((data["omega"], data["S"]))
    return out


def build_figure(figure_id: str, csv_dir: str) -> Figure:
    """Build the pinned matplotlib Figure for `figure_id` from CSVs in `csv_dir`."""
    spec = _lookup(figure_id)
    curves = _curves(spec, csv_dir)
    with matplotlib.rc_context(_RC):
        fig = Figure()
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(111)
        for (x, y), label, style in zip(curves, spec.labels, spec.styles):
            ax.plot(
                x,
                y,
                color=style.color,
                linestyle=style.linestyle,
                linewidth=style.linewidth,
                label=label,
            )
        if spec.loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlim(spec.xlim)
        ax.set_ylim(spec.ylim)
        xlabel, ylabel = _AXIS_LABELS[spec.kind]
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(f"{spec.figure_id}: {spec.title}")
        ax.grid(True, alpha=0.3, linewidth=0.5)
        ax.legend(loc=spec.legend_loc)
        fig.tight_layout()
    return fig


def render(figure_id: str, csv_dir: str, out_image_path: str) -> str:
    """Render `figure_id` from the CSVs in `csv_dir` to a deterministic PNG."""
    ext = os.path.splitext(out_image_path)[1].lower()
    if ext != ".png":
        raise ArtifactError(
            f"unsupported output format {ext or '(no extension)'!r}: only .png is supported"
        )
    fig = build_figure(figure_id, csv_dir)
    # Software tag is the only metadata Agg writes by default; drop it so the
    # bytes depend on nothing but the pixel content.
    fig.savefig(out_image_path, format="png", dpi=_SAVE_DPI, metadata={"Software": None})
    return out_image_path
