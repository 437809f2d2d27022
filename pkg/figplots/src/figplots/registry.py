"""Pinned layout registry for the figure renderers.

Each entry fixes which CSV artifacts a figure consumes (``<figure_id>__<stem>.csv``),
which quantity is plotted, the per-curve style, and the axis ranges.  Keeping
all of this in one frozen table makes the rendered image a pure function of
the CSV contents.
"""

from __future__ import annotations

from dataclasses import dataclass

# column sets of the upstream CSV schemas; presence is validated before plotting
SPECTRUM_COLUMNS = ("delta", "re_t", "im_t", "re_r", "im_r", "re_rloss", "im_rloss")
ENVELOPE_COLUMNS = ("t", "re_C", "im_C")
NOISE_SPECTRUM_COLUMNS = ("omega", "S")

_KIND_COLUMNS = {
    "spectrum": SPECTRUM_COLUMNS,
    "envelope": ENVELOPE_COLUMNS,
    "noise_spectrum": NOISE_SPECTRUM_COLUMNS,
}

_BLUE = "#1f77b4"
_RED = "#d62728"
_BLACK = "#000000"
# light-to-dark sequence for the fluctuator-ensemble sizes M = 2, 3, 4, 5, 10
_BLUES = ("#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c")


@dataclass(frozen=True)
class CurveStyle:
    color: str
    linestyle: str
    linewidth: float = 1.6


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    kind: str
    title: str
    stems: tuple[str, ...]
    labels: tuple[str, ...]
    styles: tuple[CurveStyle, ...]
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    legend_loc: str
    loglog: bool = False

    def __post_init__(self) -> None:
        if self.kind not in _KIND_COLUMNS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not (len(self.stems) == len(self.labels) == len(self.styles)):
            raise ValueError(f"{self.figure_id}: stems, labels, and styles must align")

    @property
    def columns(self) -> tuple[str, ...]:
        return _KIND_COLUMNS[self.kind]

    def filenames(self) -> tuple[str, ...]:
        return tuple(f"{self.figure_id}__{stem}.csv" for stem in self.stems)


def _ou_trio(figure_id: str, kind: str, title: str, xlim, ylim, legend_loc: str) -> FigureSpec:
    # fast / intermediate / quasi-static correlation-time trio
    return FigureSpec(
        figure_id=figure_id,
        kind=kind,
        title=title,
        stems=("kappa_10sigma", "kappa_2sigma", "kappa_0sigma"),
        labels=("κ = 10σ", "κ = 2σ", "κ → 0 (quasi-static)"),
        styles=(
            CurveStyle(_BLUE, "-"),
            CurveStyle(_BLACK, ":" if kind == "envelope" else "-."),
            CurveStyle(_RED, "--"),
        ),
        xlim=xlim,
        ylim=ylim,
        legend_loc=legend_loc,
    )


FIGURES: dict[str, FigureSpec] = {
    "fig2c": _ou_trio(
        "fig2c",
        "envelope",
        "Ramsey envelopes, colored Gaussian dephasing",
        xlim=(0.0, 6.0),
        ylim=(-0.05, 1.05),
        legend_loc="upper right",
    ),
    "fig3a": _ou_trio(
        "fig3a",
        "spectrum",
        "transmittance lineshapes, colored Gaussian dephasing",
        xlim=(-6.0, 6.0),
        ylim=(0.0, 1.05),
        legend_loc="lower right",
    ),
    "fig4a": FigureSpec(
        figure_id="fig4a",
        kind="noise_spectrum",
        title="noise power spectrum of the composite flicker model",
        stems=("exact", "ideal"),
        labels=("N = 8 components", "ideal power law"),
        styles=(CurveStyle(_BLUE, "-"), CurveStyle(_RED, "--")),
        xlim=(1e-6, 100.0),
        ylim=(1e-4, 2e6),
        legend_loc="upper right",
        loglog=True,
    ),
    "fig4b": FigureSpec(
        figure_id="fig4b",
        kind="spectrum",
        title="transmittance, Gaussian vs jump flicker dephasing",
        stems=("gaussian", "non_gaussian"),
        labels=("Gaussian", "non-Gaussian (M = 1)"),
        styles=(CurveStyle(_RED, "--"), CurveStyle(_BLUE, "-")),
        xlim=(-8.0, 8.0),
        ylim=(0.0, 1.05),
        legend_loc="lower right",
    ),
    "fig4c": FigureSpec(
        figure_id="fig4c",
        kind="envelope",
        title="Ramsey envelopes, Gaussian vs jump flicker dephasing",
        stems=("gaussian", "non_gaussian"),
        labels=("Gaussian", "non-Gaussian (M = 1)"),
        styles=(CurveStyle(_RED, "--"), CurveStyle(_BLUE, "-")),
        xlim=(0.0, 4.0),
        ylim=(-0.05, 1.05),
        legend_loc="upper right",
    ),
    "fig5b": FigureSpec(
        figure_id="fig5b",
        kind="spectrum",
        title="transmittance lineshapes, telegraph dephasing",
        stems=("kappa_5sigma", "kappa_1sigma", "kappa_0p05sigma"),
        labels=("κ = 5σ", "κ = σ", "κ = 0.05σ"),
        styles=(CurveStyle(_BLUE, "-"), CurveStyle(_BLACK, "-."), CurveStyle(_RED, "--")),
        xlim=(-8.0, 8.0),
        ylim=(0.0, 1.05),
        legend_loc="lower right",
    ),
    "fig5c": FigureSpec(
        figure_id="fig5c",
        kind="envelope",
        title="Ramsey envelopes, telegraph dephasing",
        stems=("kappa_5sigma", "kappa_1sigma", "kappa_0p05sigma"),
        labels=("κ = 5σ", "κ = σ", "κ = 0.05σ"),
        styles=(CurveStyle(_BLUE, "-"), CurveStyle(_BLACK, "-."), CurveStyle(_RED, "--")),
        xlim=(0.0, 6.0),
        ylim=(-1.05, 1.05),
        legend_loc="upper right",
    ),
    "fig6b": FigureSpec(
        figure_id="fig6b",
        kind="spectrum",
        title="transmittance, fluctuator ensembles of increasing size",
        stems=("m2", "m3", "m4", "m5", "m10", "gaussian_limit"),
        labels=("M = 2", "M = 3", "M = 4", "M = 5", "M = 10", "Gaussian limit"),
        styles=tuple(CurveStyle(c, "-") for c in _BLUES) + (CurveStyle(_RED, "--"),),
        xlim=(-8.0, 8.0),
        ylim=(0.0, 1.05),
        legend_loc="lower right",
    ),
    "fig6c": FigureSpec(
        figure_id="fig6c",
        kind="envelope",
        title="Ramsey envelopes, fluctuator ensembles of increasing size",
        stems=("m2", "m3", "m4", "m5", "m10", "gaussian_limit"),
        labels=("M = 2", "M = 3", "M = 4", "M = 5", "M = 10", "Gaussian limit"),
        styles=tuple(CurveStyle(c, "-") for c in _BLUES) + (CurveStyle(_RED, "--"),),
        xlim=(0.0, 3.0),
        ylim=(-0.6, 1.05),
        legend_loc="upper right",
    ),
}
