"""Deterministic matplotlib renderers for the scattering toolkit's CSV artifacts.

Each registered figure id maps to a pinned set of CSV artifacts (as emitted
by the ``noisyemitter figure`` task), a plotted quantity, and a frozen style,
so identical CSV inputs always produce byte-identical PNG output.  This
package only re-plots; it never recomputes physics.
"""

from __future__ import annotations

from .registry import FIGURES, CurveStyle, FigureSpec
from .render import ArtifactError, build_figure, render

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "CurveStyle",
    "FIGURES",
    "FigureSpec",
    "build_figure",
    "render",
    "__version__",
]
