"""Plot helper for qpbec datasets; talks to the pipeline via files only."""

__version__ = "0.1.0"

from .render import FIGURE_KINDS, render

__all__ = ["FIGURE_KINDS", "render"]
