"""Batch figure generation from spectral-solver run directories."""

from .figures import (
    FIGURE_KINDS,
    KIND_SOURCES,
    FigureSpec,
    RenderResult,
    SchemaError,
    fit_slope,
    load_columns,
    read_table,
    render,
)

__all__ = [
    "FIGURE_KINDS",
    "KIND_SOURCES",
    "FigureSpec",
    "RenderResult",
    "SchemaError",
    "fit_slope",
    "load_columns",
    "read_table",
    "render",
]
