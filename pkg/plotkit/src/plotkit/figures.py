"""Figure generation from solver run directories.

Every figure is built from the documented CSV tables alone (ledger.csv,
stats.csv, commutators.csv); binary snapshots are never read.  The only
numerics performed here are least-squares refits of columns already
present in the CSV, computed with the same formula the solver CLI uses,
so annotated slopes reproduce the solver's reported rates exactly.
"""

import csv
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("energy", "order_fit", "commutator_decay", "slope_trace")

# Default table consulted when the input path is a run directory.
KIND_SOURCES = {
    "energy": "ledger.csv",
    "slope_trace": "ledger.csv",
    "order_fit": "stats.csv",
    "commutator_decay": "commutators.csv",
}

_REQUIRED = {
    "energy": ("t", "h1_sq", "diss_accum", "sigma_term_a", "sigma_term_b"),
    "slope_trace": ("t", "min_slope"),
    "order_fit": ("error",),
    "commutator_decay": ("delta", "e1", "e2_h1", "e3", "r", "residual"),
}


class SchemaError(ValueError):
    """Input table missing, malformed, or not matching the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: which kind, from which table, to which file."""

    kind: str
    input_path: str
    output_path: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}"
            )

    def source_csv(self) -> str:
        """Table backing this figure: the file itself, or the run-dir default."""
        if os.path.isdir(self.input_path):
            return os.path.join(self.input_path, KIND_SOURCES[self.kind])
        return self.input_path


@dataclass(frozen=True)
class RenderResult:
    """Output path plus any slopes refitted while drawing."""

    output_path: str
    slopes: dict


def read_table(path: str):
    """CSV contents as (header, data rows of strings); rejects empty/ragged."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"{path}: no data rows")
    if any(len(row) != len(header) for row in data):
        raise SchemaError(f"{path}: rows do not match the header width")
    return header, data


def load_columns(path: str, required=()) -> dict:
    """Columns of a CSV keyed by name; numeric where possible, strings else.

    Every column named in ``required`` must be present and fully numeric.
    """
    header, data = read_table(path)
    missing = [name for name in required if name not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    columns = {}
    for k, name in enumerate(header):
        raw = [row[k] for row in data]
        try:
            columns[name] = np.array([float(x) for x in raw])
        except ValueError:
            columns[name] = np.array(raw)
    for name in required:
        if columns[name].dtype.kind not in "fi":
            raise SchemaError(f"{path}: column {name!r} is not numeric")
    return columns


def _logfit(x, y):
    """Slope and intercept of log y against log x over positive finite pairs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mask = np.isfinite(x) & np.isfinite(y) & (x > 0.0) & (y > 0.0)
    if mask.sum() < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope), float(intercept)


def fit_slope(x, y) -> float:
    """Least-squares log-log slope; the solver's rate formula on CSV data."""
    return _logfit(x, y)[0]


# -- renderers ----------------------------------------------------------------


def _render_energy(ax, cols, path):
    t = cols["t"]
    h1 = cols["h1_sq"]
    balance = (
        h1
        + 2.0 * cols["diss_accum"]
        + cols["sigma_term_a"]
        + cols["sigma_term_b"]
    )
    if "h1_sq_stderr" in cols and cols["h1_sq_stderr"].dtype.kind in "fi":
        se = cols["h1_sq_stderr"]
        ax.fill_between(t, h1 - 2.0 * se, h1 + 2.0 * se, alpha=0.25,
                        linewidth=0, label=r"mean $\pm$ 2 stderr")
    ax.plot(t, h1, label=r"$\|u\|_{H^1}^2$")
    ax.plot(t, balance, "--", label="balance (flat when exact)")
    ax.set_xlabel("t")
    ax.set_ylabel(r"squared $H^1$ norm")
    ax.set_title("energy balance")
    ax.legend()
    return {}


def _render_slope_trace(ax, cols, path):
    ax.plot(cols["t"], cols["min_slope"], color="tab:red")
    ax.axhline(0.0, color="black", linewidth=0.8, alpha=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\min_x\, \partial_x u$")
    ax.set_title("steepening trace")
    return {}


def _render_order_fit(ax, cols, path):
    if "scheme" not in cols:
        raise SchemaError(f"{path}: missing columns ['scheme']")
    for name in ("dt", "n"):
        if name in cols and cols[name].dtype.kind in "fi":
            x_name = name
            break
    else:
        raise SchemaError(f"{path}: needs a numeric 'dt' or 'n' column")
    schemes = list(dict.fromkeys(cols["scheme"]))
    slopes = {}
    for scheme in schemes:
        mask = cols["scheme"] == scheme
        x = cols[x_name][mask]
        y = cols["error"][mask]
        slope, intercept = _logfit(x, y)
        slopes[str(scheme)] = slope
        yerr = cols["stderr"][mask] if "stderr" in cols else None
        ax.errorbar(x, y, yerr=yerr, marker="o", linestyle="none",
                    capsize=2, label=f"{scheme} (slope {slope:.3f})")
        if np.isfinite(slope):
            grid = np.array([x.min(), x.max()])
            ax.plot(grid, np.exp(intercept) * grid**slope, ":", color="gray")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_name)
    ax.set_ylabel("strong error")
    ax.set_title("convergence order fit")
    ax.legend()
    return slopes


def _render_commutator_decay(ax, cols, path):
    d = cols["delta"]
    slopes = {
        "E1_sq": fit_slope(d, cols["e1"] ** 2),
        "E2_sq": fit_slope(d, cols["e2_h1"] ** 2),
        "E3_sq": fit_slope(d, cols["e3"] ** 2),
        "R_sq": fit_slope(d, cols["r"] ** 2),
        "residual": fit_slope(d, cols["residual"]),
    }
    series = [
        ("e1", r"$E^1$", "E1_sq"),
        ("e2_h1", r"$E^2$ ($H^1$)", "E2_sq"),
        ("e3", r"$E^3$", "E3_sq"),
        ("r", r"$R$", "R_sq"),
        ("residual", "residual", "residual"),
    ]
    for column, label, key in series:
        ax.loglog(d, cols[column], marker="o",
                  label=f"{label} (slope {slopes[key]:.3f})")
    ax.set_xlabel(r"$\delta$")
    ax.set_ylabel("norm / residual")
    ax.set_title("mollifier commutator decay")
    ax.legend(fontsize=8)
    return slopes


_RENDERERS = {
    "energy": _render_energy,
    "slope_trace": _render_slope_trace,
    "order_fit": _render_order_fit,
    "commutator_decay": _render_commutator_decay,
}


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure from its CSV source and write the image file.

    Output is deterministic for a fixed input: the layout carries no
    timestamps and the SVG hash salt is pinned.
    """
    path = spec.source_csv()
    if not os.path.isfile(path):
        raise SchemaError(f"input table not found: {path}")
    cols = load_columns(path, _REQUIRED[spec.kind])
    with plt.rc_context({"svg.hashsalt": "plotkit"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
        try:
            slopes = _RENDERERS[spec.kind](ax, cols, path)
            fig.tight_layout()
            _save(fig, spec.output_path)
        finally:
            plt.close(fig)
    return RenderResult(output_path=spec.output_path, slopes=slopes)


def _save(fig, output_path: str) -> None:
    kwargs = {}
    if output_path.lower().endswith(".png"):
        kwargs["metadata"] = {"Software": "plotkit"}
    try:
        fig.savefig(output_path, **kwargs)
    except OSError as exc:
        raise SchemaError(f"cannot write {output_path}: {exc}") from exc
