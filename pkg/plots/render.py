#!/usr/bin/env python3
"""Render publication-style figures from the CSVs written by the qscope
pipeline. This component only reads persisted files; it never recomputes
anything, so the numerical package stands alone without it.

Usage:
    python plots/render.py --spec <path>

A spec is a flat `key = value` file with a single [figure] section:

    [figure]
    tag = stability            # which renderer to use
    csv = out/stability.csv    # input CSV (comma-separated list for xy)
    out = fig/stability.png    # output image
    xscale = log               # optional; per-tag defaults otherwise
    yscale = log
    x = data_err               # xy tag only: column names
    y = sup_err_all            # xy tag only: comma-separated column list

Tags: stability, weighted_ratio, band_errors, three_spheres_map,
probe_ratios, carleman_tau, xy.

Figures are deterministic: fixed size, no timestamps embedded in the PNG.
Missing files or columns exit nonzero; a header-only CSV renders an
empty-axes figure with a warning and exits 0.
"""

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGSIZE = (6.0, 4.5)
DPI = 120


class SpecError(Exception):
    pass


@dataclass
class FigureSpec:
    tag: str = ""
    csv_paths: tuple = ()
    out: str = ""
    xscale: str = ""
    yscale: str = ""
    x: str = ""
    y: tuple = ()
    extra: dict = field(default_factory=dict)


_KEYS = {"tag", "csv", "out", "xscale", "yscale", "x", "y"}


def parse_spec(text: str) -> FigureSpec:
    spec = FigureSpec()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section != "figure":
                raise SpecError(f"line {lineno}: unknown section [{section}]")
            continue
        if section != "figure":
            raise SpecError(f"line {lineno}: key outside [figure] section")
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        if key == "csv":
            spec.csv_paths = tuple(p.strip() for p in value.split(",") if p.strip())
        elif key == "y":
            spec.y = tuple(c.strip() for c in value.split(",") if c.strip())
        else:
            setattr(spec, key, value)
    if not spec.tag:
        raise SpecError("spec is missing the figure tag")
    if spec.tag not in RENDERERS:
        raise SpecError(f"unknown figure tag {spec.tag!r}")
    if not spec.csv_paths:
        raise SpecError("spec is missing the csv path")
    if not spec.out:
        raise SpecError("spec is missing the output image path")
    return spec


def read_csv(path):
    """Header and column arrays; raises SpecError on a missing file."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}")
    if not rows:
        raise SpecError(f"{path} is empty (no header)")
    header = [c.strip() for c in rows[0]]
    cols = {name: [] for name in header}
    for row in rows[1:]:
        for name, cell in zip(header, row):
            cols[name].append(float(cell))
    return header, {k: np.asarray(v) for k, v in cols.items()}


def require(cols, path, *names):
    for name in names:
        if name not in cols:
            raise SpecError(f"{path} has no column {name!r}")


def new_axes(spec, default_xscale="linear", default_yscale="linear"):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.set_xscale(spec.xscale or default_xscale)
    ax.set_yscale(spec.yscale or default_yscale)
    return fig, ax


def empty_figure(spec, message):
    print(f"warning: {message}; rendering empty axes", file=sys.stderr)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.set_title(f"{spec.tag} (no data)")
    return fig


def phi_curve(s, c0, c1):
    with np.errstate(divide="ignore", invalid="ignore"):
        return c0 * (1.0 / np.abs(np.log(c1 * np.abs(np.log(s)))) + s)


def render_stability(spec):
    path = spec.csv_paths[0]
    _, cols = read_csv(path)
    require(cols, path, "data_err", "sup_err_all", "theta",
            "phi_C0", "phi_C1")
    if cols["data_err"].size == 0:
        return empty_figure(spec, f"{path} has no data rows")
    fig, ax = new_axes(spec, "log", "log")
    sel = (cols["data_err"] > 0) & (cols["sup_err_all"] > 0)
    ax.plot(cols["data_err"][sel], cols["sup_err_all"][sel],
            "o", label="sup error")
    c0, c1, theta = cols["phi_C0"][0], cols["phi_C1"][0], cols["theta"][0]
    if c0 > 0 and sel.any():
        derr = np.logspace(math.log10(cols["data_err"][sel].min()),
                           math.log10(cols["data_err"][sel].max()), 200)
        ax.plot(derr, phi_curve(derr**theta, c0, c1), "-",
                label=f"fitted modulus (C0={c0:.3g}, C1={c1:.3g})")
    ax.set_xlabel("data error (H1)")
    ax.set_ylabel("coefficient error (sup)")
    ax.legend()
    return fig


def render_weighted_ratio(spec):
    path = spec.csv_paths[0]
    _, cols = read_csv(path)
    require(cols, path, "eps", "weighted_ratio")
    if cols["eps"].size == 0:
        return empty_figure(spec, f"{path} has no data rows")
    fig, ax = new_axes(spec, "log", "linear")
    sel = cols["eps"] > 0
    ax.plot(cols["eps"][sel], cols["weighted_ratio"][sel], "o-")
    ax.set_xlabel("perturbation amplitude")
    ax.set_ylabel("weighted lhs / rhs")
    return fig


def render_band_errors(spec):
    path = spec.csv_paths[0]
    _, cols = read_csv(path)
    bands = ["sup_err_b0", "sup_err_b1", "sup_err_b2", "sup_err_b3"]
    require(cols, path, "eps", *bands)
    sel = (cols["eps"] > 0) & (cols["eps"] != 1.0)
    if not sel.any():
        return empty_figure(spec, f"{path} has no usable data rows")
    fig, ax = new_axes(spec, "linear", "log")
    x = 1.0 / np.abs(np.log(cols["eps"][sel]))
    labels = ["dist < 0.05", "0.05-0.1", "0.1-0.2", "dist >= 0.2"]
    for band, lab in zip(bands, labels):
        y = cols[band][sel]
        pos = y > 0
        ax.plot(x[pos], y[pos], "o-", label=lab)
    ax.set_xlabel("1 / |ln eps|")
    ax.set_ylabel("sup error per distance band")
    ax.legend()
    return fig


def render_three_spheres_map(spec):
    path = spec.csv_paths[0]
    _, cols = read_csv(path)
    require(cols, path, "center_x", "center_y", "lhs")
    if cols["center_x"].size == 0:
        return empty_figure(spec, f"{path} has no data rows")
    fig, ax = new_axes(spec)
    sc = ax.scatter(cols["center_x"], cols["center_y"], c=cols["lhs"],
                    s=400, marker="s", cmap="viridis", vmin=0.0, vmax=1.0)
    fig.colorbar(sc, ax=ax, label="interpolation exponent")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("center x")
    ax.set_ylabel("center y")
    return fig


def render_probe_ratios(spec):
    path = spec.csv_paths[0]
    _, cols = read_csv(path)
    require(cols, path, "lhs", "rhs")
    if cols["lhs"].size == 0:
        return empty_figure(spec, f"{path} has no data rows")
    fig, ax = new_axes(spec, "linear", "log")
    rhs = cols["rhs"]
    ratio = np.where(rhs != 0, cols["lhs"] / np.where(rhs != 0, rhs, 1.0),
                     np.nan)
    ax.plot(np.arange(ratio.size), ratio, "o")
    ax.set_xlabel("sample index")
    ax.set_ylabel("lhs / rhs")
    return fig


def render_carleman_tau(spec):
    path = spec.csv_paths[0]
    _, cols = read_csv(path)
    require(cols, path, "tau", "lhs", "rhs")
    if cols["tau"].size == 0:
        return empty_figure(spec, f"{path} has no data rows")
    fig, ax = new_axes(spec, "log", "log")
    sel = cols["rhs"] > 0
    ax.plot(cols["tau"][sel], cols["lhs"][sel] / cols["rhs"][sel], "o-")
    ax.set_xlabel("tau")
    ax.set_ylabel("weighted-inequality ratio")
    return fig


def render_xy(spec):
    """Generic log-log/linear x-y plot, e.g. for convergence tables."""
    if not spec.x or not spec.y:
        raise SpecError("xy figures need x and y column keys")
    fig, ax = new_axes(spec, "log", "log")
    drew = False
    for path in spec.csv_paths:
        _, cols = read_csv(path)
        require(cols, path, spec.x, *spec.y)
        if cols[spec.x].size == 0:
            continue
        for yname in spec.y:
            ax.plot(cols[spec.x], cols[yname], "o-", label=f"{yname} ({path})")
            drew = True
    if not drew:
        return empty_figure(spec, "no data rows in any input CSV")
    ax.set_xlabel(spec.x)
    ax.legend()
    return fig


RENDERERS = {
    "stability": render_stability,
    "weighted_ratio": render_weighted_ratio,
    "band_errors": render_band_errors,
    "three_spheres_map": render_three_spheres_map,
    "probe_ratios": render_probe_ratios,
    "carleman_tau": render_carleman_tau,
    "xy": render_xy,
}


def render(spec: FigureSpec) -> None:
    fig = RENDERERS[spec.tag](spec)
    fig.savefig(spec.out, dpi=DPI, metadata={"Software": None})
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render figures from qscope CSV outputs.")
    parser.add_argument("--spec", required=True, action="append",
                        help="figure spec file (repeatable)")
    args = parser.parse_args(argv)
    for spath in args.spec:
        try:
            with open(spath) as fh:
                spec = parse_spec(fh.read())
            render(spec)
        except SpecError as exc:
            print(f"{spath}: {exc}", file=sys.stderr)
            return 1
        except OSError as exc:
            print(f"{spath}: {exc}", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
