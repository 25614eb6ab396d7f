"""Deterministic SVG plots with JSON data sidecars.

Every plot is rendered only from its sidecar dict, so ``render_sidecar`` on a
saved sidecar reproduces the SVG byte for byte.
"""

from __future__ import annotations

import io
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .theory import semicircle_cdf  # noqa: E402

__all__ = ["KINDS", "PlotArtifact", "emit_plot", "render_sidecar"]

KINDS = ("histogram", "ecdf-vs-semicircle", "tail-loglinear")
FIGSIZE = (8.0, 6.0)
DPI = 100
_RC = {
    "svg.hashsalt": "eigconc",
    "svg.fonttype": "path",
    "path.simplify": False,
}


class PlotArtifact:
    def __init__(self, kind: str, svg_path: Path, sidecar_path: Path, svg: bytes) -> None:
        self.kind = kind
        self.svg_path = svg_path
        self.sidecar_path = sidecar_path
        self.svg = svg


def _histogram(ax, data):
    values = np.asarray(data["values"], dtype=np.float64)
    ax.hist(values, bins=data.get("bins", 30), color="0.6", edgecolor="0.2")
    ax.set_xlabel(f"{data['statistic']} (n = {data['n']})")
    ax.set_ylabel("count")


def _ecdf(ax, data):
    x = np.sort(np.asarray(data["values"], dtype=np.float64))
    y = np.arange(1, x.size + 1) / x.size
    ax.step(x, y, where="post", label="empirical")
    grid = np.linspace(-1.2, 1.2, 481)
    ax.plot(grid, semicircle_cdf(grid), "k--", label="semicircle W(x)")
    ax.set_xlabel(f"{data['statistic']} (n = {data['n']})")
    ax.set_ylabel("cumulative fraction")
    ax.legend(loc="upper left")


def _tail(ax, data):
    t = np.asarray(data["t"], dtype=np.float64)
    freq = np.asarray(data["freq"], dtype=np.float64)
    keep = freq > 0
    ax.plot(t[keep] ** 2, np.log(freq[keep]), "o", label="ln freq")
    fit = data.get("fit") or {}
    if fit.get("fitted"):
        c, b = fit["c_hat"], fit["intercept"]
        xs = np.array([0.0, float(np.max(t**2))])
        ax.plot(xs, b - c * xs, "-", label=f"fit: slope = {-c:.4g}")
    ax.set_xlabel(f"t^2, {data['statistic']} (n = {data['n']})")
    ax.set_ylabel("ln freq(t)")
    ax.legend(loc="upper right")


_DRAW = {"histogram": _histogram, "ecdf-vs-semicircle": _ecdf, "tail-loglinear": _tail}


def _check(sidecar: dict) -> None:
    kind = sidecar.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    key = "t" if kind == "tail-loglinear" else "values"
    if key not in sidecar or len(sidecar[key]) == 0:
        raise ValueError(f"{kind} plot needs nonempty {key!r}")


def render_svg(sidecar: dict) -> bytes:
    _check(sidecar)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
        try:
            _DRAW[sidecar["kind"]](ax, sidecar)
            if sidecar.get("title"):
                ax.set_title(sidecar["title"])
            buf = io.BytesIO()
            fig.savefig(buf, format="svg", dpi=DPI, metadata={"Date": None})
        finally:
            plt.close(fig)
    return buf.getvalue()


def _sidecar_text(sidecar: dict) -> str:
    return json.dumps(sidecar, indent=1, sort_keys=True, allow_nan=False) + "\n"


def emit_plot(data: dict, kind: str, path) -> PlotArtifact:
    """Write ``path`` (.svg) and its sidecar ``path.json`` for ``data``.

    ``data`` needs ``statistic`` and ``n`` plus ``values`` (histogram,
    ecdf-vs-semicircle) or ``t``, ``freq`` and optionally ``fit``
    (tail-loglinear).
    """
    sidecar = {"kind": kind, **data}
    _check(sidecar)
    for key in ("values", "t", "freq"):
        if key in sidecar:
            sidecar[key] = [float(v) for v in sidecar[key]]
            if not all(math.isfinite(v) for v in sidecar[key]):
                raise ValueError(f"{key} contains non-finite values")
    text = _sidecar_text(sidecar)
    # render from the serialized form so that re-rendering the sidecar is exact
    svg = render_svg(json.loads(text))
    path = Path(path)
    side = path.with_name(path.name + ".json")
    side.write_text(text)
    path.write_bytes(svg)
    return PlotArtifact(kind, path, side, svg)


def render_sidecar(sidecar_path, svg_path=None) -> PlotArtifact:
    sidecar_path = Path(sidecar_path)
    data = json.loads(sidecar_path.read_text())
    if svg_path is None:
        name = sidecar_path.name
        svg_path = sidecar_path.with_name(name[:-5] if name.endswith(".json") else name + ".svg")
    svg = render_svg(data)
    Path(svg_path).write_bytes(svg)
    return PlotArtifact(data["kind"], Path(svg_path), sidecar_path, svg)
