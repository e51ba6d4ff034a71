"""Machine-readable run reports.

Each CLI invocation can emit one JSON document capturing everything
needed to reproduce and audit the run: tool version, the fully resolved
parameters (defaults included), every seed consumed, and SHA-256 digests
of input and output files, plus the numeric results.  Serialization is
key-sorted and timestamp-free so identical runs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json

from . import __version__

SCHEMA_RESOURCE = "report_schema.json"


def file_digest(path) -> str:
    """Hex SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def file_ref(path) -> dict:
    return {"path": str(path), "sha256": file_digest(path)}


def curve_section(curve) -> dict:
    return {
        "mode": curve.mode,
        "n_windows": int(curve.n_windows),
        "radii": [float(r) for r in curve.radii],
        "mean": [float(m) for m in curve.mean],
        "variance": [float(v) for v in curve.variance],
    }


def fit_section(fit) -> dict:
    return {
        "alpha": float(fit.alpha),
        "log_prefactor": float(fit.log_prefactor),
        "r_squared": float(fit.r_squared),
        "n_points": int(fit.n_points),
        "fit_range": [float(fit.fit_range[0]), float(fit.fit_range[1])],
    }


def class_section(order) -> dict:
    return {
        "label": order.label,
        "alpha": float(order.alpha),
        "dim": int(order.dim),
        "mode": order.mode,
    }


def cell_stats_section(stats) -> dict:
    return {
        "n_cells": int(stats.n_cells),
        "mean_area": float(stats.mean_area),
        "cv_area": float(stats.cv_area),
        "mean_edge_length": float(stats.mean_edge_length),
        "cv_edge_length": float(stats.cv_edge_length),
        "side_histogram": {str(k): int(v)
                           for k, v in stats.side_histogram.items()},
    }


def field_section(field) -> dict:
    ny, nx = field.bits.shape
    return {
        "pixels": [int(nx), int(ny)],
        "pixel_size": float(field.pixel_size),
        "dark_fraction": float(field.dark_fraction),
        "periodic_asserted": bool(field.periodic_asserted),
    }


def build_report(command: str, params: dict, seeds: dict, *,
                 inputs=(), outputs=(), curve=None, fit=None, order=None,
                 cell_stats=None, field=None, notes=()) -> dict:
    report = {
        "tool": "hupa",
        "version": __version__,
        "command": command,
        "params": params,
        "seeds": {k: int(v) for k, v in seeds.items()},
        "inputs": [file_ref(p) for p in inputs],
        "outputs": [file_ref(p) for p in outputs],
    }
    if curve is not None:
        report["curve"] = curve_section(curve)
    if fit is not None:
        report["fit"] = fit_section(fit)
    if order is not None:
        report["class"] = class_section(order)
    if cell_stats is not None:
        report["cell_stats"] = cell_stats_section(cell_stats)
    if field is not None:
        report["field"] = field_section(field)
    if notes:
        report["notes"] = list(notes)
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def write_report(report: dict, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_json(report))


def load_schema() -> dict:
    from importlib.resources import files

    text = files("hupa").joinpath(SCHEMA_RESOURCE).read_text("utf-8")
    return json.loads(text)


def validate_report(report: dict):
    """Check a report against the shipped schema (needs jsonschema)."""
    import jsonschema

    jsonschema.validate(report, load_schema())
