"""Command-line front end: batch derivation, single renders, viewpoint grids.

Subcommands
-----------
derive   one conditioning map per manifest row (CSV or JSON-lines)
render   single map from a mesh under explicit imaging parameters
grid     full azimuth x depression x polarization sweep with an index JSON
inspect  print a sidecar human-readably

Row and cell failures never abort a batch; they are recorded in the summary
or index and reflected in the exit code (0 only when everything succeeded).
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing
import sys
from dataclasses import dataclass
from pathlib import Path

from ._version import __version__
from .config import CONFIG_ENV_VAR, Config, load_config, parse_overrides
from .core import format_text_condition, validate_params
from .derivation import derive_gecm
from .errors import GecmError, GridSpecError, ManifestParseError
from .geometry import load_mesh
from .io import load_gray_image, read_json, save_png_rgb, write_json
from .raster import build_sidecar, render_from_mesh, render_gecm
from .scattering import dump_paths_jsonl

_MANIFEST_FIELDS = (
    "image_path",
    "class_label",
    "azimuth_deg",
    "depression_deg",
    "polarization",
    "band_label",
    "resolution_m_per_px",
)


@dataclass(frozen=True)
class ManifestRow:
    image_path: str
    class_label: str | None = None
    azimuth_deg: str | None = None
    depression_deg: str | None = None
    polarization: str | None = None
    band_label: str | None = None
    resolution_m_per_px: str | None = None


def read_manifest(path: Path) -> list[ManifestRow]:
    """Parse a CSV (with header) or JSON-lines manifest."""
    rows: list[ManifestRow] = []
    try:
        if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ManifestParseError(f"{path}:{lineno}: {exc}") from None
                rows.append(_row_from_mapping(rec, f"{path}:{lineno}"))
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or "image_path" not in reader.fieldnames:
                    raise ManifestParseError(f"{path}: CSV manifest needs a header with image_path")
                for lineno, rec in enumerate(reader, 2):
                    rows.append(_row_from_mapping(rec, f"{path}:{lineno}"))
    except OSError as exc:
        raise ManifestParseError(f"{path}: {exc}") from None
    if not rows:
        raise ManifestParseError(f"{path}: manifest is empty")
    return rows


def _row_from_mapping(rec: dict, where: str) -> ManifestRow:
    if not isinstance(rec, dict) or not rec.get("image_path"):
        raise ManifestParseError(f"{where}: row lacks image_path")
    known = {k: (str(v) if v not in (None, "") else None) for k, v in rec.items() if k in _MANIFEST_FIELDS}
    return ManifestRow(**known)


def _row_params(row: ManifestRow):
    raw = {
        "azimuth_deg": row.azimuth_deg,
        "class_label": row.class_label,
        "band_label": row.band_label,
    }
    if row.depression_deg is not None:
        raw["depression_deg"] = row.depression_deg
    if row.polarization is not None:
        raw["polarization"] = row.polarization
    if row.resolution_m_per_px is not None:
        raw["resolution_m_per_px"] = row.resolution_m_per_px
    return validate_params(raw)


def _derive_one(args: tuple) -> dict:
    row, manifest_dir, out_dir, cfg = args
    result = {"image_path": row.image_path, "status": "ok"}
    try:
        params = _row_params(row)
        image_path = Path(row.image_path)
        if not image_path.is_absolute():
            image_path = manifest_dir / image_path
        if not image_path.exists():
            raise FileNotFoundError(f"image not found: {image_path}")
        image, depth = load_gray_image(image_path)
        row_cfg = cfg if cfg.hdr_log or depth <= 8 else cfg.replace(hdr_log=True)
        gecm = derive_gecm(image, params, row_cfg)
        raster = render_gecm(
            gecm.skeleton, gecm.scatterers, gecm.canvas_height, gecm.canvas_width,
            kappa=row_cfg.log_scale_kappa,
        )
        sidecar = build_sidecar(gecm, params, row_cfg)
        sidecar["source_image"] = str(image_path)
        sidecar["text_condition"] = format_text_condition(params)
        stem = image_path.stem + "_gecm"
        raster_path = out_dir / f"{stem}.png"
        sidecar_path = out_dir / f"{stem}.json"
        save_png_rgb(raster_path, raster)
        write_json(sidecar_path, sidecar)
        result["raster"] = raster_path.name
        result["sidecar"] = sidecar_path.name
    except GecmError as exc:
        result.update(status="error", error=str(exc), error_code=exc.code)
    except (FileNotFoundError, OSError, ValueError) as exc:
        result.update(status="error", error=str(exc), error_code=type(exc).__name__)
    return result


def cmd_derive(ns: argparse.Namespace) -> int:
    cfg = _load_cfg(ns)
    manifest = Path(ns.manifest)
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = read_manifest(manifest)
    tasks = [(row, manifest.parent, out_dir, cfg) for row in rows]
    results = _run_pool(_derive_one, tasks, ns.workers)
    n_err = sum(1 for r in results if r["status"] != "ok")
    summary = {
        "tool": "gecm",
        "version": __version__,
        "manifest": str(manifest),
        "config": cfg.to_dict(),
        "rows": results,
        "n_ok": len(results) - n_err,
        "n_error": n_err,
    }
    summary_path = out_dir / "summary.json"
    write_json(summary_path, summary)
    print(f"derive: {summary['n_ok']} ok, {n_err} errors -> {summary_path}")
    return 1 if n_err else 0


def cmd_render(ns: argparse.Namespace) -> int:
    cfg = _load_cfg(ns)
    params = validate_params(
        {
            "azimuth_deg": ns.azimuth,
            "depression_deg": ns.depression,
            "wavelength_m": ns.wavelength,
            "polarization": ns.polarization,
            "resolution_m_per_px": ns.resolution,
            "band_label": ns.band,
            "class_label": ns.class_label,
        }
    )
    mesh = load_mesh(ns.mesh)
    sink: list = []
    gecm, raster, sidecar = render_from_mesh(mesh, params, cfg, path_batch_out=sink)
    sidecar["text_condition"] = format_text_condition(params)
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_png_rgb(out, raster)
    sidecar_path = out.with_suffix(".json")
    write_json(sidecar_path, sidecar)
    if ns.dump_paths:
        with open(ns.dump_paths, "w", encoding="utf-8") as fh:
            dump_paths_jsonl(sink[0], fh)
    print(sidecar_path)
    return 0


def _grid_cells(ns: argparse.Namespace) -> list[tuple[float, float, str]]:
    if ns.az_step <= 0:
        raise GridSpecError("azimuth step must be > 0")
    depressions = [float(v) for v in str(ns.depressions).split(",") if v.strip()]
    polarizations = [p.strip().upper() for p in str(ns.polarizations).split(",") if p.strip()]
    if not depressions or not polarizations:
        raise GridSpecError("depression and polarization lists must be non-empty")
    azimuths = []
    a = float(ns.az_start)
    while a <= float(ns.az_stop) + 1e-9:
        azimuths.append(a)
        a += float(ns.az_step)
    if not azimuths:
        raise GridSpecError("empty azimuth range")
    cells = [(az, dep, pol) for az in azimuths for dep in depressions for pol in polarizations]
    names = {_cell_name(*cell) for cell in cells}
    if len(names) != len(cells):
        raise GridSpecError("grid cells collide after angle rounding; adjust the steps")
    return cells


def _cell_name(azimuth: float, depression: float, polarization: str) -> str:
    return f"az{int(round(azimuth)):03d}_dep{int(round(depression)):02d}_{polarization}"


_GRID_MESH = None  # populated before forking the worker pool


def _grid_pool_init(mesh_path: str) -> None:
    global _GRID_MESH
    _GRID_MESH = load_mesh(mesh_path)


def _render_cell(args: tuple) -> dict:
    azimuth, depression, pol, out_dir, cfg = args
    cell = {"azimuth_deg": azimuth, "depression_deg": depression, "polarization": pol, "status": "ok"}
    try:
        params = validate_params(
            {"azimuth_deg": azimuth, "depression_deg": depression, "polarization": pol}
        )
        gecm, raster, sidecar = render_from_mesh(_GRID_MESH, params, cfg)
        sidecar["text_condition"] = format_text_condition(params)
        name = _cell_name(azimuth, depression, pol)
        save_png_rgb(out_dir / f"{name}.png", raster)
        write_json(out_dir / f"{name}.json", sidecar)
        cell["raster"] = f"{name}.png"
        cell["sidecar"] = f"{name}.json"
    except GecmError as exc:
        cell.update(status="error", error=str(exc), error_code=exc.code)
    return cell


def cmd_grid(ns: argparse.Namespace) -> int:
    cfg = _load_cfg(ns)
    cells = _grid_cells(ns)
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _grid_pool_init(ns.mesh)
    tasks = [(az, dep, pol, out_dir, cfg) for az, dep, pol in cells]
    results = _run_pool(_render_cell, tasks, ns.workers)
    n_err = sum(1 for c in results if c["status"] != "ok")
    index = {
        "tool": "gecm",
        "version": __version__,
        "mesh": str(ns.mesh),
        "config": cfg.to_dict(),
        "cells": results,
        "n_ok": len(results) - n_err,
        "n_error": n_err,
    }
    index_path = out_dir / "index.json"
    write_json(index_path, index)
    print(f"grid: {index['n_ok']} ok, {n_err} errors -> {index_path}")
    return 1 if n_err else 0


def cmd_inspect(ns: argparse.Namespace) -> int:
    sidecar = read_json(ns.sidecar)
    params = sidecar.get("params", {})
    print(f"provenance : {sidecar.get('provenance')}")
    print(f"tool       : {sidecar.get('tool')} {sidecar.get('version')}")
    print(
        "viewpoint  : azimuth {azimuth_deg} deg, depression {depression_deg} deg, "
        "{polarization}, {resolution_m_per_px} m/px".format(**params)
    )
    if sidecar.get("text_condition"):
        print(f"text       : {sidecar['text_condition']}")
    canvas = sidecar.get("canvas", {})
    print(f"canvas     : {canvas.get('width')} x {canvas.get('height')}")
    print("keypoints  :")
    for name, (x, y) in sidecar.get("keypoints_px", {}).items():
        print(f"  {name:10s} ({x:8.2f}, {y:8.2f})")
    scats = sidecar.get("scatterers", [])
    print(f"scatterers : {len(scats)}")
    for s in scats:
        db = s.get("weight_db")
        db_str = f"{db:7.2f} dB" if db is not None else "      --"
        print(f"  ({s['x_px']:7.1f}, {s['y_px']:7.1f})  {db_str}  intensity {s['intensity']:.3f}")
    return 0


def _run_pool(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=workers) as pool:
        return pool.map(fn, tasks)


def _load_cfg(ns: argparse.Namespace) -> Config:
    cfg = load_config(ns.config)
    if getattr(ns, "set", None):
        cfg = cfg.replace(**parse_overrides(ns.set))
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None,
                   help=f"flat key=value config file (default: ${CONFIG_ENV_VAR})")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config value (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gecm", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"gecm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="derive maps from a manifest of SAR images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.set_defaults(fn=cmd_derive)

    p = sub.add_parser("render", help="render one map from a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True, help="output PNG path (sidecar written next to it)")
    p.add_argument("--azimuth", type=float, required=True)
    p.add_argument("--depression", type=float, default=None)
    p.add_argument("--wavelength", type=float, default=None)
    p.add_argument("--polarization", default=None)
    p.add_argument("--resolution", type=float, default=None)
    p.add_argument("--band", default=None)
    p.add_argument("--class-label", default=None)
    p.add_argument("--dump-paths", default=None, help="write traced paths as JSON-lines")
    _add_common(p)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("grid", help="render a full viewpoint grid")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--az-start", type=float, default=0.0)
    p.add_argument("--az-stop", type=float, default=350.0)
    p.add_argument("--az-step", type=float, default=10.0)
    p.add_argument("--depressions", default="20,30,40,50,60,70")
    p.add_argument("--polarizations", default="HH")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.set_defaults(fn=cmd_grid)

    p = sub.add_parser("inspect", help="print a sidecar human-readably")
    p.add_argument("sidecar")
    p.set_defaults(fn=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.fn(ns)
    except GecmError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error [FileNotFound]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
