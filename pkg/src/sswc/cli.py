"""Command-line pipeline: one subcommand per stage plus ``pipeline``.

Configuration precedence is flag > config file (TOML) > built-in default.
Every invocation writes a JSON manifest with the config snapshot, stage
timings and SHA-256 digests of its inputs and outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import analysis, prescription, raster, rowdetect, sprayersim, synthfield, weedmap
from .errors import (ConfigError, DecodeError, FormatError, GeoreferenceError,
                     InsufficientDataError, InvalidInputError, OutOfBoundsError,
                     UndefinedOrientationError)
from .render import render_overlay

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_VALIDATION = 4

INCH_M = 0.0254
FOOT_M = 0.3048
GAL_PER_AC_TO_L_PER_HA = 9.3540

# suffix -> (metric suffix, factor)
_UNIT_SUFFIXES = {
    "_in": ("_m", INCH_M),
    "_ft": ("_m", FOOT_M),
    "_gal_per_ac": ("_l_per_ha", GAL_PER_AC_TO_L_PER_HA),
    "_km_h": ("_m_s", 1.0 / 3.6),
}


# ----------------------------------------------------------------- config

@dataclass(frozen=True)
class SegmentConfig:
    threshold: float = raster.DEFAULT_THRESHOLD


@dataclass(frozen=True)
class RowDetectConfig:
    tile_width: int = 3000
    tile_height: int = 2000
    tile_col_offset: int = 0
    tile_row_offset: int = 0
    row_spacing_m: float = rowdetect.DEFAULT_ROW_SPACING_M
    smooth_window: Optional[int] = None
    min_distance_px: Optional[int] = None
    min_prominence: float = 0.1
    merge: bool = False
    refine_peaks: bool = False
    merge_min_separation_m: Optional[float] = None
    match_tolerance_m: Optional[float] = None

    def tile_spec(self):
        return rowdetect.TileSpec(self.tile_width, self.tile_height,
                                  self.tile_col_offset, self.tile_row_offset)

    def peak_params(self, gsd_m):
        base = rowdetect.PeakParams.for_row_spacing(self.row_spacing_m, gsd_m, self.min_prominence)
        return rowdetect.PeakParams(
            base.smooth_window if self.smooth_window is None else self.smooth_window,
            base.min_distance if self.min_distance_px is None else self.min_distance_px,
            self.min_prominence)

    @property
    def merge_separation(self):
        if self.merge_min_separation_m is not None:
            return self.merge_min_separation_m
        return 0.4 * self.row_spacing_m

    @property
    def match_tolerance(self):
        if self.match_tolerance_m is not None:
            return self.match_tolerance_m
        return 0.25 * self.row_spacing_m


@dataclass(frozen=True)
class WeedMapConfig:
    buffer_half_width_m: float = 3.5 * INCH_M
    connectivity: int = 8


@dataclass(frozen=True)
class PrescriptionConfig:
    cell_across_m: float = 0.509
    cell_along_m: float = 10 * FOOT_M
    travel_axis: str = "y"
    spray_rate_l_per_ha: float = prescription.DEFAULT_SPRAY_RATE
    origin_x_m: Optional[float] = None
    origin_y_m: Optional[float] = None
    extent_m: Optional[list] = None  # [xmin, ymin, xmax, ymax]; default = weed mask extent

    def grid_spec(self):
        origin = None
        if self.origin_x_m is not None or self.origin_y_m is not None:
            if self.origin_x_m is None or self.origin_y_m is None:
                raise ConfigError("origin_x_m and origin_y_m must be given together")
            origin = (self.origin_x_m, self.origin_y_m)
        return prescription.GridSpec(self.cell_across_m, self.cell_along_m, origin, self.travel_axis)


@dataclass(frozen=True)
class RunSection:
    threads: int = 1


SECTIONS = {
    "segment": SegmentConfig,
    "rowdetect": RowDetectConfig,
    "weedmap": WeedMapConfig,
    "prescription": PrescriptionConfig,
    "sprayer": sprayersim.SprayerConfig,
    "synth": synthfield.FieldSpec,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    rowdetect: RowDetectConfig = field(default_factory=RowDetectConfig)
    weedmap: WeedMapConfig = field(default_factory=WeedMapConfig)
    prescription: PrescriptionConfig = field(default_factory=PrescriptionConfig)
    sprayer: sprayersim.SprayerConfig = field(default_factory=sprayersim.SprayerConfig)
    synth: synthfield.FieldSpec = field(default_factory=synthfield.FieldSpec)
    run: RunSection = field(default_factory=RunSection)

    def snapshot(self):
        return {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}


def _field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _base_type(tp):
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    if typing.get_origin(tp) is typing.Union and len(args) == 1:
        return args[0]
    return tp


def _coerce(section, key, value, tp):
    base = _base_type(tp)
    where = f"[{section}].{key}"
    if base is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean, got {value!r}")
        return value
    if base is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if base is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if base is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if base in (list, tuple) or typing.get_origin(base) in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list, got {value!r}")
        return [float(v) for v in value]
    return value


def _normalise_units(section, table):
    out = {}
    for key, value in table.items():
        for suffix, (metric, factor) in _UNIT_SUFFIXES.items():
            if key.endswith(suffix):
                new = key[: -len(suffix)] + metric
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"[{section}].{key} must be a number")
                if new in table or new in out:
                    raise ConfigError(f"[{section}] sets both {key} and {new}")
                out[new] = float(value) * factor
                break
        else:
            out[key] = value
    return out


def build_config(file_tables=None, overrides=None):
    """Merge defaults, config-file tables and flag overrides into a validated RunConfig."""
    file_tables = file_tables or {}
    overrides = overrides or {}
    unknown = set(file_tables) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    sections = {}
    for name, cls in SECTIONS.items():
        types = _field_types(cls)
        table = file_tables.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        table = _normalise_units(name, table)
        bad = set(table) - set(types)
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {sorted(bad)}")
        values = {k: _coerce(name, k, v, types[k]) for k, v in table.items()}
        values.update(overrides.get(name, {}))
        try:
            sections[name] = cls(**values)
        except (InvalidInputError, TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}]: {exc}") from None
    cfg = RunConfig(**sections)
    _validate(cfg)
    return cfg


def _validate(cfg):
    # build every derived parameter object once so bad values fail before any stage runs
    if cfg.run.threads < 1:
        raise ConfigError("[run].threads must be >= 1")
    if cfg.weedmap.connectivity not in (4, 8):
        raise ConfigError("[weedmap].connectivity must be 4 or 8")
    rc = cfg.rowdetect
    try:
        rc.tile_spec()
        rc.peak_params(cfg.synth.gsd_m)
        weedmap.BufferSpec(cfg.weedmap.buffer_half_width_m)
        cfg.prescription.grid_spec()
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    if rc.row_spacing_m <= 0 or rc.merge_separation <= 0 or rc.match_tolerance <= 0:
        raise ConfigError("[rowdetect] spacing, merge separation and match tolerance must be > 0")
    ext = cfg.prescription.extent_m
    if ext is not None and (len(ext) != 4 or not (ext[2] > ext[0] and ext[3] > ext[1])):
        raise ConfigError(f"[prescription].extent_m must be [xmin, ymin, xmax, ymax], got {ext}")


def load_config(path=None, overrides=None):
    tables = {}
    if path is not None:
        path = Path(path)
        try:
            tables = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return build_config(tables, overrides)


def _flag_name(section, key):
    if section == "synth" and key != "seed":
        return f"synth-{key}".replace("_", "-")
    return key.replace("_", "-")


def _add_param_flags(parser):
    group = parser.add_argument_group("parameter overrides (flag > config file > default)")
    for section, cls in SECTIONS.items():
        if section == "run":  # covered by --threads
            continue
        for key, tp in _field_types(cls).items():
            base = _base_type(tp)
            dest = f"param__{section}__{key}"
            flag = "--" + _flag_name(section, key)
            if base is bool:
                group.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction,
                                   default=argparse.SUPPRESS)
            elif base in (int, float, str):
                group.add_argument(flag, dest=dest, type=base, default=argparse.SUPPRESS,
                                   metavar=base.__name__.upper())
            else:
                group.add_argument(flag, dest=dest, type=float, nargs=4,
                                   default=argparse.SUPPRESS, metavar="V")


def _collect_overrides(args):
    out = {}
    for name, value in vars(args).items():
        if name.startswith("param__"):
            _, section, key = name.split("__", 2)
            out.setdefault(section, {})[key] = list(value) if isinstance(value, list) else value
    if getattr(args, "threads", None) is not None:
        out.setdefault("run", {})["threads"] = args.threads
    return out


# ------------------------------------------------------------- manifests

def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class StageRun:
    """Tracks declared outputs, timings and digests for one invocation."""

    def __init__(self, name, config):
        self.name = name
        self.config = config
        self.inputs = []
        self.outputs = []
        self.timings = {}

    def input(self, path):
        self.inputs.append(Path(path))
        return Path(path)

    def output(self, path, *sidecars):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(path)
        self.outputs.extend(Path(s) for s in sidecars)
        return path

    def timed(self, label):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[label] = run.timings.get(label, 0.0) + time.perf_counter() - self.t0
                return False

        return _Timer()

    def cleanup(self):
        for p in self.outputs:
            try:
                p.unlink()
            except FileNotFoundError:
                pass

    def manifest(self):
        return {
            "artifact_version": __version__,
            "stage": self.name,
            "config": self.config.snapshot(),
            "timings_s": self.timings,
            "inputs": {str(p): file_digest(p) for p in self.inputs if p.exists()},
            "outputs": {str(p): file_digest(p) for p in self.outputs if p.exists()},
        }


def _with_world(path):
    return [path, raster.world_file_path(path)]


# ----------------------------------------------------------------- stages

def stage_segment(run, cfg, input_path, output_path, exgi_path=None):
    rgb = raster.load_raster(run.input(input_path))
    run.input(raster.world_file_path(input_path))
    with run.timed("segment"):
        field_ = raster.compute_exgi(rgb)
        mask = raster.threshold_mask(field_, cfg.segment.threshold)
    raster.save_mask(mask, run.output(*_with_world(output_path)))
    if exgi_path:
        out = run.output(exgi_path, raster.world_file_path(exgi_path),
                         Path(exgi_path).with_suffix(".range.txt"))
        raster.save_field(field_, out)
    n = mask.popcount()
    return {"vegetation_pixels": n, "vegetation_fraction": n / mask.bits.size}


def stage_detect_rows(run, cfg, mask_path, output_path):
    mask = raster.load_mask(run.input(mask_path))
    rc = cfg.rowdetect
    with run.timed("detect-rows"):
        lines = rowdetect.detect_rows(mask, rc.tile_spec(), rc.peak_params(mask.geo.pixel_size_x),
                                      threads=cfg.run.threads, refine=rc.refine_peaks)
        n_raw = len(lines)
        lines = rowdetect.merge_duplicate_lines(lines, rc.merge_separation, rc.merge)
    rowdetect.write_lines_csv(lines, run.output(output_path))
    return {"lines_detected": n_raw, "lines_written": len(lines)}


def stage_weed_map(run, cfg, mask_path, lines_path, output_path, regions_path=None):
    veg = raster.load_mask(run.input(mask_path))
    lines = rowdetect.read_lines_csv(run.input(lines_path))
    with run.timed("weed-map"):
        zone = weedmap.buffer_rows(lines, weedmap.BufferSpec(cfg.weedmap.buffer_half_width_m),
                                   veg.geo, veg.width, veg.height)
        weeds = weedmap.extract_weeds(veg, zone)
    raster.save_mask(weeds, run.output(*_with_world(output_path)))
    report = {"weed_pixels": weeds.popcount(), "weed_area_m2": weedmap.mask_area_m2(weeds)}
    if regions_path:
        with run.timed("regions"):
            regions = weedmap.connected_components(weeds, cfg.weedmap.connectivity)
        weedmap.write_regions_csv(regions, run.output(regions_path))
        report["weed_regions"] = len(regions)
    return report


def stage_prescribe(run, cfg, weeds_path, output_path, stats_path=None):
    weeds = raster.load_mask(run.input(weeds_path))
    pc = cfg.prescription
    extent = tuple(pc.extent_m) if pc.extent_m is not None else weeds.extent()
    with run.timed("prescribe"):
        pmap = prescription.build_grid(extent, pc.grid_spec(), pc.spray_rate_l_per_ha)
        pmap = prescription.assign_rates(pmap, weeds)
        stats = prescription.prescription_stats(pmap)
    prescription.export_prescription(pmap, run.output(output_path))
    if stats_path:
        Path(run.output(stats_path)).write_text(stats.to_report())
    return dataclasses.asdict(stats)


def stage_simulate(run, cfg, rx_path, output_path):
    pmap = prescription.import_prescription(run.input(rx_path))
    with run.timed("simulate-spray"):
        applied = sprayersim.simulate(pmap, cfg.sprayer)
        report = sprayersim.application_accuracy(applied, pmap)
    sprayersim.export_as_applied(applied, run.output(output_path))
    return dataclasses.asdict(report)


def read_counts(path):
    vals = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(",")
        try:
            vals[key.strip().lower()] = int(value)
        except ValueError:
            raise FormatError(f"bad count line {line!r}", f"{path}:{lineno}") from None
    missing = {"tp", "fp", "fn"} - set(vals)
    if missing:
        raise FormatError(f"missing counts {sorted(missing)}", str(path))
    return vals["tp"], vals["fp"], vals["fn"], vals.get("tn", 0)


def stage_evaluate(run, cfg, detected=None, truth=None, counts=None, mask_path=None):
    if counts:
        ev = rowdetect.evaluation_from_counts(*read_counts(run.input(counts)))
        return ev
    if not (detected and truth):
        raise ConfigError("evaluate-rows needs --counts or both --detected and --truth")
    det = rowdetect.read_lines_csv(run.input(detected))
    tru = rowdetect.read_lines_csv(run.input(truth))
    if mask_path:
        mask = raster.load_mask(run.input(mask_path))
        tru = rowdetect.split_lines_by_tiles(tru, mask.width, mask.height, mask.geo,
                                             cfg.rowdetect.tile_spec())
    return rowdetect.evaluate_detection(det, tru, cfg.rowdetect.match_tolerance)


def stage_synth(run, cfg, output_path, rows_path, weeds_path):
    with run.timed("synth"):
        rgb, truth = synthfield.generate(cfg.synth)
    raster.save_raster(rgb, run.output(*_with_world(output_path)))
    synthfield.truth_to_files(truth, run.output(rows_path), run.output(weeds_path))
    return {"rows": len(truth.row_lines), "weeds": int(len(truth.weeds)),
            "width_px": rgb.width, "height_px": rgb.height}


PIPELINE_FILES = {
    "mask": "vegetation.png",
    "lines": "rows.csv",
    "weeds": "weeds.png",
    "regions": "weed_regions.csv",
    "prescription": "prescription.geojson",
    "stats": "prescription_stats.txt",
    "as_applied": "as_applied.geojson",
}


def stage_pipeline(run, cfg, input_path, outdir, simulate=True):
    outdir = Path(outdir)
    f = {k: outdir / v for k, v in PIPELINE_FILES.items()}
    report = {}
    report.update(stage_segment(run, cfg, input_path, f["mask"]))
    report.update(stage_detect_rows(run, cfg, f["mask"], f["lines"]))
    report.update(stage_weed_map(run, cfg, f["mask"], f["lines"], f["weeds"], f["regions"]))
    report.update(stage_prescribe(run, cfg, f["weeds"], f["prescription"], f["stats"]))
    if simulate:
        acc = stage_simulate(run, cfg, f["prescription"], f["as_applied"])
        report.update({f"spray_{k}": v for k, v in acc.items()})
    return report


# ---------------------------------------------------------------- parsing

def _kv_report(d):
    if hasattr(d, "to_report"):
        return d.to_report()
    return "".join(f"{k}={'undefined' if v is None else repr(v)}\n" for k, v in d.items())


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--report", type=Path, help="write the key=value report here")
    common.add_argument("--manifest", type=Path, help="manifest path (default: next to the main output)")
    common.add_argument("--threads", type=int, default=None)
    _add_param_flags(common)

    p = argparse.ArgumentParser(prog="sswc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("segment", parents=[common], help="RGB orthomosaic -> vegetation mask")
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--output", required=True, type=Path)
    s.add_argument("--exgi-output", type=Path)

    s = sub.add_parser("detect-rows", parents=[common], help="vegetation mask -> row lines CSV")
    s.add_argument("--mask", required=True, type=Path)
    s.add_argument("--output", required=True, type=Path)

    s = sub.add_parser("weed-map", parents=[common], help="mask + rows -> weed mask")
    s.add_argument("--mask", required=True, type=Path)
    s.add_argument("--lines", required=True, type=Path)
    s.add_argument("--output", required=True, type=Path)
    s.add_argument("--regions", type=Path)

    s = sub.add_parser("prescribe", parents=[common], help="weed mask -> prescription GeoJSON")
    s.add_argument("--weeds", required=True, type=Path)
    s.add_argument("--output", required=True, type=Path)
    s.add_argument("--stats", type=Path)

    s = sub.add_parser("simulate-spray", parents=[common], help="replay a prescription")
    s.add_argument("--prescription", required=True, type=Path)
    s.add_argument("--output", required=True, type=Path)

    s = sub.add_parser("evaluate-rows", parents=[common], help="score row lines against truth")
    s.add_argument("--detected", type=Path)
    s.add_argument("--truth", type=Path)
    s.add_argument("--counts", type=Path, help="key=value file with tp, fp, fn[, tn]")
    s.add_argument("--mask", type=Path, help="clip truth lines to this mask's tile columns")

    s = sub.add_parser("stats", parents=[common], help="paired t-test on plot observations")
    s.add_argument("--observations", required=True, type=Path)
    s.add_argument("--alpha", type=float, default=0.05)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic field")
    s.add_argument("--output", required=True, type=Path)
    s.add_argument("--truth-rows", required=True, type=Path)
    s.add_argument("--truth-weeds", required=True, type=Path)

    s = sub.add_parser("pipeline", parents=[common], help="segment -> rows -> weeds -> prescription")
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--outdir", required=True, type=Path)
    s.add_argument("--no-simulate", action="store_true")

    s = sub.add_parser("render", parents=[common], help="overlay layers on the input image")
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--output", required=True, type=Path)
    s.add_argument("--lines", type=Path)
    s.add_argument("--weeds", type=Path)
    s.add_argument("--prescription", type=Path)
    return p


def _dispatch(args, run, cfg):
    c = args.command
    if c == "segment":
        return stage_segment(run, cfg, args.input, args.output, args.exgi_output), args.output
    if c == "detect-rows":
        return stage_detect_rows(run, cfg, args.mask, args.output), args.output
    if c == "weed-map":
        return stage_weed_map(run, cfg, args.mask, args.lines, args.output, args.regions), args.output
    if c == "prescribe":
        return stage_prescribe(run, cfg, args.weeds, args.output, args.stats), args.output
    if c == "simulate-spray":
        return stage_simulate(run, cfg, args.prescription, args.output), args.output
    if c == "evaluate-rows":
        ev = stage_evaluate(run, cfg, args.detected, args.truth, args.counts, args.mask)
        return ev, args.report or args.counts or args.detected
    if c == "stats":
        obs = analysis.read_observations_csv(run.input(args.observations))
        res = analysis.paired_t_test(analysis.pair_observations(obs), args.alpha)
        out = dataclasses.asdict(res)
        out["group_ratio"] = analysis.group_ratio(obs)
        return out, args.report or args.observations
    if c == "synth":
        return stage_synth(run, cfg, args.output, args.truth_rows, args.truth_weeds), args.output
    if c == "pipeline":
        rep = stage_pipeline(run, cfg, args.input, args.outdir, not args.no_simulate)
        return rep, Path(args.outdir) / "pipeline"
    if c == "render":
        base = raster.load_raster(run.input(args.input))
        lines = rowdetect.read_lines_csv(run.input(args.lines)) if args.lines else None
        weeds = raster.load_mask(run.input(args.weeds)) if args.weeds else None
        pmap = prescription.import_prescription(run.input(args.prescription)) if args.prescription else None
        with run.timed("render"):
            img = render_overlay(base, lines, weeds, pmap)
        raster.save_raster(img, run.output(*_with_world(args.output)))
        return {"width_px": img.width, "height_px": img.height}, args.output
    raise ConfigError(f"unknown command {c}")


def _error_class(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, PermissionError, DecodeError,
                        GeoreferenceError, FormatError, OutOfBoundsError, InvalidInputError)):
        return EXIT_INPUT
    if isinstance(exc, (InsufficientDataError, UndefinedOrientationError, ArithmeticError,
                        ValueError)):
        return EXIT_VALIDATION
    return None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    run = None
    try:
        cfg = load_config(args.config, _collect_overrides(args))
        run = StageRun(args.command, cfg)
        if args.config:
            run.input(args.config)
        result, anchor = _dispatch(args, run, cfg)
        text = _kv_report(result)
        if args.report:
            Path(run.output(args.report)).write_text(text)
        manifest_path = args.manifest or Path(str(anchor) + ".manifest.json")
        manifest = run.manifest()
        run.output(manifest_path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        sys.stdout.write(text)
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _error_class(exc)
        if code is None:
            raise
        if run is not None:
            run.cleanup()
        err = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
