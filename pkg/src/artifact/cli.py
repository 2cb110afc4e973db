"""Command-line interface wiring the whole toolkit together.

Subcommands: ``synth`` (synthetic scene generation), ``plan`` (candidate
trajectory sheets and plan selection), ``metrics`` (post-op record
evaluation), ``stats`` and ``report`` (reference-table reproduction),
``power`` (sample-size search), ``export-scene`` (viewer bundle export),
and ``serve`` (local HTTP endpoint for the browser viewer).

Exit codes: 0 on success, 1 on a computation or data failure (with a
single-line ``error: ...`` message on stderr), 2 on a usage error.  Every
subcommand is idempotent for fixed inputs and seed and never modifies its
input files; ``serve`` is the one stateful command (it accepts exactly one
selection record and writes it once).
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path
from typing import Mapping

import click
import jsonschema
import numpy as np

from . import cohort as cohort_mod
from . import geometry, planning, postop
from .electrode import ArraySpec, build_resting_shape
from .geometry import GeometryError, ParameterError, SpiralParams

SELECTION_SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "selection_record.schema.json"

#: Environment variable overriding the cohort data directory.
DATA_DIR_ENV = "ARTIFACT_DATA_DIR"

_TIMESTAMP_PATTERN = re.compile(
    r"^[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}(\.[0-9]+)?(Z|[+-][0-9]{2}:[0-9]{2})$"
)

_SITE_ALIASES = {
    "rw_center": planning.EntrySite.RW_CENTER,
    "rw": planning.EntrySite.RW_CENTER,
    "middle": planning.EntrySite.RW_CENTER,
    "slight_extended_rw": planning.EntrySite.SLIGHT_EXTENDED_RW,
    "slight": planning.EntrySite.SLIGHT_EXTENDED_RW,
    "substantial_extended_rw": planning.EntrySite.SUBSTANTIAL_EXTENDED_RW,
    "substantial": planning.EntrySite.SUBSTANTIAL_EXTENDED_RW,
}

_USER_ERRORS = (
    ParameterError,
    GeometryError,
    cohort_mod.CohortFormatError,
    postop.RecordMismatchError,
    jsonschema.ValidationError,
    json.JSONDecodeError,
    OSError,
)


@dataclass(frozen=True)
class RunConfig:
    """Parsed invocation state: paths are resolved and the seed defaults
    to zero before any work starts."""

    subcommand: str
    scene_path: Path | None = None
    out_path: Path | None = None
    cohort_path: Path | None = None
    seed: int = 0
    array_overrides: Mapping[str, float] = field(default_factory=dict)
    tolerance_overrides: Mapping[str, float] = field(default_factory=dict)
    selection: str | None = None


@click.group(name="artifact")
def cli():
    """Insertion planning, post-op evaluation, and cohort statistics."""


def main(argv=None):
    raise SystemExit(run(argv))


def run(argv=None) -> int:
    """Run one CLI invocation and return its exit code."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except _USER_ERRORS as exc:
        message = " ".join(str(exc).split())
        click.echo(f"error: {message}", err=True)
        return 1


# ---------------------------------------------------------------------------
# shared helpers

def _load_scene(scene_path: Path):
    path = Path(scene_path)
    if path.is_file():
        path = path.parent
    return geometry.load_scene(path)


def _array_spec(overrides: Mapping[str, float]) -> ArraySpec:
    return ArraySpec(**{k: v for k, v in overrides.items() if v is not None})


def _plan_pipeline(scene, config: RunConfig):
    shape = build_resting_shape(_array_spec(config.array_overrides))
    tol = config.tolerance_overrides
    registration = planning.register_array(
        scene,
        shape,
        seed=config.seed,
        max_iterations=int(tol.get("max_iterations", 200)),
        rel_tol=tol.get("rel_tol", 1e-8),
    )
    if not registration.feasible:
        click.echo(
            "warning: registered seat violates the wall-clearance budget",
            err=True,
        )
    plans = planning.candidate_plans(scene, shape=shape, registration=registration)
    return shape, registration, plans


def _parse_site(value: str | None) -> planning.EntrySite | None:
    if value is None:
        return None
    try:
        return _SITE_ALIASES[value.strip().lower()]
    except KeyError:
        allowed = ", ".join(sorted(set(_SITE_ALIASES)))
        raise click.BadParameter(
            f"unknown entry site {value!r} (allowed: {allowed})", param_hint="--select"
        ) from None


def _validate_timestamp(ctx, param, value):
    if value is not None and not _TIMESTAMP_PATTERN.match(value):
        raise click.BadParameter(
            "timestamp must be ISO 8601 with an explicit zone, "
            "for example 2024-05-01T12:00:00Z"
        )
    return value


def load_selection_record(path: str | Path) -> dict:
    """Read and schema-validate a plan-selection record file."""
    record = json.loads(Path(path).read_text())
    schema = json.loads(SELECTION_SCHEMA_PATH.read_text())
    jsonschema.validate(record, schema)
    return record


def _cohort_rows(cohort_path):
    return cohort_mod.ingest_cohort(cohort_path)


_COHORT_OPTION = click.option(
    "--cohort",
    "cohort_path",
    envvar=DATA_DIR_ENV,
    type=click.Path(exists=True, path_type=Path),
    default=None,
    help=(
        "Cohort data directory (temporal_bone.csv + clinical.csv). Defaults "
        f"to the packaged data; the {DATA_DIR_ENV} environment variable "
        "overrides the default and the flag overrides both."
    ),
)


def _array_override_options(command):
    for decorator in (
        click.option("--contact-count", type=int, default=None, help="Electrode contact count."),
        click.option("--active-length", type=float, default=None, help="Active array length, mm."),
        click.option("--design-curl", type=float, default=None, help="Design curl of the resting shape, degrees."),
        click.option("--tip-taper", type=float, default=None, help="Tip-to-base spiral shrink factor."),
        click.option("--axial-lead", type=float, default=None, help="Axial climb per full turn, mm."),
    ):
        command = decorator(command)
    return command


def _collect_array_overrides(contact_count, active_length, design_curl, tip_taper, axial_lead):
    return {
        "contact_count": contact_count,
        "active_length": active_length,
        "design_curl": design_curl,
        "tip_taper": tip_taper,
        "axial_lead": axial_lead,
    }


# ---------------------------------------------------------------------------
# synth

@cli.command()
@click.option("--seed", type=int, default=0, show_default=True, help="Anatomy seed.")
@click.option("--turns", type=float, default=900.0, show_default=True, help="Scala tympani span, degrees.")
@click.option("--ring-step-deg", type=float, default=3.0, show_default=True, help="Centerline sampling step, degrees.")
@click.option("--section-count", type=int, default=24, show_default=True, help="Vertices per tube ring.")
@click.option("--duct-radius", type=float, default=0.6, show_default=True, help="Scala duct radius, mm.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("scene_out"), show_default=True, help="Output scene directory.")
def synth(seed, turns, ring_step_deg, section_count, duct_radius, out_path):
    """Generate a synthetic cochlear scene directory."""
    params = SpiralParams(
        turns=turns,
        ring_step_deg=ring_step_deg,
        section_count=section_count,
        duct_radius=duct_radius,
        seed=seed,
    )
    scene = geometry.synth_cochlea(params)
    manifest_path = geometry.save_scene(scene, out_path)
    click.echo(f"wrote {manifest_path}")


# ---------------------------------------------------------------------------
# plan

@cli.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True, path_type=Path), help="Scene directory (or its scene.json).")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("plan_out"), show_default=True, help="Output directory.")
@click.option("--case-id", default=None, help="Case identifier (defaults to the scene directory name).")
@click.option("--seed", type=int, default=0, show_default=True, help="Registration seed.")
@click.option("--select", "select_value", default=None, help="Chosen entry site: rw_center | slight | substantial (or the full names).")
@click.option("--selection", "selection_path", type=click.Path(exists=True, path_type=Path), default=None, help="Existing selection record to apply instead of --select.")
@click.option("--timestamp", callback=_validate_timestamp, default=None, help="Selection timestamp (required with --select; keeps the record reproducible).")
@click.option("--max-iterations", type=int, default=None, help="Registration iteration cap.")
@click.option("--rel-tol", type=float, default=None, help="Registration convergence tolerance.")
@_array_override_options
def plan(scene_path, out_path, case_id, seed, select_value, selection_path, timestamp,
         max_iterations, rel_tol, contact_count, active_length, design_curl,
         tip_taper, axial_lead):
    """Write the three candidate trajectory sheets; optionally apply a
    selection and record it."""
    if select_value is not None and selection_path is not None:
        raise click.UsageError("--select and --selection are mutually exclusive")
    if select_value is not None and timestamp is None:
        raise click.UsageError("--select needs --timestamp so the record is reproducible")

    applied_record = None
    if selection_path is not None:
        applied_record = load_selection_record(selection_path)
        selected_site = _parse_site(applied_record["selected_entry_kind"])
        if case_id is None:
            case_id = applied_record["case_id"]
        elif case_id != applied_record["case_id"]:
            raise ParameterError(
                f"selection record is for case {applied_record['case_id']!r}, "
                f"not {case_id!r}"
            )
    else:
        selected_site = _parse_site(select_value)

    if case_id is None:
        case_id = Path(scene_path).resolve().name
        if case_id == "scene.json":
            case_id = Path(scene_path).resolve().parent.name

    config = RunConfig(
        subcommand="plan",
        scene_path=Path(scene_path),
        out_path=Path(out_path),
        seed=seed,
        array_overrides=_collect_array_overrides(
            contact_count, active_length, design_curl, tip_taper, axial_lead
        ),
        tolerance_overrides={
            k: v
            for k, v in (("max_iterations", max_iterations), ("rel_tol", rel_tol))
            if v is not None
        },
        selection=selected_site.value if selected_site else None,
    )

    scene = _load_scene(config.scene_path)
    _, _, plans = _plan_pipeline(scene, config)
    out = config.out_path
    out.mkdir(parents=True, exist_ok=True)
    written = []
    by_site = {}
    for candidate in plans:
        by_site[candidate.entry_kind] = candidate
        path = out / f"plan_{candidate.entry_kind.value.lower()}.txt"
        path.write_text(planning.emit_plan_text(candidate))
        written.append(path)
    if selected_site is not None:
        chosen = by_site[selected_site]
        selected_path = out / "plan.txt"
        selected_path.write_text(planning.emit_plan_text(chosen))
        written.append(selected_path)
        if applied_record is None:
            record = {
                "case_id": case_id,
                "selected_entry_kind": selected_site.value,
                "timestamp": timestamp,
            }
            jsonschema.validate(record, json.loads(SELECTION_SCHEMA_PATH.read_text()))
            record_path = out / "selection.json"
            record_path.write_text(json.dumps(record, indent=1) + "\n")
            written.append(record_path)
    for path in written:
        click.echo(f"wrote {path}")
    if selected_site is not None:
        click.echo(f"selected {selected_site.value} for case {case_id}")


# ---------------------------------------------------------------------------
# export-scene

@cli.command("export-scene")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True, path_type=Path), help="Scene directory (or its scene.json).")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("bundle_out"), show_default=True, help="Output bundle directory.")
@click.option("--case-id", default=None, help="Case identifier (defaults to the scene directory name).")
@click.option("--seed", type=int, default=0, show_default=True, help="Registration seed.")
@_array_override_options
def export_scene(scene_path, out_path, case_id, seed, contact_count, active_length,
                 design_curl, tip_taper, axial_lead):
    """Export the viewer bundle: bundle.json plus one PLY per scene mesh."""
    if case_id is None:
        case_id = Path(scene_path).resolve().name
        if case_id == "scene.json":
            case_id = Path(scene_path).resolve().parent.name
    config = RunConfig(
        subcommand="export-scene",
        scene_path=Path(scene_path),
        out_path=Path(out_path),
        seed=seed,
        array_overrides=_collect_array_overrides(
            contact_count, active_length, design_curl, tip_taper, axial_lead
        ),
    )
    scene = _load_scene(config.scene_path)
    shape, registration, plans = _plan_pipeline(scene, config)
    bundle_path = planning.export_scene_bundle(
        case_id, scene, shape, registration, plans, config.out_path
    )
    click.echo(f"wrote {bundle_path}")


# ---------------------------------------------------------------------------
# metrics

def _records_from_json(path: Path) -> list[postop.PostOpRecord]:
    payload = json.loads(Path(path).read_text())
    if isinstance(payload, dict) and "records" in payload:
        payload = payload["records"]
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list) or not payload:
        raise ParameterError(f"{path}: expected a record object or a non-empty list")
    allowed = {
        "case_id",
        "contacts",
        "planned_base_depth_mm",
        "actual_base_depth_mm",
        "aid_deg",
        "mmd_mm",
        "amd_mm",
        "scalar",
        "fold",
        "d_mm",
    }
    records = []
    for index, entry in enumerate(payload):
        if not isinstance(entry, dict):
            raise ParameterError(f"{path}: record {index} is not an object")
        unknown = sorted(set(entry) - allowed)
        if unknown:
            raise ParameterError(f"{path}: record {index} has unknown fields {unknown}")
        if "case_id" not in entry:
            raise ParameterError(f"{path}: record {index} is missing case_id")
        fields_ = dict(entry)
        if "contacts" in fields_:
            fields_["contacts"] = np.asarray(fields_["contacts"], dtype=float)
        records.append(postop.PostOpRecord(**fields_))
    return records


@cli.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True, path_type=Path), help="JSON file: one record object or a list (fields: case_id, contacts, aid_deg, mmd_mm, amd_mm, scalar, fold, d_mm, planned/actual base depth).")
@click.option("--scene", "scene_path", type=click.Path(exists=True, path_type=Path), default=None, help="Scene directory; required when records carry contact positions.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("metrics.csv"), show_default=True, help="Output CSV report.")
@click.option("--fold-threshold-deg", type=float, default=30.0, show_default=True, help="Angular reversal that counts as a tip fold.")
@click.option("--apical-count", type=int, default=11, show_default=True, help="Contacts in the apical distance subset.")
def metrics(records_path, scene_path, out_path, fold_threshold_deg, apical_count):
    """Evaluate post-op records into position metrics and write the CSV
    report."""
    scene = _load_scene(scene_path) if scene_path is not None else None
    records = _records_from_json(records_path)
    evaluated = [
        postop.evaluate_record(
            record,
            scene=scene,
            fold_threshold_deg=fold_threshold_deg,
            apical_count=apical_count,
        )
        for record in records
    ]
    report_path = postop.write_report(out_path, evaluated)
    click.echo(f"evaluated {len(evaluated)} record(s)")
    click.echo(f"wrote {report_path}")


# ---------------------------------------------------------------------------
# stats / report

@cli.command()
@_COHORT_OPTION
def stats(cohort_path):
    """Recompute the published tables and print the PASS/FAIL diff."""
    report = cohort_mod.reproduce_tables(_cohort_rows(cohort_path))
    click.echo(report.to_text(), nl=False)


@cli.command()
@_COHORT_OPTION
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("report_out"), show_default=True, help="Output directory.")
@click.option("--include-power/--no-include-power", default=False, show_default=True, help="Also run the Monte-Carlo sample-size cells (slow).")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the sample-size cells.")
@click.option("--replicates", type=int, default=20000, show_default=True, help="Monte-Carlo replicates for the sample-size cells.")
def report(cohort_path, out_path, include_power, seed, replicates):
    """Write the reproduction report (text + CSV) and the regression
    series, then print the diff summary."""
    rows = _cohort_rows(cohort_path)
    stats_report = cohort_mod.reproduce_tables(
        rows, include_power=include_power, seed=seed, power_replicates=replicates
    )
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    text_path = out / "stats_report.txt"
    csv_path = out / "stats_report.csv"
    series_path = out / "regression_series.csv"
    text_path.write_text(stats_report.to_text())
    csv_path.write_text(stats_report.to_csv())
    series_path.write_text(_regression_series_csv(rows))
    for path in (text_path, csv_path, series_path):
        click.echo(f"wrote {path}")
    click.echo(
        f"{len(stats_report.cells)} cells compared: "
        f"{stats_report.n_pass} PASS, {stats_report.n_fail} FAIL"
    )


def _regression_series_csv(rows) -> str:
    import csv as _csv
    import io as _io

    correlations = cohort_mod.speech_score_correlations(rows)
    buffer = _io.StringIO()
    writer = _csv.writer(buffer)
    writer.writerow(["metric", "series", "case_id", "x", "y"])
    for metric in ("aid_error", "mmd", "amd"):
        entry = correlations[metric]
        for case_id, x, y in zip(entry.case_ids, entry.x, entry.y):
            writer.writerow([metric, "scatter", case_id, repr(float(x)), repr(float(y))])
        band = entry.band
        for series, values in (("fit", band.fit), ("lower", band.lower), ("upper", band.upper)):
            for x, y in zip(band.grid, values):
                writer.writerow([metric, series, "", repr(float(x)), repr(float(y))])
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# power

@cli.command()
@click.option("--metric", type=click.Choice(["aid", "mmd", "amd"]), default=None, help="Use the pooled reference moments for this metric.")
@_COHORT_OPTION
@click.option("--mean-a", type=float, default=None, help="Control mean (explicit-moments form).")
@click.option("--sd-a", type=float, default=None, help="Control SD.")
@click.option("--mean-b", type=float, default=None, help="Treated mean.")
@click.option("--sd-b", type=float, default=None, help="Treated SD.")
@click.option("--mode", type=click.Choice(["equal_n", "fixed_control"]), default="equal_n", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True, help="Two-sided level of the simulated rank test.")
@click.option("--target-power", type=float, default=0.80, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-fixed", type=int, default=None, help="Control group size (fixed_control mode).")
@click.option("--replicates", type=int, default=20000, show_default=True)
@click.option("--n-limit", type=int, default=10000, show_default=True, help="Largest group size the search will try.")
def power(metric, cohort_path, mean_a, sd_a, mean_b, sd_b, mode, alpha,
          target_power, seed, n_fixed, replicates, n_limit):
    """Monte-Carlo sample-size search for the two-group rank comparison."""
    explicit = [mean_a, sd_a, mean_b, sd_b]
    if metric is None and any(v is None for v in explicit):
        raise click.UsageError("give --metric, or all of --mean-a --sd-a --mean-b --sd-b")
    if metric is not None and any(v is not None for v in explicit):
        raise click.UsageError("--metric and explicit moments are mutually exclusive")
    if metric is not None:
        groups = cohort_mod.cohort_groups(_cohort_rows(cohort_path))
        column = {"aid": "aid_deg", "mmd": "mmd_mm", "amd": "amd_mm"}[metric]
        control = cohort_mod.summarize(groups["pooled_ctrl_wt"], column)
        treated = cohort_mod.summarize(groups["pooled_exp_d"], column)
        mean_a, sd_a = control.mean, control.sd_sample
        mean_b, sd_b = treated.mean, treated.sd_sample
        click.echo(
            f"moments[{metric}]: control {mean_a:.4f} ({sd_a:.4f}) "
            f"vs treated {mean_b:.4f} ({sd_b:.4f})"
        )
    result = cohort_mod.power_analysis(
        mean_a,
        sd_a,
        mean_b,
        sd_b,
        mode=mode,
        alpha=alpha,
        target_power=target_power,
        seed=seed,
        n_fixed=n_fixed,
        replicates=replicates,
        n_limit=n_limit,
    )
    curve = " ".join(f"{n}:{p:.3f}" for n, p in result.smoothed)
    click.echo(f"evaluated {curve}")
    if result.reachable:
        click.echo(
            f"required n per group: {result.required_n} "
            f"(mode={result.mode}, alpha={result.alpha:g}, target={result.target_power:g})"
        )
    else:
        best = max(p for _, p in result.smoothed)
        click.echo(
            f"target power {result.target_power:g} not reached by n={n_limit} "
            f"(best {best:.3f})"
        )


# ---------------------------------------------------------------------------
# serve

def inline_bundle(bundle_dir: str | Path) -> dict:
    """Load bundle.json and inline every file-referenced mesh."""
    bundle_dir = Path(bundle_dir)
    if bundle_dir.is_file():
        bundle_path = bundle_dir
        bundle_dir = bundle_dir.parent
    else:
        bundle_path = bundle_dir / "bundle.json"
    if not bundle_path.is_file():
        raise ParameterError(f"no bundle.json in {bundle_dir}")
    bundle = json.loads(bundle_path.read_text())
    meshes = bundle.get("scene", {}).get("meshes", {})
    for name, entry in meshes.items():
        if "file" not in entry:
            continue
        mesh = geometry.load_mesh_ply(bundle_dir / entry["file"])
        meshes[name] = {
            "vertices": [[float(x) for x in v] for v in mesh.vertices],
            "triangles": [[int(x) for x in t] for t in mesh.triangles],
        }
    return bundle


class _ServeState:
    def __init__(self, bundle, selection_path, schema):
        self.bundle = bundle
        self.bundle_bytes = json.dumps(bundle).encode()
        self.selection_path = Path(selection_path)
        self.schema = schema
        self.selection = None


class _ViewerRequestHandler(BaseHTTPRequestHandler):
    server_version = "artifact-serve/1"

    # the viewer may be served from a dev server on another origin
    _cors = {
        "Access-Control-Allow-Origin": "*",
        "Access-Control-Allow-Methods": "GET, POST, OPTIONS",
        "Access-Control-Allow-Headers": "Content-Type",
    }

    def log_message(self, format, *args):
        pass

    def _respond(self, status, payload: bytes, content_type="application/json"):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        for name, value in self._cors.items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(payload)

    def _respond_json(self, status, payload: dict):
        self._respond(status, json.dumps(payload).encode())

    def do_OPTIONS(self):
        self._respond(204, b"")

    def do_GET(self):
        if self.path == "/bundle":
            self._respond(200, self.server.state.bundle_bytes)
        else:
            self._respond_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        if self.path != "/selection":
            self._respond_json(404, {"error": f"unknown path {self.path}"})
            return
        state = self.server.state
        if state.selection is not None:
            self._respond_json(409, {"error": "a selection was already recorded"})
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        try:
            record = json.loads(body)
        except json.JSONDecodeError as exc:
            self._respond_json(400, {"error": f"invalid JSON: {exc}"})
            return
        try:
            jsonschema.validate(record, state.schema)
        except jsonschema.ValidationError as exc:
            self._respond_json(400, {"error": f"invalid selection record: {exc.message}"})
            return
        if record["case_id"] != state.bundle["case_id"]:
            self._respond_json(
                400,
                {
                    "error": (
                        f"selection is for case {record['case_id']!r}, "
                        f"bundle is {state.bundle['case_id']!r}"
                    )
                },
            )
            return
        state.selection = record
        state.selection_path.write_text(json.dumps(record, indent=1) + "\n")
        self._respond_json(201, {"status": "recorded", "path": str(state.selection_path)})


def build_selection_server(bundle_dir, selection_out, host="127.0.0.1", port=0) -> HTTPServer:
    """Build (without starting) the sequential viewer HTTP server."""
    selection_out = Path(selection_out)
    if selection_out.exists():
        raise ParameterError(f"selection output {selection_out} already exists")
    state = _ServeState(
        bundle=inline_bundle(bundle_dir),
        selection_path=selection_out,
        schema=json.loads(SELECTION_SCHEMA_PATH.read_text()),
    )
    server = HTTPServer((host, port), _ViewerRequestHandler)
    server.state = state
    return server


@cli.command()
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True, path_type=Path), help="Bundle directory from export-scene (or its bundle.json).")
@click.option("--selection-out", type=click.Path(path_type=Path), default=Path("selection.json"), show_default=True, help="Where the posted selection record is written.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True, help="Port (0 picks a free one).")
def serve(bundle_dir, selection_out, host, port):
    """Serve GET /bundle (meshes inlined) and accept POST /selection once."""
    server = build_selection_server(bundle_dir, selection_out, host=host, port=port)
    actual_host, actual_port = server.server_address[:2]
    click.echo(f"serving bundle on http://{actual_host}:{actual_port}/bundle")
    click.echo(f"selection will be written to {selection_out}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


# ---------------------------------------------------------------------------

def file_digest(path: str | Path) -> str:
    """Hex SHA-256 of one file (helper for idempotency checks)."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


if __name__ == "__main__":
    main()
