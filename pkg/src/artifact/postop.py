"""Post-operative position metrics for one implanted array.

Given the anatomical frame and the recovered contact positions (tip first),
this module computes:

* the angular insertion depth: the unwrapped angle of the apical-most
  contact about the modiolar axis, anchored at zero on the round window;
* the mean modiolar distance over all contacts and over the apical
  contact subset, measured to the modiolar wall surface;
* the scalar position label: "ST" when every contact stays inside the
  scala tympani, "ST/SV" otherwise;
* tip fold-over detection: the angular profile from base to tip retreating
  more than a threshold below its running maximum;
* the base depth error: achieved minus planned marker depth, negative when
  the array sits shallower than planned.

Records may carry externally measured metric values instead of (or in
addition to) contact positions; when both are present they are checked
for agreement and the externally measured values are kept, so published
per-case numbers flow through statistics unchanged.
"""
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ParameterError, _points, distance_to_mesh, contains, unwind_angle

SCALAR_LABELS = ("ST", "ST/SV")

AID_AGREEMENT_TOL_DEG = 1.0
DISTANCE_AGREEMENT_TOL_MM = 0.02
DEPTH_AGREEMENT_TOL_MM = 0.05


class RecordMismatchError(ValueError):
    """Measured metric values disagree with values computed from geometry."""


@dataclass
class PostOpRecord:
    """Input for one evaluated ear: contact positions, measured metric
    values, or both."""

    case_id: str
    contacts: np.ndarray = None
    planned_base_depth_mm: float = None
    actual_base_depth_mm: float = None
    aid_deg: float = None
    mmd_mm: float = None
    amd_mm: float = None
    scalar: str = None
    fold: bool = None
    d_mm: float = None

    def __post_init__(self):
        if self.contacts is not None:
            self.contacts = _points(self.contacts, "contacts", min_rows=1)
        if self.scalar is not None and self.scalar not in SCALAR_LABELS:
            raise ParameterError(f"scalar must be one of {SCALAR_LABELS}")


@dataclass(frozen=True)
class PositionMetrics:
    """Evaluated metrics for one ear."""

    case_id: str
    aid_deg: float
    mmd_mm: float
    amd_mm: float
    scalar: str
    fold: bool
    d_mm: float = None


def angular_profile(frame, contacts):
    """Unwrapped angles of the contacts from base to tip, degrees.

    The profile is anchored at the round window: zero is the angle of the
    round window center, so values are absolute insertion angles. Input
    contacts are ordered tip first.
    """
    pts = _points(contacts, "contacts", min_rows=1)
    path = np.vstack([frame.rw_center, pts[::-1]])
    unwound = unwind_angle(frame, path)
    # subtracting the anchor makes the round window exactly zero even when
    # rounding puts its raw angle a hair below a full turn
    return unwound[1:] - unwound[0]


def compute_aid(frame, contacts):
    """Angular insertion depth of the apical-most contact, degrees."""
    return float(angular_profile(frame, contacts)[-1])


def compute_mmd(wall_mesh, contacts):
    """Mean distance from every contact to the modiolar wall, mm."""
    pts = _points(contacts, "contacts", min_rows=1)
    return float(np.mean([distance_to_mesh(wall_mesh, p) for p in pts]))


def compute_amd(wall_mesh, contacts, apical_count=11):
    """Mean wall distance over the apical contact subset (tip first), mm."""
    pts = _points(contacts, "contacts", min_rows=1)
    k = min(apical_count, len(pts))
    return float(np.mean([distance_to_mesh(wall_mesh, p) for p in pts[:k]]))


def classify_scalar(st_mesh, sv_mesh, contacts):
    """Scalar position label: "ST" when all contacts stay in the scala
    tympani, "ST/SV" when any contact has left it."""
    pts = _points(contacts, "contacts", min_rows=1)
    if all(contains(st_mesh, p) for p in pts):
        return "ST"
    return "ST/SV"


def detect_fold(frame, contacts, threshold_deg=30.0):
    """True when the tip retreats more than `threshold_deg` below the
    running angular maximum of the base-to-tip profile."""
    profile = angular_profile(frame, contacts)
    running_max = np.maximum.accumulate(profile)
    return bool(np.max(running_max - profile) > threshold_deg)


def base_depth_error(actual_mm, planned_mm):
    """Achieved minus planned base insertion depth; negative = shallower."""
    return float(actual_mm) - float(planned_mm)


def _check_agreement(case_id, name, measured, computed, tol):
    if abs(measured - computed) > tol:
        raise RecordMismatchError(
            f"{case_id}: measured {name} {measured:g} disagrees with "
            f"geometric value {computed:g} (tolerance {tol:g})"
        )


def evaluate_record(record, scene=None, fold_threshold_deg=30.0, apical_count=11):
    """Evaluate one record into PositionMetrics.

    With contact positions and a scene, metrics come from geometry. With
    measured values only, they pass through unchanged. With both, the two
    routes must agree within fixed tolerances and the measured values win.
    """
    computed = {}
    if record.contacts is not None:
        if scene is None:
            raise ParameterError(f"{record.case_id}: contact positions need a scene to evaluate")
        computed = {
            "aid_deg": compute_aid(scene.frame, record.contacts),
            "mmd_mm": compute_mmd(scene.modiolar_wall, record.contacts),
            "amd_mm": compute_amd(scene.modiolar_wall, record.contacts, apical_count),
            "scalar": classify_scalar(scene.st, scene.sv, record.contacts),
            "fold": detect_fold(scene.frame, record.contacts, fold_threshold_deg),
        }

    measured = {
        "aid_deg": record.aid_deg,
        "mmd_mm": record.mmd_mm,
        "amd_mm": record.amd_mm,
        "scalar": record.scalar,
        "fold": record.fold,
    }
    if not computed and all(v is None for v in measured.values()):
        raise ParameterError(f"{record.case_id}: record has neither contacts nor measured values")

    if computed:
        tols = {"aid_deg": AID_AGREEMENT_TOL_DEG,
                "mmd_mm": DISTANCE_AGREEMENT_TOL_MM,
                "amd_mm": DISTANCE_AGREEMENT_TOL_MM}
        for name, tol in tols.items():
            if measured[name] is not None:
                _check_agreement(record.case_id, name, measured[name], computed[name], tol)
        for name in ("scalar", "fold"):
            if measured[name] is not None and measured[name] != computed[name]:
                raise RecordMismatchError(
                    f"{record.case_id}: measured {name} {measured[name]!r} disagrees "
                    f"with geometric value {computed[name]!r}"
                )

    final = {k: (measured[k] if measured[k] is not None else computed.get(k))
             for k in measured}

    d_mm = record.d_mm
    if d_mm is None and record.actual_base_depth_mm is not None \
            and record.planned_base_depth_mm is not None:
        d_mm = base_depth_error(record.actual_base_depth_mm, record.planned_base_depth_mm)

    return PositionMetrics(case_id=record.case_id, d_mm=d_mm, **final)


REPORT_COLUMNS = ("case_id", "aid_deg", "mmd_mm", "amd_mm", "scalar", "fold", "d_mm")


def write_report(path, metrics):
    """Write evaluated metrics to CSV, one row per case.

    Fold is encoded Y/N and missing depth errors are left empty, matching
    the cohort data files shipped with the package.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for m in metrics:
            writer.writerow([
                m.case_id,
                repr(float(m.aid_deg)) if m.aid_deg is not None else "",
                repr(float(m.mmd_mm)) if m.mmd_mm is not None else "",
                repr(float(m.amd_mm)) if m.amd_mm is not None else "",
                m.scalar or "",
                "" if m.fold is None else ("Y" if m.fold else "N"),
                "" if m.d_mm is None else repr(float(m.d_mm)),
            ])
    return path
