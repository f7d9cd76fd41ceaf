"""Core domain types, cohort ingestion, and validation for multichannel EEG.

A cohort is declared by a JSON manifest pointing at one headerless CSV per
subject (19 rows = channels, comma-separated decimals). Channel order is
canonicalized to the 10-20 montage below on load, so channel indices stay
stable across the whole pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: Diagnosis labels.
ADHD = 1
TD = 0

#: Canonical order of the 19 channels of the 10-20 montage used here.
CHANNELS_1020 = (
    "Fp1", "Fp2", "F3", "F4", "F7", "F8", "Fz", "C3", "C4", "Cz",
    "T7", "T8", "P3", "P4", "P7", "P8", "Pz", "O1", "O2",
)

# 2D head positions: azimuthal-equidistant projection of the idealized
# 10-20 sphere positions onto the unit disc (vertex Cz at the origin,
# nose up). Computed once from the standard angular placements (ring
# electrodes at 72 deg inclination, inner row at 36 deg, F3/F4/P3/P4 as
# great-circle arc midpoints) and frozen here.
MONTAGE_COORDS = {
    "Fp1": (-0.2472, +0.7608),
    "Fp2": (+0.2472, +0.7608),
    "F3": (-0.3158, +0.4706),
    "F4": (+0.3158, +0.4706),
    "F7": (-0.6472, +0.4702),
    "F8": (+0.6472, +0.4702),
    "Fz": (+0.0000, +0.4000),
    "C3": (-0.4000, +0.0000),
    "C4": (+0.4000, +0.0000),
    "Cz": (+0.0000, +0.0000),
    "T7": (-0.8000, +0.0000),
    "T8": (+0.8000, +0.0000),
    "P3": (-0.3158, -0.4706),
    "P4": (+0.3158, -0.4706),
    "P7": (-0.6472, -0.4702),
    "P8": (+0.6472, -0.4702),
    "Pz": (+0.0000, -0.4000),
    "O1": (-0.2472, -0.7608),
    "O2": (+0.2472, -0.7608),
}

#: Minimum admissible recording duration in seconds.
MIN_DURATION_S = 2.0


class CohortLoadError(Exception):
    """Raised when a cohort cannot be loaded; collects per-subject problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__(
            "cohort load failed with %d problem(s):\n  %s"
            % (len(self.problems), "\n  ".join(self.problems))
        )


@dataclass(frozen=True)
class Montage:
    """The 19-channel 10-20 montage with 2D unit-disc head coordinates."""

    names: tuple = CHANNELS_1020
    coords_2d: dict = field(default_factory=lambda: dict(MONTAGE_COORDS))

    def index(self, name):
        return self.names.index(name)

    def xy(self, name):
        return self.coords_2d[name]


DEFAULT_MONTAGE = Montage()


@dataclass
class Recording:
    """One subject's multichannel EEG matrix plus metadata.

    `samples` has shape (n_channels, n_samples) in the input unit
    (microvolts for the target dataset) and is made read-only after
    construction so recordings can be shared freely.
    """

    subject_id: str
    label: int
    sample_rate_hz: float
    channel_names: tuple
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("samples must be a 2D channels x time matrix")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration_s(self):
        return self.n_samples / self.sample_rate_hz

    def channel(self, name):
        """Return the sample row for a channel name."""
        return self.samples[self.channel_names.index(name)]

    def with_samples(self, samples, channel_names=None):
        """Copy of this recording with new sample values (metadata kept)."""
        return Recording(
            subject_id=self.subject_id,
            label=self.label,
            sample_rate_hz=self.sample_rate_hz,
            channel_names=self.channel_names if channel_names is None
            else tuple(channel_names),
            samples=samples,
        )


def validate_recording(rec, montage=DEFAULT_MONTAGE):
    """Check Recording invariants; return a list of violation strings.

    An empty list means the recording is admissible to the pipeline.
    Violations are data, not failures, so nothing is raised here.
    """
    violations = []
    if rec.sample_rate_hz <= 0:
        violations.append("sample_rate_hz must be positive, got %r"
                          % rec.sample_rate_hz)
    n_named = len(rec.channel_names)
    if rec.samples.shape[0] != n_named:
        violations.append("row count %d != channel count %d"
                          % (rec.samples.shape[0], n_named))
    if len(set(rec.channel_names)) != n_named:
        violations.append("duplicate channel names")
    if set(rec.channel_names) != set(montage.names):
        violations.append("channel names do not match the %d-channel montage"
                          % len(montage.names))
    bad = ~np.isfinite(rec.samples)
    if bad.any():
        ch_idx, t_idx = np.argwhere(bad)[0]
        name = (rec.channel_names[ch_idx] if ch_idx < n_named
                else "row %d" % ch_idx)
        violations.append(
            "non-finite value at channel %s, sample %d (%d total)"
            % (name, t_idx, int(bad.sum())))
    if rec.sample_rate_hz > 0 and rec.duration_s < MIN_DURATION_S:
        violations.append("duration below 2 s (%.3f s at %g Hz)"
                          % (rec.duration_s, rec.sample_rate_hz))
    return violations


def _load_subject_csv(path):
    """Parse one headerless channels x samples CSV into a float matrix."""
    rows = []
    width = None
    with open(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError("row %d has %d cells, expected %d"
                                 % (line_no, len(cells), width))
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(c for c in cells
                           if not _is_float(c))
                raise ValueError("non-numeric cell %r on row %d"
                                 % (bad, line_no)) from None
    if not rows:
        raise ValueError("empty file")
    return np.array(rows, dtype=np.float64)


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_manifest(manifest_path):
    """Parse the cohort manifest JSON; returns (sample_rate, channels, entries).

    Entries are (subject_id, label, resolved_path) tuples in manifest order.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, "r") as fh:
        doc = json.load(fh)
    for key in ("sample_rate_hz", "channels", "subjects"):
        if key not in doc:
            raise CohortLoadError(["manifest missing key %r" % key])
    channels = tuple(doc["channels"])
    entries = []
    problems = []
    seen = set()
    for i, sub in enumerate(doc["subjects"]):
        sid = sub.get("id", "<entry %d>" % i)
        if sid in seen:
            problems.append("duplicate subject_id %r" % sid)
        seen.add(sid)
        label = sub.get("label")
        if label not in (0, 1):
            problems.append("%s: label must be 0 or 1, got %r" % (sid, label))
        entries.append((sid, label, manifest_path.parent / sub.get("path", "")))
    if problems:
        raise CohortLoadError(problems)
    return float(doc["sample_rate_hz"]), channels, entries


def load_cohort(manifest_path, montage=DEFAULT_MONTAGE):
    """Load every subject named by a manifest into Recording objects.

    Channel rows are reordered to the canonical montage order regardless of
    the manifest's channel order. Problems across subjects are aggregated
    into a single CohortLoadError naming each subject and location.
    """
    fs, channels, entries = read_manifest(manifest_path)
    if len(channels) != len(montage.names):
        raise CohortLoadError(
            ["manifest declares %d channels, montage has %d"
             % (len(channels), len(montage.names))])
    if set(channels) != set(montage.names):
        raise CohortLoadError(
            ["manifest channels are not the expected montage labels"])
    reorder = [channels.index(name) for name in montage.names]

    recordings = []
    problems = []
    for sid, label, path in entries:
        if not Path(path).is_file():
            problems.append("%s: missing file %s" % (sid, path))
            continue
        try:
            mat = _load_subject_csv(path)
        except ValueError as exc:
            problems.append("%s: %s (%s)" % (sid, exc, path))
            continue
        if mat.shape[0] != len(montage.names):
            problems.append("%s: channel count %d != %d"
                            % (sid, mat.shape[0], len(montage.names)))
            continue
        rec = Recording(subject_id=sid, label=label, sample_rate_hz=fs,
                        channel_names=montage.names, samples=mat[reorder])
        bad = validate_recording(rec, montage)
        if bad:
            problems.extend("%s: %s" % (sid, b) for b in bad)
            continue
        recordings.append(rec)
    if problems:
        raise CohortLoadError(problems)
    return recordings


def write_recording_csv(rec, path):
    """Write a recording's sample matrix as the per-subject CSV format.

    Values are written with repr-level precision so a load round-trips
    bit-exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rec.samples:
            fh.write(",".join("%.17g" % v for v in row))
            fh.write("\n")


def write_cohort(recordings, out_dir, manifest_name="manifest.json"):
    """Write recordings plus a manifest into a directory; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not recordings:
        raise ValueError("cannot write an empty cohort")
    fs = recordings[0].sample_rate_hz
    channels = recordings[0].channel_names
    subjects = []
    for rec in recordings:
        if rec.sample_rate_hz != fs:
            raise ValueError("mixed sample rates in cohort")
        rel = "%s.csv" % rec.subject_id
        write_recording_csv(rec, out_dir / rel)
        subjects.append({"id": rec.subject_id, "label": int(rec.label),
                         "path": rel})
    manifest = {"sample_rate_hz": fs, "channels": list(channels),
                "subjects": subjects}
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path
