"""Ingestion of KITTI-style tracking labels, OXTS GPS logs, timestamps, and
external detection files, plus ground-truth perturbation for detector-free
pipeline runs.

All parsers are pure functions over text streams and return immutable
records, so parsed collections can move freely between threads.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator

from .errors import ParseError, ValidationError
from .geodesy import GeoPoint

__all__ = [
    "CLASS_LABELS",
    "DetectionRecord",
    "FrameClock",
    "OxtsSample",
    "format_detections",
    "group_by_frame",
    "load_oxts",
    "normalize_class_label",
    "parse_detections_file",
    "parse_label_file",
    "parse_oxts",
    "parse_timestamps",
    "perturb_ground_truth",
    "without_dontcare",
]

CLASS_LABELS = (
    "car", "van", "truck", "tram", "misc",
    "cyclist", "pedestrian", "person_sitting", "other",
)

# KITTI tracking label line:
# frame track_id type truncated occluded alpha bbox(l t r b) dims(h w l)
# location(x y z) rotation_y [score]
_LABEL_FIELDS_NO_SCORE = 17
_LABEL_FIELDS_WITH_SCORE = 18

_OXTS_FIELD_COUNT = 30


def normalize_class_label(token: str) -> str:
    label = token.strip().lower()
    return label if label in CLASS_LABELS else "other"


@dataclass(frozen=True)
class DetectionRecord:
    """One detected (or annotated) object in one frame."""

    frame_index: int
    class_label: str
    bbox: tuple[float, float, float, float]  # left, top, right, bottom [px]
    confidence: float = 1.0
    truncated: float | None = None
    occluded: int | None = None
    gt_track_id: int = -1
    gt_location_camera: tuple[float, float, float] | None = None
    gt_depth_m: float | None = None
    is_dontcare: bool = False

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError(f"frame_index must be >= 0, got {self.frame_index}")
        left, top, right, bottom = self.bbox
        if not (left < right and top < bottom):
            raise ValidationError(f"degenerate bbox {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")
        if self.gt_depth_m is not None and not self.gt_depth_m > 0.0:
            raise ValidationError(f"gt_depth_m must be positive, got {self.gt_depth_m}")

    @property
    def width(self) -> float:
        return self.bbox[2] - self.bbox[0]

    @property
    def height(self) -> float:
        return self.bbox[3] - self.bbox[1]

    @property
    def center_x(self) -> float:
        return (self.bbox[0] + self.bbox[2]) / 2.0

    @property
    def center_y(self) -> float:
        return (self.bbox[1] + self.bbox[3]) / 2.0


@dataclass(frozen=True)
class OxtsSample:
    """One GPS/IMU fix; raw_fields keeps the 30 OXTS values verbatim."""

    frame_index: int
    position: GeoPoint
    altitude_m: float
    velocity_north_mps: float | None = None
    velocity_east_mps: float | None = None
    raw_fields: tuple[float, ...] = ()

    def __post_init__(self):
        if self.raw_fields and len(self.raw_fields) != _OXTS_FIELD_COUNT:
            raise ValidationError(
                f"raw_fields must have exactly {_OXTS_FIELD_COUNT} entries, "
                f"got {len(self.raw_fields)}")


@dataclass(frozen=True)
class FrameClock:
    """Maps frame indices to seconds; fixed rate unless explicit stamps given."""

    frame_rate_hz: float = 10.0
    explicit_timestamps: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.frame_rate_hz > 0.0:
            raise ValidationError(f"frame_rate_hz must be positive, got {self.frame_rate_hz}")
        ts = self.explicit_timestamps
        if ts is not None:
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValidationError("explicit timestamps must be strictly increasing")

    def time_for_frame(self, frame_index: int) -> float:
        if frame_index < 0:
            raise ValidationError(f"frame index {frame_index} is negative")
        if self.explicit_timestamps is not None:
            if frame_index >= len(self.explicit_timestamps):
                raise ValidationError(
                    f"frame {frame_index} beyond the {len(self.explicit_timestamps)} "
                    "explicit timestamps")
            return self.explicit_timestamps[frame_index]
        return frame_index / self.frame_rate_hz


def _float_field(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"line {line_no}: non-numeric field {token!r}") from None
    if math.isnan(value):
        raise ParseError(f"line {line_no}: NaN field")
    return value


def _int_field(token: str, line_no: int) -> int:
    try:
        return int(float(token))
    except ValueError:
        raise ParseError(f"line {line_no}: non-numeric field {token!r}") from None


def _iter_content_lines(stream: IO[str] | Iterable[str]) -> Iterator[tuple[int, str]]:
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, line


def parse_label_file(stream: IO[str] | Iterable[str]) -> list[DetectionRecord]:
    """Parse a KITTI tracking label file into records sorted by (frame, track).

    "DontCare" rows are kept but marked; use without_dontcare() to drop them.
    """
    records = []
    for line_no, line in _iter_content_lines(stream):
        fields = line.split()
        if len(fields) not in (_LABEL_FIELDS_NO_SCORE, _LABEL_FIELDS_WITH_SCORE):
            raise ParseError(
                f"line {line_no}: expected {_LABEL_FIELDS_NO_SCORE} or "
                f"{_LABEL_FIELDS_WITH_SCORE} fields, got {len(fields)}")
        frame = _int_field(fields[0], line_no)
        track_id = _int_field(fields[1], line_no)
        raw_type = fields[2]
        is_dontcare = raw_type.lower() == "dontcare"
        truncated = _float_field(fields[3], line_no)
        occluded = _int_field(fields[4], line_no)
        bbox = tuple(_float_field(fields[i], line_no) for i in range(6, 10))
        location = tuple(_float_field(fields[i], line_no) for i in range(13, 16))
        confidence = (_float_field(fields[17], line_no)
                      if len(fields) == _LABEL_FIELDS_WITH_SCORE else 1.0)
        depth = location[2] if location[2] > 0.0 else None
        try:
            records.append(DetectionRecord(
                frame_index=frame,
                class_label=normalize_class_label(raw_type),
                bbox=bbox,
                confidence=confidence,
                truncated=truncated,
                occluded=occluded,
                gt_track_id=track_id,
                gt_location_camera=location,
                gt_depth_m=depth,
                is_dontcare=is_dontcare,
            ))
        except ValidationError as exc:
            raise ValidationError(f"line {line_no}: {exc}") from None
    records.sort(key=lambda r: (r.frame_index, r.gt_track_id))
    return records


def parse_detections_file(stream: IO[str] | Iterable[str]) -> list[DetectionRecord]:
    """Parse the detection interchange format:

        frame class left top right bottom confidence

    one object per line, whitespace or comma separated, '#' comments ignored.
    """
    records = []
    for line_no, line in _iter_content_lines(stream):
        fields = line.replace(",", " ").split()
        if len(fields) != 7:
            raise ParseError(f"line {line_no}: expected 7 fields, got {len(fields)}")
        frame = _int_field(fields[0], line_no)
        bbox = tuple(_float_field(fields[i], line_no) for i in range(2, 6))
        confidence = _float_field(fields[6], line_no)
        try:
            records.append(DetectionRecord(
                frame_index=frame,
                class_label=normalize_class_label(fields[1]),
                bbox=bbox,
                confidence=confidence,
            ))
        except ValidationError as exc:
            raise ValidationError(f"line {line_no}: {exc}") from None
    records.sort(key=lambda r: r.frame_index)
    return records


def format_detections(records: Iterable[DetectionRecord]) -> str:
    """Serialize records to the detection interchange format (6 decimals)."""
    lines = []
    for r in records:
        left, top, right, bottom = r.bbox
        lines.append(
            f"{r.frame_index} {r.class_label} {left:.6f} {top:.6f} "
            f"{right:.6f} {bottom:.6f} {r.confidence:.6f}")
    return "\n".join(lines) + ("\n" if lines else "")


def group_by_frame(records: Iterable[DetectionRecord]) -> dict[int, list[DetectionRecord]]:
    grouped: dict[int, list[DetectionRecord]] = {}
    for record in records:
        grouped.setdefault(record.frame_index, []).append(record)
    return grouped


def without_dontcare(records: Iterable[DetectionRecord]) -> list[DetectionRecord]:
    return [r for r in records if not r.is_dontcare]


def _parse_oxts_line(line: str, frame_index: int, line_no: int) -> OxtsSample:
    fields = line.split()
    if len(fields) < _OXTS_FIELD_COUNT:
        raise ParseError(
            f"line {line_no}: OXTS record needs >= {_OXTS_FIELD_COUNT} fields, "
            f"got {len(fields)}")
    values = [_float_field(tok, line_no) for tok in fields[:_OXTS_FIELD_COUNT]]
    lat, lon, alt = values[0], values[1], values[2]
    if not -90.0 <= lat <= 90.0:
        raise ValidationError(f"line {line_no}: latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValidationError(f"line {line_no}: longitude {lon} outside [-180, 180]")
    return OxtsSample(
        frame_index=frame_index,
        position=GeoPoint(lat, lon),
        altitude_m=alt,
        velocity_north_mps=values[6],
        velocity_east_mps=values[7],
        raw_fields=tuple(values),
    )


def parse_oxts(streams: Iterable[IO[str] | Iterable[str]]) -> list[OxtsSample]:
    """Parse per-frame OXTS streams (one file per frame, file order = frame order)."""
    samples = []
    for frame_index, stream in enumerate(streams):
        for line_no, line in _iter_content_lines(stream):
            samples.append(_parse_oxts_line(line, frame_index, line_no))
            break  # one fix per file
    return samples


def parse_oxts_lines(stream: IO[str] | Iterable[str]) -> list[OxtsSample]:
    """Parse a single multi-line OXTS file (one fix per line, line order = frame order)."""
    samples = []
    frame_index = 0
    for line_no, line in _iter_content_lines(stream):
        samples.append(_parse_oxts_line(line, frame_index, line_no))
        frame_index += 1
    return samples


def load_oxts(path: str) -> list[OxtsSample]:
    """Load OXTS fixes from a directory of per-frame files or one multi-line file."""
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".txt"))
        samples = []
        for frame_index, name in enumerate(names):
            with open(os.path.join(path, name)) as fh:
                for line_no, line in _iter_content_lines(fh):
                    samples.append(_parse_oxts_line(line, frame_index, line_no))
                    break
        return samples
    with open(path) as fh:
        return parse_oxts_lines(fh)


def parse_timestamps(stream: IO[str] | Iterable[str]) -> list[float]:
    """Parse a timestamps file: one strictly increasing value [s] per line."""
    stamps = []
    for line_no, line in _iter_content_lines(stream):
        value = _float_field(line.split()[0], line_no)
        if stamps and value <= stamps[-1]:
            raise ValidationError(
                f"line {line_no}: timestamp {value} not strictly increasing")
        stamps.append(value)
    return stamps


def perturb_ground_truth(records: Iterable[DetectionRecord], jitter_px: float,
                         drop_rate: float, seed: int) -> list[DetectionRecord]:
    """Simulate detector noise on ground-truth boxes, deterministically.

    Each surviving box gets independent uniform edge noise in
    [-jitter_px, +jitter_px] (box validity preserved) and a confidence that
    shrinks with the applied noise magnitude; records are dropped i.i.d.
    with probability drop_rate.  Ground-truth fields are kept so the output
    stays usable for evaluation.
    """
    if jitter_px < 0.0:
        raise ValueError(f"jitter_px must be >= 0, got {jitter_px}")
    if not 0.0 <= drop_rate < 1.0:
        raise ValueError(f"drop_rate must be in [0, 1), got {drop_rate}")
    rng = random.Random(seed)
    out = []
    for record in records:
        if drop_rate > 0.0 and rng.random() < drop_rate:
            continue
        if jitter_px == 0.0:
            out.append(record)
            continue
        left, top, right, bottom = record.bbox
        noise = (0.0, 0.0, 0.0, 0.0)
        for _ in range(100):
            candidate = tuple(rng.uniform(-jitter_px, jitter_px) for _ in range(4))
            if (left + candidate[0] < right + candidate[2] and
                    top + candidate[1] < bottom + candidate[3]):
                noise = candidate
                break
        magnitude = sum(abs(n) for n in noise) / 4.0
        confidence = min(1.0, max(0.5, 1.0 - magnitude / (2.0 * jitter_px)))
        out.append(replace(
            record,
            bbox=(left + noise[0], top + noise[1], right + noise[2], bottom + noise[3]),
            confidence=confidence,
        ))
    return out
