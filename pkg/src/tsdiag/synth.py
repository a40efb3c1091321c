"""Deterministic synthetic head-on scenes for pipeline exercises and fixtures.

A probe drives east along an equatorial link while one oncoming car closes
in.  Ground-truth boxes are produced by exactly inverting the range model,
so a noise-free run must reproduce the car's trajectory to rounding error.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .geodesy import GeoPoint, WGS84
from .kitti import DetectionRecord, FrameClock, OxtsSample
from .photogrammetry import CameraIntrinsics, bbox_height_at_range, kitti_intrinsics

__all__ = ["SyntheticScene", "head_on_scene", "write_scene_files"]


@dataclass
class SyntheticScene:
    records: list[DetectionRecord]
    oxts: list[OxtsSample]
    clock: FrameClock
    link_start: GeoPoint
    link_length_m: float
    intrinsics: CameraIntrinsics
    image_width_px: float
    probe_distance_by_frame: dict[int, float] = field(default_factory=dict)
    car_link_distance_by_frame: dict[int, float] = field(default_factory=dict)


def head_on_scene(duration_s: float = 10.0,
                  frame_rate_hz: float = 10.0,
                  probe_speed_mps: float = 10.0,
                  car_speed_mps: float = 15.0,
                  car_start_link_m: float = 255.0,
                  min_visible_height_px: float = 10.0,
                  max_visible_height_px: float = 370.0,
                  image_width_px: float = 1242.0,
                  lateral_offset_m: float = -2.0,
                  link_length_m: float = 300.0) -> SyntheticScene:
    """One probe, one oncoming car, boxes synthesized while the car is in view."""
    intrinsics = kitti_intrinsics()
    link_start = GeoPoint(0.0, 0.0)
    n_frames = int(round(duration_s * frame_rate_hz))
    clock = FrameClock(frame_rate_hz=frame_rate_hz)

    records = []
    oxts = []
    probe_by_frame = {}
    car_by_frame = {}
    center_x = 0.3 * image_width_px
    center_y = 190.0
    for frame in range(n_frames):
        t = frame / frame_rate_hz
        probe_d = probe_speed_mps * t
        car_d = car_start_link_m - car_speed_mps * t
        probe_by_frame[frame] = probe_d
        car_by_frame[frame] = car_d

        lon = math.degrees(probe_d / WGS84.semi_major_axis_m)
        raw = [0.0] * 30
        raw[0], raw[1], raw[2] = 0.0, lon, 112.0
        raw[6], raw[7] = 0.0, probe_speed_mps  # heading due east
        oxts.append(OxtsSample(
            frame_index=frame,
            position=GeoPoint(0.0, lon),
            altitude_m=112.0,
            velocity_north_mps=0.0,
            velocity_east_mps=probe_speed_mps,
            raw_fields=tuple(raw),
        ))

        camera_range = car_d - probe_d
        if camera_range <= 0.0:
            continue
        height = bbox_height_at_range(camera_range, "car", intrinsics)
        if not min_visible_height_px <= height <= max_visible_height_px:
            continue
        width = 1.1 * height
        records.append(DetectionRecord(
            frame_index=frame,
            class_label="car",
            bbox=(center_x - width / 2.0, center_y - height / 2.0,
                  center_x + width / 2.0, center_y + height / 2.0),
            confidence=1.0,
            gt_track_id=1,
            gt_location_camera=(lateral_offset_m, 1.6, camera_range),
            gt_depth_m=camera_range,
        ))

    return SyntheticScene(
        records=records,
        oxts=oxts,
        clock=clock,
        link_start=link_start,
        link_length_m=link_length_m,
        intrinsics=intrinsics,
        image_width_px=image_width_px,
        probe_distance_by_frame=probe_by_frame,
        car_link_distance_by_frame=car_by_frame,
    )


def _label_line(r: DetectionRecord) -> str:
    # full-precision floats so exactly inverted boxes survive the disk trip
    x, y, z = r.gt_location_camera
    left, top, right, bottom = r.bbox
    return (f"{r.frame_index} {r.gt_track_id} Car 0 0 0.0 "
            f"{left!r} {top!r} {right!r} {bottom!r} "
            f"1.50 1.62 3.88 {x!r} {y!r} {z!r} 0.0")


def write_scene_files(scene: SyntheticScene, directory: str) -> dict[str, str]:
    """Write the scene as on-disk inputs: labels file and OXTS directory."""
    os.makedirs(directory, exist_ok=True)
    labels_path = os.path.join(directory, "labels.txt")
    with open(labels_path, "w") as fh:
        for record in scene.records:
            fh.write(_label_line(record) + "\n")
    oxts_dir = os.path.join(directory, "oxts")
    os.makedirs(oxts_dir, exist_ok=True)
    for sample in scene.oxts:
        path = os.path.join(oxts_dir, f"{sample.frame_index:010d}.txt")
        with open(path, "w") as fh:
            fh.write(" ".join(f"{v!r}" for v in sample.raw_fields) + "\n")
    return {"labels": labels_path, "oxts": oxts_dir}


def write_fixture(directory: str, **scene_kwargs) -> str:
    """Write a ready-to-run demo sequence plus config; returns the config path.

    Try it with:  tsdiag run <directory>/config.ini
    """
    from .config import build_config, dump_config

    scene = head_on_scene(**scene_kwargs)
    paths = write_scene_files(scene, directory)
    cfg = build_config({
        "labels": paths["labels"],
        "oxts": paths["oxts"],
        "output_dir": os.path.join(directory, "out"),
        "link_length_m": repr(scene.link_length_m),
        "sequence_id": "synthetic-head-on",
    })
    config_path = os.path.join(directory, "config.ini")
    with open(config_path, "w") as fh:
        fh.write(dump_config(cfg))
    return config_path
