"""Dataset plumbing: manifest IO, augmentation, k-fold splits, synthetic scenes.

Manifest format: one JSON object per line with keys ``path``, ``class``
(red / green / countdown_green / countdown_blank / none) and normalized
midline endpoints ``x1,y1,x2,y2`` (x/width, y/height; the start point
(x1,y1) is the endpoint nearer the bottom of the image, so y1 >= y2).
Two optional booleans extend the schema: ``crossing`` (default true; false
marks a frame without a crossing, whose regression loss is masked) and
``obstructed`` (default false; used by the evaluation split).

The synthetic generator stands in for street photography at desk scale: a
bright striped band with a known midline on a noise background, plus a
class-specific light indicator, emitting exact labels.
"""

import json
import os
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw

from .network import CLASS_INDEX, CLASS_NAMES


class ManifestError(ValueError):
    """Malformed manifest record; message carries the 1-based record index."""


@dataclass
class LabeledFrame:
    """One image with its light class and normalized midline endpoints."""

    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    class_label: str
    endpoints: Tuple[float, float, float, float]  # (x1, y1, x2, y2)
    has_crossing: bool = True
    obstructed: bool = False

    def __post_init__(self):
        if self.class_label not in CLASS_INDEX:
            raise ValueError(f"unknown class {self.class_label!r}")
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ValueError(f"image must be (3,H,W), got {self.image.shape}")
        x1, y1, x2, y2 = self.endpoints
        for v in self.endpoints:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"endpoint coordinates must lie in [0,1], got {self.endpoints}")
        if y1 < y2:
            raise ValueError(
                f"start point must be the lower endpoint (y1 >= y2), got {self.endpoints}"
            )

    @property
    def class_index(self) -> int:
        return CLASS_INDEX[self.class_label]


REQUIRED_KEYS = ("path", "class", "x1", "y1", "x2", "y2")


def read_manifest(path) -> List[dict]:
    """Parse a JSONL manifest; malformed records are rejected with their index."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for index, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"record {index}: invalid JSON ({e})") from None
            if not isinstance(rec, dict):
                raise ManifestError(f"record {index}: expected a JSON object")
            missing = [k for k in REQUIRED_KEYS if k not in rec]
            if missing:
                raise ManifestError(f"record {index}: missing keys {missing}")
            if rec["class"] not in CLASS_INDEX:
                raise ManifestError(
                    f"record {index}: unknown class {rec['class']!r} "
                    f"(expected one of {list(CLASS_NAMES)})"
                )
            try:
                coords = [float(rec[k]) for k in ("x1", "y1", "x2", "y2")]
            except (TypeError, ValueError):
                raise ManifestError(f"record {index}: endpoint coordinates must be numbers") from None
            if any(not 0.0 <= c <= 1.0 for c in coords):
                raise ManifestError(f"record {index}: coordinates outside [0,1]: {coords}")
            if coords[1] < coords[3]:
                raise ManifestError(f"record {index}: start point must satisfy y1 >= y2")
            records.append({
                "path": rec["path"],
                "class": rec["class"],
                "x1": coords[0], "y1": coords[1], "x2": coords[2], "y2": coords[3],
                "crossing": bool(rec.get("crossing", True)),
                "obstructed": bool(rec.get("obstructed", False)),
            })
    return records


def write_manifest(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps({
                "path": rec["path"],
                "class": rec["class"],
                "x1": rec["x1"], "y1": rec["y1"], "x2": rec["x2"], "y2": rec["y2"],
                "crossing": rec.get("crossing", True),
                "obstructed": rec.get("obstructed", False),
            }) + "\n")


def image_to_array(img: Image.Image) -> np.ndarray:
    """PIL image -> (3,H,W) float32 in [0,1]."""
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_frame(record: dict, base_dir=None, resize_to: Optional[Tuple[int, int]] = None) -> LabeledFrame:
    """Load one manifest record; ``resize_to`` is (width, height) if given."""
    path = record["path"]
    if base_dir is not None and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    img = Image.open(path)
    if resize_to is not None and img.size != resize_to:
        img = img.resize(resize_to, Image.BILINEAR)
    return LabeledFrame(
        image=image_to_array(img),
        class_label=record["class"],
        endpoints=(record["x1"], record["y1"], record["x2"], record["y2"]),
        has_crossing=record.get("crossing", True),
        obstructed=record.get("obstructed", False),
    )


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

def crop_frame(frame: LabeledFrame, ox: int, oy: int, crop_w: int, crop_h: int) -> LabeledFrame:
    """Crop at pixel offset (ox, oy); endpoints are translated in pixel space
    by (-ox, -oy), renormalized by the crop extent, and clamped to [0,1]."""
    _, h, w = frame.image.shape
    if crop_h > h or crop_w > w:
        raise ValueError(f"crop {crop_w}x{crop_h} larger than image {w}x{h}")
    if not (0 <= ox <= w - crop_w and 0 <= oy <= h - crop_h):
        raise ValueError(f"crop offset ({ox},{oy}) out of range")
    image = np.ascontiguousarray(frame.image[:, oy:oy + crop_h, ox:ox + crop_w])
    x1, y1, x2, y2 = frame.endpoints
    new = (
        min(max((x1 * w - ox) / crop_w, 0.0), 1.0),
        min(max((y1 * h - oy) / crop_h, 0.0), 1.0),
        min(max((x2 * w - ox) / crop_w, 0.0), 1.0),
        min(max((y2 * h - oy) / crop_h, 0.0), 1.0),
    )
    return replace(frame, image=image, endpoints=new)


def flip_frame(frame: LabeledFrame) -> LabeledFrame:
    """Horizontal flip: mirror the image and map x -> 1 - x for both endpoints.
    Start/end roles are unchanged (verticality is flip-invariant)."""
    image = np.ascontiguousarray(frame.image[:, :, ::-1])
    x1, y1, x2, y2 = frame.endpoints
    return replace(frame, image=image, endpoints=(1.0 - x1, y1, 1.0 - x2, y2))


def augment(frame: LabeledFrame, rng: np.random.Generator,
            crop_h: int, crop_w: int, flip_prob: float = 0.5) -> LabeledFrame:
    """Uniform-random crop plus probability-``flip_prob`` horizontal flip."""
    _, h, w = frame.image.shape
    if crop_h > h or crop_w > w:
        raise ValueError(f"crop {crop_w}x{crop_h} larger than image {w}x{h}")
    oy = int(rng.integers(0, h - crop_h + 1))
    ox = int(rng.integers(0, w - crop_w + 1))
    out = crop_frame(frame, ox, oy, crop_w, crop_h)
    if rng.random() < flip_prob:
        out = flip_frame(out)
    return out


def center_crop(frame: LabeledFrame, crop_h: int, crop_w: int) -> LabeledFrame:
    _, h, w = frame.image.shape
    return crop_frame(frame, (w - crop_w) // 2, (h - crop_h) // 2, crop_w, crop_h)


# ---------------------------------------------------------------------------
# k-fold split
# ---------------------------------------------------------------------------

def kfold_split(n: int, k: int = 5, seed: int = 0):
    """Disjoint, exhaustive (train, validation) index partitions.

    Fold sizes differ by at most one; deterministic under ``seed``.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if n < k:
        raise ValueError(f"dataset of {n} items cannot be split into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    splits = []
    for i, fold in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        splits.append((np.sort(train), np.sort(fold)))
    return splits


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

def synth_scene(rng: np.random.Generator, class_name: str, width: int, height: int,
                draw_crossing: bool = True, obstructed: bool = False):
    """Render a labeled street-like scene.

    Returns (HxWx3 uint8 image, normalized endpoints, has_crossing). The
    striped band is drawn between the exact endpoints the label reports.
    """
    base = rng.integers(24, 64, size=(height, width, 3), dtype=np.uint8)
    img = Image.fromarray(base, "RGB")
    draw = ImageDraw.Draw(img)

    endpoints = (0.0, 0.0, 0.0, 0.0)
    has_crossing = bool(draw_crossing)
    if draw_crossing:
        sx = rng.uniform(0.35, 0.65) * width
        sy = rng.uniform(0.86, 0.96) * height
        ey = rng.uniform(0.50, 0.62) * height
        ex = sx + rng.uniform(-0.35, 0.35) * (sy - ey)
        ex = min(max(ex, 0.15 * width), 0.85 * width)

        ux, uy = ex - sx, ey - sy
        length = float(np.hypot(ux, uy))
        ux, uy = ux / length, uy / length
        px, py = -uy, ux
        half = rng.uniform(0.15, 0.20) * width
        stripe = length / 9.0
        t = 0.0
        while t < length - 1e-6:
            t2 = min(t + stripe, length)
            ax, ay = sx + ux * t, sy + uy * t
            bx, by = sx + ux * t2, sy + uy * t2
            shade = int(rng.integers(222, 250))
            draw.polygon(
                [(ax + px * half, ay + py * half), (bx + px * half, by + py * half),
                 (bx - px * half, by - py * half), (ax - px * half, ay - py * half)],
                fill=(shade, shade, shade),
            )
            t += 2.0 * stripe
        endpoints = (sx / width, sy / height, ex / width, ey / height)

        if obstructed:
            mx = sx + ux * length * rng.uniform(0.3, 0.6)
            my = sy + uy * length * rng.uniform(0.3, 0.6)
            ow2, oh2 = 0.5 * half, 0.22 * (sy - ey)
            draw.rectangle([mx - ow2, my - oh2, mx + ow2, my + oh2], fill=(70, 70, 78))

    # class-specific light indicator, upper third of the frame
    if class_name != "none":
        cx = rng.uniform(0.2, 0.8) * width
        cy = rng.uniform(0.08, 0.28) * height
        r = 0.035 * width
        draw.rectangle([cx - 1.6 * r, cy - 1.6 * r, cx + 1.6 * r, cy + 3.8 * r],
                       fill=(12, 12, 14))
        if class_name == "red":
            draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=(226, 34, 30))
        elif class_name in ("green", "countdown_green"):
            draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=(40, 214, 86))
        if class_name in ("countdown_green", "countdown_blank"):
            # timer digits: two bright bars under the lamp housing
            ty = cy + 2.2 * r
            draw.rectangle([cx - 1.2 * r, ty, cx - 0.2 * r, ty + 1.2 * r], fill=(245, 245, 210))
            draw.rectangle([cx + 0.2 * r, ty, cx + 1.2 * r, ty + 1.2 * r], fill=(245, 245, 210))

    return np.asarray(img, dtype=np.uint8), endpoints, has_crossing


def generate_dataset(out_dir, count: int, seed: int, width: int = 876, height: int = 657,
                     obstructed_prob: float = 0.0, crossing_free_none_prob: float = 0.0):
    """Write ``count`` synthetic frames plus manifest.jsonl; returns its path.

    Classes rotate round-robin so every class is represented. Deterministic
    under ``seed``.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        class_name = CLASS_NAMES[i % len(CLASS_NAMES)]
        obstructed = bool(rng.random() < obstructed_prob)
        draw_crossing = True
        if class_name == "none" and rng.random() < crossing_free_none_prob:
            draw_crossing = False
        arr, endpoints, has_crossing = synth_scene(
            rng, class_name, width, height,
            draw_crossing=draw_crossing, obstructed=obstructed,
        )
        name = f"scene_{i:04d}.png"
        Image.fromarray(arr, "RGB").save(os.path.join(out_dir, name))
        records.append({
            "path": name,
            "class": class_name,
            "x1": endpoints[0], "y1": endpoints[1],
            "x2": endpoints[2], "y2": endpoints[3],
            "crossing": has_crossing,
            "obstructed": obstructed,
        })
    manifest = os.path.join(out_dir, "manifest.jsonl")
    write_manifest(manifest, records)
    return manifest
