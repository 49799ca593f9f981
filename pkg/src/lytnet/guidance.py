"""Five-frame guidance state machine.

Softmax outputs are averaged over the last five frames; the two countdown
classes are merged into one announced mode; a decision requires the merged
mass to strictly exceed 0.8 — so a single aberrant frame (4/5 = 0.8 exactly)
never flips the announced mode. Endpoints are averaged in image space, then
the bird's-eye tilt drives the rotate instruction (|tilt| > 10 deg) and the
x-intercept drives the move instruction (outside w*8.5% of the midline).
"""

import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    GeometryError,
    Homography,
    REFERENCE_RESOLUTION,
    birdseye_angle,
    endpoints_to_pixels,
    x_intercept,
)

WINDOW = 5
DECISION_THRESHOLD = 0.8
ANGLE_THRESHOLD_DEG = 10.0
POSITION_BAND_FRACTION = 0.085
PROB_SUM_TOL = 1e-6


class LightMode(str, Enum):
    RED = "Red"
    GREEN = "Green"
    COUNTDOWN = "Countdown"
    NONE = "None"
    UNCERTAIN = "Uncertain"


class Orientation(str, Enum):
    ROTATE_LEFT = "RotateLeft"
    ROTATE_RIGHT = "RotateRight"
    ALIGNED = "Aligned"


class Position(str, Enum):
    MOVE_LEFT = "MoveLeft"
    MOVE_RIGHT = "MoveRight"
    CENTERED = "Centered"


# class-index order: red, green, countdown_green, countdown_blank, none
_MERGED = (
    (LightMode.RED, (0,)),
    (LightMode.GREEN, (1,)),
    (LightMode.COUNTDOWN, (2, 3)),
    (LightMode.NONE, (4,)),
)


@dataclass
class GuidanceOutput:
    light: LightMode
    announce: bool
    orientation: Orientation
    position: Position
    delta_theta: Optional[float]
    x_int: Optional[float]

    def to_json_dict(self):
        return {
            "light": self.light.value,
            "announce": self.announce,
            "orientation": self.orientation.value,
            "position": self.position.value,
            "delta_theta": self.delta_theta,
            "x_int": self.x_int,
        }


class GuidanceState:
    """Per-stream ring buffers and the last announced light mode."""

    def __init__(self, homography: Optional[Homography] = None,
                 reference_resolution=REFERENCE_RESOLUTION):
        self.probs = deque(maxlen=WINDOW)
        self.endpoints = deque(maxlen=WINDOW)
        self.last_announced: Optional[LightMode] = None
        self.homography = homography or Homography.default()
        self.reference_resolution = reference_resolution


def decide_orientation(delta_theta: float) -> Orientation:
    """RotateLeft below -10 deg, RotateRight above +10 deg, else Aligned
    (strict inequalities; exactly 10 deg is still Aligned)."""
    if not np.isfinite(delta_theta):
        raise ValueError(f"delta_theta must be finite, got {delta_theta}")
    if delta_theta < -ANGLE_THRESHOLD_DEG:
        return Orientation.ROTATE_LEFT
    if delta_theta > ANGLE_THRESHOLD_DEG:
        return Orientation.ROTATE_RIGHT
    return Orientation.ALIGNED


def decide_position(x_int: float, width: float) -> Position:
    """Compare the x-intercept against the +/- 8.5%-of-width band around the
    image midline (w-1)/2. The three bands partition the real line."""
    if width <= 0:
        raise ValueError(f"image width must be positive, got {width}")
    midline = (width - 1.0) / 2.0
    band = POSITION_BAND_FRACTION * width
    if x_int > midline + band:
        return Position.MOVE_LEFT
    if x_int < midline - band:
        return Position.MOVE_RIGHT
    return Position.CENTERED


def merged_masses(mean_probs: np.ndarray):
    """Average 5-class probabilities folded into the four announced modes."""
    return {mode: float(sum(mean_probs[i] for i in idx)) for mode, idx in _MERGED}


def push_frame(state: GuidanceState, probs: Sequence[float],
               endpoints: Sequence[float], image_width: float) -> GuidanceOutput:
    """Feed one frame; returns the decision triple for the current window.

    ``probs`` is the 5-class softmax vector; ``endpoints`` are normalized
    (x1,y1,x2,y2). Fewer than five buffered frames yield Uncertain.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (5,):
        raise ValueError(f"probability vector must have 5 entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < -PROB_SUM_TOL):
        raise ValueError(f"malformed probability vector: {p.tolist()}")
    if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities must sum to 1 +/- {PROB_SUM_TOL}, got {p.sum()!r}")
    e = np.asarray(endpoints, dtype=np.float64)
    if e.shape != (4,):
        raise ValueError(f"endpoints must have 4 entries, got shape {e.shape}")

    state.probs.append(p)
    state.endpoints.append(e)

    if len(state.probs) < WINDOW:
        decided = LightMode.UNCERTAIN
    else:
        mean_probs = np.mean(state.probs, axis=0)
        decided = LightMode.UNCERTAIN
        for mode, mass in merged_masses(mean_probs).items():
            if mass > DECISION_THRESHOLD:
                decided = mode
                break

    announce = decided is not LightMode.UNCERTAIN and decided is not state.last_announced
    if announce:
        state.last_announced = decided

    mean_endpoints = np.mean(state.endpoints, axis=0)
    delta_theta: Optional[float] = None
    xi: Optional[float] = None
    orientation = Orientation.ALIGNED
    position = Position.CENTERED
    try:
        pix = endpoints_to_pixels(mean_endpoints, state.reference_resolution)
        delta_theta = birdseye_angle(pix, state.homography)
        orientation = decide_orientation(delta_theta)
    except GeometryError:
        delta_theta = None  # degenerate midline: hold Aligned as the safe default
    try:
        x1, y1, x2, y2 = mean_endpoints
        xi = x_intercept((x1 * image_width, y1), (x2 * image_width, y2))
        position = decide_position(xi, image_width)
    except GeometryError:
        xi = None

    return GuidanceOutput(decided, announce, orientation, position, delta_theta, xi)


def replay(lines, image_width: float, homography: Optional[Homography] = None,
           reference_resolution=REFERENCE_RESOLUTION):
    """Stream replay-format JSONL lines through a fresh state machine.

    Input lines: {"probs": [5 floats], "x1":..., "y1":..., "x2":..., "y2":...}.
    Yields one GuidanceOutput per input line.
    """
    state = GuidanceState(homography, reference_resolution)
    for index, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            probs = rec["probs"]
            endpoints = (rec["x1"], rec["y1"], rec["x2"], rec["y2"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"replay record {index}: {exc}") from None
        yield push_frame(state, probs, endpoints, image_width)
