"""Image-plane to bird's-eye mapping and the direction/intercept primitives.

The default homography maps capture-resolution (4032x3024) pixel coordinates
onto a bird's-eye ground plane in which an on-axis crossing midline is
vertical. Angles are measured against that vertical: 0 means the midline
points straight ahead, positive means it tilts right, range (-180, 180].
"""

from typing import Sequence, Tuple

import numpy as np


class GeometryError(ValueError):
    pass


class HorizonPointError(GeometryError):
    """Point maps to (or numerically at) the horizon: |w| < 1e-9."""


class HorizontalLineError(GeometryError):
    """x-intercept of a horizontal line is undefined."""


class ZeroLengthDirectionError(GeometryError):
    """Transformed endpoints coincide; no direction exists."""


# capture resolution the default matrix was calibrated at (width, height)
REFERENCE_RESOLUTION = (4032, 3024)

DEFAULT_HOMOGRAPHY_MATRIX = np.array([
    [-1.17079727e-01, -1.56391162e+00, 2.25203273e+03],
    [0.00000000e+00, -2.59783431e+00, 3.71606050e+03],
    [0.00000000e+00, -7.75749810e-04, 1.00000000e+00],
], dtype=np.float64)

# image-plane points and their bird's-eye images, at capture resolution
CORRESPONDENCES = (
    ((1671.0, 1440.0), (1671.0, 212.0)),
    ((2361.0, 1440.0), (2361.0, 212.0)),
    ((4032.0, 2171.0), (2361.0, 2812.0)),
    ((0.0, 2171.0), (1671.0, 2812.0)),
)


class Homography:
    """An invertible 3x3 projective map."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise GeometryError(f"homography must be 3x3, got shape {m.shape}")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise GeometryError("homography is singular (|det| <= 1e-12)")
        self.matrix = m

    @classmethod
    def default(cls) -> "Homography":
        return cls(DEFAULT_HOMOGRAPHY_MATRIX)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def from_file(cls, path) -> "Homography":
        """Nine numbers, row-major, whitespace- and/or comma-separated."""
        text = open(path, "r", encoding="utf-8").read().replace(",", " ")
        values = [float(tok) for tok in text.split()]
        if len(values) != 9:
            raise GeometryError(f"homography file must hold 9 numbers, found {len(values)}")
        return cls(np.array(values).reshape(3, 3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply(self, point):
        return apply_homography(self, point)


def _matrix(h) -> np.ndarray:
    if isinstance(h, Homography):
        return h.matrix
    return Homography(h).matrix


def apply_homography(h, point: Sequence[float]) -> Tuple[float, float]:
    """Map an (x, y) pixel point; raises HorizonPointError when the
    homogeneous coordinate vanishes."""
    m = _matrix(h)
    x, y = float(point[0]), float(point[1])
    v = m @ (x, y, 1.0)
    if abs(v[2]) < 1e-9:
        raise HorizonPointError(f"point at horizon: ({x}, {y}) maps to w={v[2]:.3e}")
    return float(v[0] / v[2]), float(v[1] / v[2])


def birdseye_angle(endpoints: Sequence[float], h) -> float:
    """Signed tilt of the start->end midline after mapping to bird's-eye.

    ``endpoints`` is (x1, y1, x2, y2) in pixels with (x1, y1) the start
    (lower) point. 0 deg = straight ahead, positive = tilts right,
    range (-180, 180].
    """
    x1, y1, x2, y2 = (float(v) for v in endpoints)
    sx, sy = apply_homography(h, (x1, y1))
    ex, ey = apply_homography(h, (x2, y2))
    dx, dy = ex - sx, ey - sy
    if dx == 0.0 and dy == 0.0:
        raise ZeroLengthDirectionError(
            f"zero-length direction: both endpoints map to ({sx:.3f}, {sy:.3f})"
        )
    # y grows downward; straight ahead is -y, so tilt = atan2(dx, -dy)
    theta = float(np.degrees(np.arctan2(dx, -dy)))
    if theta <= -180.0:
        theta += 360.0
    return theta


def x_intercept(p1: Sequence[float], p2: Sequence[float]) -> float:
    """x-coordinate where the line through p1 and p2 crosses y = 0."""
    x1, y1 = (float(v) for v in p1)
    x2, y2 = (float(v) for v in p2)
    if y1 == y2:
        raise HorizontalLineError(f"horizontal line: y1 == y2 == {y1}")
    return (x1 * y2 - x2 * y1) / (y2 - y1)


def endpoints_to_pixels(endpoints: Sequence[float],
                        resolution: Tuple[int, int] = REFERENCE_RESOLUTION):
    """Scale normalized (x1,y1,x2,y2) by a (width, height) resolution."""
    w, h = resolution
    x1, y1, x2, y2 = (float(v) for v in endpoints)
    return (x1 * w, y1 * h, x2 * w, y2 * h)
