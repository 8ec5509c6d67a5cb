"""World model: domain bounds, obstacle primitives, voxel occupancy with a
Euclidean distance field, and oriented-bounding-box keep-out hulls.

Everything here is immutable after construction and all queries are pure, so
the same environment can be shared by parallel cost evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import ndimage

from .errors import CapacityError, OutOfDomainError, ValidationError

DEFAULT_RESOLUTION = 0.5
DEFAULT_MAX_VOXELS = 20_000_000


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned planning domain with the speed bound for the vehicle."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    v_max: float

    def __post_init__(self):
        object.__setattr__(self, "min_corner", _vec3(self.min_corner, "min_corner"))
        object.__setattr__(self, "max_corner", _vec3(self.max_corner, "max_corner"))
        if not np.all(self.min_corner < self.max_corner):
            raise ValidationError("domain min_corner must be < max_corner componentwise")
        if not self.v_max > 0:
            raise ValidationError("domain v_max must be > 0")

    @property
    def extent(self) -> np.ndarray:
        return self.max_corner - self.min_corner

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=-1)


@dataclass(frozen=True)
class BoxObstacle:
    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_corner", _vec3(self.min_corner, "box.min"))
        object.__setattr__(self, "max_corner", _vec3(self.max_corner, "box.max"))
        if not np.all(self.min_corner < self.max_corner):
            raise ValidationError("box obstacle min must be < max componentwise")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=-1)


@dataclass(frozen=True)
class SphereObstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "sphere.center"))
        if self.radius < 0:
            raise ValidationError("sphere radius must be >= 0")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.linalg.norm(pts - self.center, axis=-1) <= self.radius


@dataclass(frozen=True)
class CapsuleObstacle:
    """Segment swept by a sphere; models cables and pylon members."""

    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "endpoint_a", _vec3(self.endpoint_a, "capsule.a"))
        object.__setattr__(self, "endpoint_b", _vec3(self.endpoint_b, "capsule.b"))
        if self.radius < 0:
            raise ValidationError("capsule radius must be >= 0")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        ab = self.endpoint_b - self.endpoint_a
        denom = float(ab @ ab)
        if denom == 0.0:
            closest = self.endpoint_a
        else:
            t = np.clip((pts - self.endpoint_a) @ ab / denom, 0.0, 1.0)
            closest = self.endpoint_a + t[..., None] * ab
        return np.linalg.norm(pts - closest, axis=-1) <= self.radius


ObstaclePrimitive = Union[BoxObstacle, SphereObstacle, CapsuleObstacle]


@dataclass(frozen=True)
class OrientedHull:
    """Oriented bounding box around protected infrastructure.

    ``rotation`` maps hull-frame coordinates to world frame (columns are the
    hull's local axes expressed in world coordinates).
    """

    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "hull.center"))
        object.__setattr__(self, "half_extents", _vec3(self.half_extents, "hull.half_extents"))
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3):
            raise ValidationError("hull rotation must be a 3x3 matrix")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise ValidationError("hull rotation must be orthonormal within 1e-9")
        object.__setattr__(self, "rotation", rot)
        if not np.all(self.half_extents > 0):
            raise ValidationError("hull half_extents must be > 0")

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed Euclidean distance from points to the hull surface.

        Positive outside, negative inside (depth to the nearest face).
        Accepts any leading shape of points.
        """
        pts = np.asarray(points, dtype=float)
        local = (pts - self.center) @ self.rotation
        d = np.abs(local) - self.half_extents
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(np.max(d, axis=-1), 0.0)
        return outside + inside


def hull_signed_distance(hull: OrientedHull, point) -> float:
    """Distance from a single point to a hull surface (negative inside)."""
    return float(hull.signed_distance(np.asarray(point, dtype=float)))


@dataclass(frozen=True)
class SafetyParams:
    """Influence radii and weights for the two-term safety cost."""

    r_sdf_min: float
    r_sdf_max: float
    r_ch_max: float
    k_a: float = 0.5
    k_b: float = 0.5
    r_uav: float = 0.5

    def __post_init__(self):
        problems = []
        if not 0 < self.r_sdf_min < self.r_sdf_max:
            problems.append("0 < r_sdf_min < r_sdf_max required")
        if not self.r_ch_max > 0:
            problems.append("r_ch_max must be > 0")
        if self.k_a < 0 or self.k_b < 0:
            problems.append("k_a and k_b must be >= 0")
        if abs(self.k_a + self.k_b - 1.0) > 1e-9:
            problems.append("k_a + k_b must equal 1")
        if self.r_uav < 0:
            problems.append("r_uav must be >= 0")
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True)
class SignedDistanceField:
    """Voxel grid of Euclidean distances from free space to the nearest
    occupied voxel center. Values are 0 exactly on occupied voxels."""

    origin: np.ndarray
    resolution: float
    dims: tuple
    distance: np.ndarray = field(repr=False)

    def query(self, points: np.ndarray, out_of_range: str = "raise") -> np.ndarray:
        """Trilinear interpolation of the distance grid at world points.

        Points within one voxel of the grid border are clamped onto it.
        ``out_of_range`` is either "raise" (OutOfDomainError) or "nan".
        """
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 1
        pts = np.atleast_2d(pts)
        res = self.resolution
        dims = np.asarray(self.dims)
        upper = self.origin + dims * res

        bad = np.any((pts < self.origin - res) | (pts > upper + res), axis=-1)
        if np.any(bad) and out_of_range == "raise":
            offender = pts[bad][0]
            raise OutOfDomainError(
                f"point {offender.tolist()} is outside the distance field by more than one voxel"
            )

        g = (pts - self.origin) / res - 0.5
        g = np.clip(g, 0.0, dims - 1.0)
        i0 = np.minimum(np.floor(g).astype(int), np.maximum(dims - 2, 0))
        frac = np.clip(g - i0, 0.0, 1.0)
        i1 = np.minimum(i0 + 1, dims - 1)

        d = self.distance
        fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
        x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
        x1, y1, z1 = i1[:, 0], i1[:, 1], i1[:, 2]

        c000 = d[x0, y0, z0]
        c100 = d[x1, y0, z0]
        c010 = d[x0, y1, z0]
        c110 = d[x1, y1, z0]
        c001 = d[x0, y0, z1]
        c101 = d[x1, y0, z1]
        c011 = d[x0, y1, z1]
        c111 = d[x1, y1, z1]

        c00 = c000 * (1 - fx) + c100 * fx
        c10 = c010 * (1 - fx) + c110 * fx
        c01 = c001 * (1 - fx) + c101 * fx
        c11 = c011 * (1 - fx) + c111 * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out = c0 * (1 - fz) + c1 * fz

        if np.any(bad):
            out = np.where(bad, np.nan, out)
        return out[0] if scalar else out


def voxel_centers(origin: np.ndarray, resolution: float, dims) -> np.ndarray:
    """World coordinates of all voxel centers, shape (nx, ny, nz, 3)."""
    axes = [origin[k] + (np.arange(dims[k]) + 0.5) * resolution for k in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1)


def rasterize(obstacles, domain: DomainBox, resolution: float, max_voxels: int) -> tuple:
    """Occupancy grid over the domain: a voxel is occupied iff its center
    lies inside any primitive."""
    if resolution <= 0:
        raise ValidationError("resolution must be > 0")
    dims = tuple(int(np.ceil(e / resolution)) for e in domain.extent)
    dims = tuple(max(d, 1) for d in dims)
    n_voxels = int(np.prod(dims, dtype=np.int64))
    if n_voxels > max_voxels:
        raise CapacityError(
            f"grid of {dims} = {n_voxels} voxels exceeds the budget of {max_voxels}; "
            "raise max_voxels or coarsen the resolution"
        )
    centers = voxel_centers(domain.min_corner, resolution, dims)
    occupied = np.zeros(dims, dtype=bool)
    flat = centers.reshape(-1, 3)
    for obs in obstacles:
        occupied |= obs.contains(flat).reshape(dims)
    return occupied, dims


def build_sdf(
    obstacles,
    domain: DomainBox,
    resolution: float = DEFAULT_RESOLUTION,
    max_voxels: int = DEFAULT_MAX_VOXELS,
) -> SignedDistanceField:
    """Rasterize primitives and compute the exact Euclidean distance
    transform of free space to occupied voxel centers.

    With no obstacles every cell holds a sentinel larger than the domain
    diagonal, so queries read as "infinitely far".
    """
    occupied, dims = rasterize(obstacles, domain, resolution, max_voxels)
    if occupied.any():
        distance = ndimage.distance_transform_edt(~occupied, sampling=resolution)
    else:
        distance = np.full(dims, 2.0 * domain.diagonal + resolution)
    return SignedDistanceField(
        origin=domain.min_corner.copy(),
        resolution=float(resolution),
        dims=dims,
        distance=np.ascontiguousarray(distance, dtype=float),
    )


def query_distance(sdf: SignedDistanceField, point) -> float:
    """Interpolated clearance at a single world point."""
    return float(sdf.query(np.asarray(point, dtype=float)))


@dataclass(frozen=True)
class Environment:
    """Immutable bundle of everything the cost functions need to know
    about the world."""

    domain: DomainBox
    obstacles: tuple
    hulls: tuple
    sdf: SignedDistanceField

    def clearance(self, points: np.ndarray, out_of_range: str = "raise") -> np.ndarray:
        return self.sdf.query(points, out_of_range=out_of_range)


def build_environment(
    domain: DomainBox,
    obstacles=(),
    hulls=(),
    resolution: float = DEFAULT_RESOLUTION,
    max_voxels: int = DEFAULT_MAX_VOXELS,
) -> Environment:
    sdf = build_sdf(obstacles, domain, resolution, max_voxels)
    return Environment(domain=domain, obstacles=tuple(obstacles), hulls=tuple(hulls), sdf=sdf)
