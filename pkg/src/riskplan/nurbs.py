"""Rational B-spline curves over (x, y, z, speed-norm).

Basis evaluation follows the classic knot-span recurrence (The NURBS Book,
algorithms A2.1 and A2.2). Curves are immutable values and evaluation is
pure, so sampling can run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterRangeError, ValidationError


def find_span(knots: np.ndarray, degree: int, u: float) -> int:
    """Index i such that knots[i] <= u < knots[i+1] (last span at u_max)."""
    n = len(knots) - degree - 2  # index of the last control point
    if u >= knots[n + 1]:
        return n
    if u <= knots[degree]:
        return degree
    low, high = degree, n + 1
    mid = (low + high) // 2
    while u < knots[mid] or u >= knots[mid + 1]:
        if u < knots[mid]:
            high = mid
        else:
            low = mid
        mid = (low + high) // 2
    return mid


def basis_functions(knots, degree: int, u: float) -> tuple[np.ndarray, int]:
    """The degree+1 nonzero basis values at u and the knot span index.

    Values are >= 0 and sum to 1 (partition of unity). u must lie in the
    clamped parameter range [knots[degree], knots[-degree-1]].
    """
    knots = np.asarray(knots, dtype=float)
    lo, hi = knots[degree], knots[-degree - 1]
    if u < lo or u > hi:
        raise ParameterRangeError(f"parameter {u} outside curve range [{lo}, {hi}]")
    span = find_span(knots, degree, u)
    values = np.zeros(degree + 1)
    values[0] = 1.0
    left = np.zeros(degree + 1)
    right = np.zeros(degree + 1)
    for j in range(1, degree + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            temp = values[r] / (right[r + 1] + left[j - r])
            values[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        values[j] = saved
    return values, span


def make_clamped_uniform_knots(n_ctrl: int, degree: int) -> np.ndarray:
    """Clamped knot vector on [0, 1] with equally spaced interior knots.

    Length is n_ctrl + degree + 1; end knots repeat degree+1 times so the
    curve interpolates its end control points.
    """
    if n_ctrl < degree + 1:
        raise ValidationError(
            f"need at least degree+1 = {degree + 1} control points, got {n_ctrl}"
        )
    n_interior = n_ctrl - degree - 1
    interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def basis_matrix(knots, degree: int, params: np.ndarray) -> np.ndarray:
    """Dense matrix B with B[j, i] = N_{i,degree}(params[j]).

    One row per parameter value; used to batch curve evaluation as a
    matrix product.
    """
    knots = np.asarray(knots, dtype=float)
    n_ctrl = len(knots) - degree - 1
    mat = np.zeros((len(params), n_ctrl))
    for j, u in enumerate(np.asarray(params, dtype=float)):
        values, span = basis_functions(knots, degree, u)
        mat[j, span - degree : span + 1] = values
    return mat


@dataclass(frozen=True)
class NurbsCurve4D:
    """Clamped rational B-spline with 4D control points (x, y, z, speed)."""

    control_points: np.ndarray
    weights: np.ndarray
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        knots = np.asarray(self.knots, dtype=float)
        problems = []
        if cp.ndim != 2 or cp.shape[1] != 4:
            problems.append("control_points must have shape (n+1, 4)")
        elif cp.shape[0] < self.degree + 1:
            problems.append("need at least degree+1 control points")
        if w.shape != (cp.shape[0],):
            problems.append("weights must match control point count")
        elif not np.all(w > 0):
            problems.append("all weights must be > 0")
        if len(knots) != cp.shape[0] + self.degree + 1:
            problems.append("knot count must equal control points + degree + 1")
        if np.any(np.diff(knots) < 0):
            problems.append("knots must be nondecreasing")
        p = self.degree
        if len(knots) >= 2 * (p + 1):
            if knots[p] != knots[0] or knots[-p - 1] != knots[-1]:
                problems.append("knot vector must be clamped (end multiplicity degree+1)")
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "knots", knots)

    @property
    def param_range(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def evaluate(self, u: float) -> np.ndarray:
        return evaluate(self, u)


def evaluate(curve: NurbsCurve4D, u: float) -> np.ndarray:
    """Point on the curve: weighted basis blend of the control points.

    Clamped end parameters return the end control points exactly.
    """
    lo, hi = curve.param_range
    if u < lo or u > hi:
        raise ParameterRangeError(f"parameter {u} outside curve range [{lo}, {hi}]")
    if u == lo:
        return curve.control_points[0].copy()
    if u == hi:
        return curve.control_points[-1].copy()
    values, span = basis_functions(curve.knots, curve.degree, u)
    idx = slice(span - curve.degree, span + 1)
    bw = values * curve.weights[idx]
    return (bw @ curve.control_points[idx]) / bw.sum()


@dataclass(frozen=True)
class TrajectorySamples:
    """Discrete form of a curve: positions, speed profile, and the 3D
    length of every segment between consecutive samples."""

    positions: np.ndarray
    speeds: np.ndarray
    segment_lengths: np.ndarray
    param_values: np.ndarray

    def __post_init__(self):
        if len(self.speeds) != len(self.positions):
            raise ValidationError("speeds and positions must have equal length")
        if len(self.segment_lengths) != len(self.positions) - 1:
            raise ValidationError("segment count must be sample count - 1")


def sample_uniform(curve: NurbsCurve4D, n_samples: int) -> TrajectorySamples:
    """Evaluate at n_samples equally spaced parameters over the full range."""
    if n_samples < 2:
        raise ValidationError("n_samples must be >= 2")
    lo, hi = curve.param_range
    params = np.linspace(lo, hi, n_samples)
    points = np.array([evaluate(curve, u) for u in params])
    positions = points[:, :3]
    speeds = points[:, 3]
    segment_lengths = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    return TrajectorySamples(
        positions=positions,
        speeds=speeds,
        segment_lengths=segment_lengths,
        param_values=params,
    )
