"""Densify sparse indications into full masks.

Pupil and iris boundary points (one per retained ray) are fitted with a
direct least-squares ellipse; the eye contour is densified by linear
interpolation of the retained boundary radii over angle. Mask assembly
enforces the nesting convention: pupil inside iris inside eye, with the
iris mask covering only the visible annulus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .exceptions import FitError
from .eye_region import BoundaryPoints
from .rays import RayFan
from .validation import check_mask


@dataclass(frozen=True)
class EllipseParams:
    """Center, semi-axes (major >= minor), and rotation in [0, pi)."""

    center: tuple[float, float]
    semi_major: float
    semi_minor: float
    rotation: float

    def __post_init__(self):
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError(
                f"axes must satisfy major >= minor > 0, got "
                f"{self.semi_major}, {self.semi_minor}"
            )

    def contains(self, xs, ys) -> np.ndarray:
        """Boolean membership of points (inclusive of the boundary)."""
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        dx = np.asarray(xs, dtype=np.float64) - self.center[0]
        dy = np.asarray(ys, dtype=np.float64) - self.center[1]
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (u / self.semi_major) ** 2 + (v / self.semi_minor) ** 2 <= 1.0


@dataclass
class MaskSet:
    """Binary masks for the three classes; iris is the visible annulus."""

    pupil: np.ndarray
    iris: np.ndarray
    eye: np.ndarray

    @classmethod
    def empty(cls, shape) -> "MaskSet":
        z = np.zeros(shape, dtype=bool)
        return cls(pupil=z.copy(), iris=z.copy(), eye=z.copy())

    def copy(self) -> "MaskSet":
        return MaskSet(self.pupil.copy(), self.iris.copy(), self.eye.copy())


def fit_ellipse(points) -> EllipseParams:
    """Direct least-squares ellipse fit (ellipse-specific constraint).

    Args:
        points: (n, 2) array of (x, y) with n >= 5, not collinear.

    Raises:
        FitError: too few points or no valid ellipse solution.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError(f"expected (n, 2) points, got shape {pts.shape}")
    if len(pts) < 5:
        raise FitError(f"need at least 5 points, got {len(pts)}")

    # Center and scale for conditioning; parameters transform back exactly.
    mean = pts.mean(axis=0)
    spread = pts.std(axis=0).mean()
    scale = spread if spread > 1e-12 else 1.0
    u = (pts[:, 0] - mean[0]) / scale
    v = (pts[:, 1] - mean[1]) / scale

    d1 = np.column_stack([u * u, u * v, v * v])
    d2 = np.column_stack([u, v, np.ones_like(u)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise FitError("fit failed: degenerate point configuration") from exc
    m = s1 + s2 @ t
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    evals, evecs = np.linalg.eig(m)
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    valid = np.flatnonzero((cond > 0) & np.isreal(evals))
    if len(valid) == 0:
        raise FitError("fit failed: no ellipse solution")
    a1 = np.real(evecs[:, valid[0]])
    coeffs = np.concatenate([a1, t @ a1])
    return _conic_to_params(coeffs, mean, scale)


def _conic_to_params(coeffs, mean, scale) -> EllipseParams:
    a, b, c, d, e, f = (float(x) for x in coeffs)
    den = b * b - 4.0 * a * c
    if den >= 0:
        raise FitError("fit failed: conic is not an ellipse")
    x0 = (2.0 * c * d - b * e) / den
    y0 = (2.0 * a * e - b * d) / den
    f_c = f + (d * x0 + e * y0) / 2.0
    q = np.array([[a, b / 2.0], [b / 2.0, c]])
    evals, evecs = np.linalg.eigh(q)
    rhs = -f_c
    if rhs == 0 or np.any(evals * rhs <= 0):
        raise FitError("fit failed: degenerate ellipse")
    semi = np.sqrt(rhs / evals)  # pairs with eigh's ascending eigenvalues
    major_idx = int(np.argmax(semi))
    minor_idx = 1 - major_idx
    vec = evecs[:, major_idx]
    rotation = float(np.arctan2(vec[1], vec[0])) % np.pi
    return EllipseParams(
        center=(mean[0] + scale * x0, mean[1] + scale * y0),
        semi_major=float(semi[major_idx] * scale),
        semi_minor=float(semi[minor_idx] * scale),
        rotation=rotation,
    )


def rasterize_ellipse(ellipse: EllipseParams, shape) -> np.ndarray:
    """Pixels whose centers fall inside the ellipse (boundary inclusive)."""
    h, w = shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    return ellipse.contains(xs, ys)


def densify_pupil_iris(indications) -> tuple[EllipseParams, EllipseParams]:
    """Fit pupil and iris ellipses to the retained rays' boundary points.

    Consumes the per-ray crossing distances (a for pupil, b for iris) from
    the indication geometry; needs at least 5 retained rays.
    """
    retained = indications.retained
    if len(retained) < 5:
        raise FitError(f"need >= 5 retained rays, got {len(retained)}")
    fan = indications.fan
    pupil_pts = [fan.point_at(s.ray_index, s.a) for s in retained]
    iris_pts = [fan.point_at(s.ray_index, s.b) for s in retained]
    return fit_ellipse(pupil_pts), fit_ellipse(iris_pts)


def interpolated_radius(boundary: BoundaryPoints, fan: RayFan, thetas) -> np.ndarray:
    """Boundary radius at arbitrary angles, linear in angle across gaps."""
    idx = np.flatnonzero(boundary.present)
    if len(idx) == 0:
        raise FitError("no retained boundary points")
    angles = 2.0 * np.pi * idx / fan.n_rays
    radii = boundary.distance[idx]
    xp = np.concatenate([[angles[-1] - 2.0 * np.pi], angles, [angles[0] + 2.0 * np.pi]])
    fp = np.concatenate([[radii[-1]], radii, [radii[0]]])
    q = np.mod(np.asarray(thetas, dtype=np.float64), 2.0 * np.pi)
    return np.interp(q, xp, fp)


def densify_eye(boundary: BoundaryPoints, fan: RayFan) -> np.ndarray:
    """Fill the region enclosed by the retained eye-boundary contour.

    Radii between retained rays interpolate linearly over angle. Requires
    at least 3 retained points whose angles span more than half a turn
    (largest circular gap < pi); otherwise the contour is unconstrained
    on one side and the caller should fall back to a convex hull.
    """
    idx = np.flatnonzero(boundary.present)
    if len(idx) < 3:
        raise FitError(f"insufficient coverage: {len(idx)} boundary points")
    angles = 2.0 * np.pi * idx / fan.n_rays
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2.0 * np.pi]]))
    if gaps.max() >= np.pi:
        raise FitError("insufficient coverage: boundary points span <= half a turn")
    h, w = fan.shape
    ox, oy = fan.origin
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - ox
    dy = ys - oy
    rho = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    r_at = interpolated_radius(boundary, fan, theta.ravel()).reshape(h, w)
    return rho <= r_at


def convex_hull_mask(points, shape) -> np.ndarray:
    """Filled convex hull of (x, y) points; degenerate inputs mark only
    the points themselves."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    h, w = shape[:2]
    out = np.zeros((h, w), dtype=bool)
    if len(pts) == 0:
        return out
    xs = np.clip(np.rint(pts[:, 0]).astype(int), 0, w - 1)
    ys = np.clip(np.rint(pts[:, 1]).astype(int), 0, h - 1)
    if len(pts) >= 3:
        try:
            from scipy.spatial import ConvexHull, QhullError

            hull = ConvexHull(pts)
            verts = [(float(pts[i, 0]), float(pts[i, 1])) for i in hull.vertices]
            img = Image.new("L", (w, h), 0)
            ImageDraw.Draw(img).polygon(verts, fill=1, outline=1)
            return np.asarray(img, dtype=bool)
        except QhullError:
            pass
    out[ys, xs] = True
    return out


def eye_mask_from_indications(eye_indications) -> np.ndarray:
    """Eye mask from indications alone: densified contour when boundary
    geometry exists, convex hull of the foreground pixels otherwise."""
    from . import labels as L

    if eye_indications.boundary is not None and eye_indications.boundary.present.any():
        try:
            return densify_eye(eye_indications.boundary, eye_indications.fan)
        except FitError:
            pass
    ys, xs = np.nonzero(eye_indications.labels == L.EYE_FG)
    return convex_hull_mask(np.column_stack([xs, ys]), eye_indications.labels.shape)


def masks_from_ellipses(
    pupil: EllipseParams,
    iris: EllipseParams,
    eye_mask,
    shape,
) -> MaskSet:
    """Assemble the final nested mask set.

    Final pupil = pupil raster clipped to iris and eye; final iris is the
    visible annulus (iris inside the eye, minus the pupil). Passing
    ``eye_mask=None`` skips eye clipping (early rounds before the eye
    stage activates) and leaves the eye mask empty.
    """
    pupil_r = rasterize_ellipse(pupil, shape)
    iris_r = rasterize_ellipse(iris, shape)
    if eye_mask is None:
        eye = np.zeros(shape[:2], dtype=bool)
        pupil_final = pupil_r & iris_r
        iris_final = iris_r & ~pupil_final
    else:
        eye = check_mask(eye_mask, shape=shape[:2], name="eye mask")
        pupil_final = pupil_r & iris_r & eye
        iris_final = (iris_r & eye) & ~pupil_final
    return MaskSet(pupil=pupil_final, iris=iris_final, eye=eye)
