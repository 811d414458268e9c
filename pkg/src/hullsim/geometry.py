"""Convex bodies, projections, support functions, hulls, and point-to-set distances.

Bodies come in four variants (interval, box, ball, H-polytope). All point
arguments are numpy arrays whose last axis is the space dimension, so every
closed-form operation is batch-friendly: shape (..., m) in, shape (..., m) out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

GEOM_TOL = 1e-9
HULL_TOL = 1e-7

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_CYCLES = 100_000
MIN_NORM_MAX_ITER = 100_000


class GeometryError(ValueError):
    """Invalid construction or a dimension/containment contract violation."""


class ProjectionSolverError(RuntimeError):
    """An iterative projection or distance solve hit its iteration cap.

    Carries the residual (or duality gap) achieved when the cap was reached.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


def _check_points(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise GeometryError(
            f"expected points with last axis of size {dim}, got shape {arr.shape}"
        )
    return arr


def row_norms(a: np.ndarray) -> np.ndarray:
    """Euclidean norm over the last axis (einsum path; norm(axis=...) is slow
    on some numpy builds)."""
    return np.sqrt(np.einsum("...i,...i->...", a, a))


class ConvexBody:
    """Base class for closed bounded convex sets with nonempty interior."""

    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support(self, u: np.ndarray) -> float:
        raise NotImplementedError

    def interior_margin(self, x: np.ndarray) -> np.ndarray:
        """Distance from x to the complement, negative outside the body."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def boundary_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(ConvexBody):
    """Closed interval [lo, hi] on the line (dimension 1)."""

    lo: float
    hi: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise GeometryError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    def project(self, x):
        x = _check_points(x, 1)
        return np.clip(x, self.lo, self.hi)

    def support(self, u):
        u = _check_direction(u, 1)
        return float(u[0] * (self.hi if u[0] > 0 else self.lo))

    def interior_margin(self, x):
        x = _check_points(x, 1)[..., 0]
        return np.minimum(x - self.lo, self.hi - x)

    def bounding_box(self):
        return np.array([self.lo]), np.array([self.hi])

    def boundary_points(self, count, rng):
        ends = np.array([[self.lo], [self.hi]])
        return ends[np.arange(count) % 2]


@dataclass(frozen=True, eq=False)
class Box(ConvexBody):
    """Axis-aligned box {x : lo <= x <= hi} in any dimension."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise GeometryError("box bounds must be 1-d arrays of equal length")
        if not np.all(lo < hi):
            raise GeometryError("box needs lo[i] < hi[i] for every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.size)

    def project(self, x):
        x = _check_points(x, self.dim)
        return np.clip(x, self.lo, self.hi)

    def support(self, u):
        u = _check_direction(u, self.dim)
        return float(np.sum(np.where(u > 0, u * self.hi, u * self.lo)))

    def interior_margin(self, x):
        x = _check_points(x, self.dim)
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def boundary_points(self, count, rng):
        pts = rng.uniform(self.lo, self.hi, size=(count, self.dim))
        axes = rng.integers(0, self.dim, size=count)
        sides = rng.integers(0, 2, size=count)
        vals = np.where(sides == 0, self.lo[axes], self.hi[axes])
        pts[np.arange(count), axes] = vals
        return pts


@dataclass(frozen=True, eq=False)
class Ball(ConvexBody):
    """Euclidean ball with given center and radius > 0."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.ndim != 1:
            raise GeometryError("ball center must be a 1-d array")
        if not self.radius > 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "dim", center.size)

    def project(self, x):
        x = _check_points(x, self.dim)
        off = x - self.center
        norms = row_norms(off)[..., None]
        scale = np.where(norms > self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        return self.center + off * scale

    def support(self, u):
        u = _check_direction(u, self.dim)
        return float(u @ self.center + self.radius * np.linalg.norm(u))

    def interior_margin(self, x):
        x = _check_points(x, self.dim)
        return self.radius - row_norms(x - self.center)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def boundary_points(self, count, rng):
        dirs = rng.standard_normal((count, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return self.center + self.radius * dirs


@dataclass(frozen=True, eq=False)
class HPolytope(ConvexBody):
    """Bounded intersection of half-spaces {x : normals @ x <= offsets}.

    Construction solves 2m support LPs along the coordinate axes, which both
    certifies that the feasible set is nonempty and bounded and caches its
    bounding box.
    """

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float)
        if normals.ndim != 2 or offsets.ndim != 1 or normals.shape[0] != offsets.size:
            raise GeometryError("need normals of shape (k, m) and offsets of shape (k,)")
        row_norms = np.linalg.norm(normals, axis=1)
        if np.any(row_norms <= 0):
            raise GeometryError("every half-space normal must be nonzero")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "dim", normals.shape[1])
        object.__setattr__(self, "_row_norms", row_norms)
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            hi[i] = self._support_lp(e)
            lo[i] = -self._support_lp(-e)
        object.__setattr__(self, "_bbox", (lo, hi))

    def _support_lp(self, u: np.ndarray) -> float:
        res = linprog(
            -u,
            A_ub=self.normals,
            b_ub=self.offsets,
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        if res.status == 2:
            raise GeometryError("half-space system is infeasible (empty body)")
        if res.status == 3:
            raise GeometryError("half-space system is unbounded in a coordinate direction")
        if not res.success:
            raise GeometryError(f"support LP failed: {res.message}")
        return float(-res.fun)

    def support_point(self, u: np.ndarray) -> np.ndarray:
        """A maximizer of <u, .> over the body (an extreme point)."""
        u = _check_direction(u, self.dim)
        res = linprog(
            -u,
            A_ub=self.normals,
            b_ub=self.offsets,
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        if not res.success:
            raise GeometryError(f"support LP failed: {res.message}")
        return np.asarray(res.x, dtype=float)

    def project(self, x):
        x = _check_points(x, self.dim)
        return _dykstra_halfspaces(self, x)

    def support(self, u):
        u = _check_direction(u, self.dim)
        return self._support_lp(u)

    def interior_margin(self, x):
        x = _check_points(x, self.dim)
        slack = self.offsets - x @ self.normals.T
        return (slack / self._row_norms).min(axis=-1)

    def bounding_box(self):
        lo, hi = self._bbox
        return lo.copy(), hi.copy()

    def boundary_points(self, count, rng):
        dirs = rng.standard_normal((count, self.dim))
        return np.array([self.support_point(d) for d in dirs])


def _check_direction(u, dim: int) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (dim,):
        raise GeometryError(f"expected a direction of shape ({dim},), got {u.shape}")
    return u


def _dykstra_halfspaces(body: HPolytope, x: np.ndarray) -> np.ndarray:
    """Dykstra's alternating projections onto the defining half-spaces.

    Points are processed as a batch but each one is frozen the first cycle it
    reaches a fixed point of the iteration to tolerance DYKSTRA_TOL, so the
    result for a given point does not depend on what else is in the batch.
    Iterate displacement alone is not a fixed-point certificate: the iterate
    can sit feasible and motionless for several cycles while the correction
    vectors are still accumulating, then move again. Freezing therefore also
    requires the corrections to have stopped drifting and the point to be
    feasible.
    """
    flat = x.reshape(-1, body.dim)
    out = flat.copy()
    normals = body.normals
    offsets = body.offsets
    row_norms = body._row_norms
    sq_norms = row_norms**2

    slack = flat @ normals.T - offsets
    active = np.flatnonzero(np.any(slack > 0, axis=1))
    if active.size == 0:
        return out.reshape(x.shape)

    y = flat[active].copy()
    corr = np.zeros((normals.shape[0], active.size, body.dim))
    moved = np.full(active.size, np.inf)
    for _ in range(DYKSTRA_MAX_CYCLES):
        y_prev = y.copy()
        corr_prev = corr.copy()
        for i in range(normals.shape[0]):
            w = y + corr[i]
            viol = np.maximum(w @ normals[i] - offsets[i], 0.0)
            y = w - (viol / sq_norms[i])[:, None] * normals[i]
            corr[i] = w - y
        moved = np.linalg.norm(y - y_prev, axis=1)
        drift = np.linalg.norm(corr - corr_prev, axis=2).max(axis=0)
        infeas = np.max((y @ normals.T - offsets) / row_norms, axis=1)
        done = (moved <= DYKSTRA_TOL) & (drift <= DYKSTRA_TOL) & (infeas <= DYKSTRA_TOL)
        if np.any(done):
            out[active[done]] = y[done]
            keep = ~done
            active = active[keep]
            if active.size == 0:
                return out.reshape(x.shape)
            y = y[keep]
            corr = corr[:, keep]
            moved = moved[keep]
    raise ProjectionSolverError(
        "Dykstra projection did not converge within the cycle cap",
        residual=float(np.max(moved)),
    )


# ---------------------------------------------------------------------------
# module-level operations


def project(body: ConvexBody, x) -> np.ndarray:
    """Orthogonal projection of x (batched on leading axes) onto the body."""
    return body.project(x)


def distance_to_body(body: ConvexBody, x) -> np.ndarray | float:
    """Euclidean distance from x to the body; zero inside."""
    x = _check_points(x, body.dim)
    d = row_norms(x - body.project(x))
    return float(d) if d.ndim == 0 else d


def contains(body: ConvexBody, x, tol: float = GEOM_TOL):
    """Whether distance_to_body(body, x) <= tol, elementwise over the batch."""
    if tol < 0:
        raise GeometryError("tolerance must be nonnegative")
    d = distance_to_body(body, x)
    res = np.asarray(d) <= tol
    return bool(res) if res.ndim == 0 else res


def support(body: ConvexBody, u) -> float:
    """Support value sup {<u, y> : y in body}; requires a nonzero direction."""
    u = _check_direction(u, body.dim)
    if not np.linalg.norm(u) > 0:
        raise GeometryError("support direction must be nonzero")
    return body.support(u)


def normal_cone_check(body: ConvexBody, x, s, tol: float = GEOM_TOL) -> bool:
    """True iff s lies in the normal cone of the body at x.

    Implemented as support(body, s) - <s, x> <= tol. The base point must
    belong to the body within tol.
    """
    x = _check_points(x, body.dim)
    s = _check_direction(s, body.dim)
    if distance_to_body(body, x) > tol:
        raise GeometryError("normal cone queried at a point outside the body")
    if np.linalg.norm(s) == 0:
        return True
    return body.support(s) - float(s @ x) <= tol


def norm_bound(body: ConvexBody) -> float:
    """An upper bound on sup {||y|| : y in body}, from the bounding box."""
    if isinstance(body, Ball):
        return float(np.linalg.norm(body.center) + body.radius)
    lo, hi = body.bounding_box()
    return float(np.sqrt(np.sum(np.maximum(lo**2, hi**2))))


def chebyshev_center(body: ConvexBody) -> tuple[np.ndarray, float]:
    """Center and radius of a largest inscribed ball."""
    if isinstance(body, Interval):
        return np.array([(body.lo + body.hi) / 2]), (body.hi - body.lo) / 2
    if isinstance(body, Box):
        return (body.lo + body.hi) / 2, float(np.min((body.hi - body.lo) / 2))
    if isinstance(body, Ball):
        return body.center.copy(), float(body.radius)
    if isinstance(body, HPolytope):
        m = body.dim
        c = np.zeros(m + 1)
        c[-1] = -1.0
        A = np.hstack([body.normals, body._row_norms[:, None]])
        res = linprog(c, A_ub=A, b_ub=body.offsets, bounds=[(None, None)] * m + [(0, None)], method="highs")
        if not res.success:
            raise GeometryError(f"Chebyshev center LP failed: {res.message}")
        return np.asarray(res.x[:m], dtype=float), float(res.x[m])
    raise GeometryError(f"unsupported body type {type(body).__name__}")


def as_interval(body: ConvexBody) -> tuple[float, float]:
    """Endpoints [lo, hi] of a one-dimensional body."""
    if body.dim != 1:
        raise GeometryError("as_interval needs a one-dimensional body")
    lo, hi = body.bounding_box()
    return float(lo[0]), float(hi[0])


# ---------------------------------------------------------------------------
# convex hulls


@dataclass(frozen=True, eq=False)
class Hull:
    """Convex hull of a finite point cloud.

    points holds the full generating cloud, shape (p, m). For m = 1 the
    vertices are the min and max; for m = 2 they are the extreme points in
    counterclockwise order starting from the lexicographic minimum; for
    m >= 3 the cloud itself is kept as the generator set.
    """

    dim: int
    points: np.ndarray
    vertices: np.ndarray


def convex_hull(points) -> Hull:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise GeometryError("convex hull of an empty point set is undefined")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise GeometryError("points must form a (p, m) array")
    m = pts.shape[1]
    if m == 1:
        vals = pts[:, 0]
        lo, hi = float(vals.min()), float(vals.max())
        verts = np.array([[lo]]) if lo == hi else np.array([[lo], [hi]])
    elif m == 2:
        verts = _monotone_chain(pts)
    else:
        verts = pts.copy()
    return Hull(dim=m, points=pts.copy(), vertices=verts)


def _prune_interior(pts: np.ndarray) -> np.ndarray:
    """Drop points strictly inside the polygon of eight directional extremes.

    Dropped points are convex combinations of surviving ones, so the hull
    vertices of the survivors equal those of the full cloud.
    """
    dirs = np.array(
        [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]],
        dtype=float,
    )
    anchor_idx = np.unique(np.argmax(pts @ dirs.T, axis=0))
    anchor = _monotone_chain(pts[anchor_idx])
    if anchor.shape[0] < 3:
        return pts
    edges = np.roll(anchor, -1, axis=0) - anchor
    rel = pts[None, :, :] - anchor[:, None, :]
    cross = edges[:, None, 0] * rel[..., 1] - edges[:, None, 1] * rel[..., 0]
    strictly_inside = np.all(cross > 1e-12, axis=0)
    return pts[~strictly_inside]


def _monotone_chain(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; collinear boundary points are dropped."""
    if pts.shape[0] > 64:
        pts = _prune_interior(pts)
    uniq = np.unique(pts, axis=0)  # lexicographic sort on (x, y)
    if uniq.shape[0] <= 2:
        return uniq

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in uniq[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def distance_to_hull(hull: Hull, x, tol: float = HULL_TOL) -> float:
    """Distance from x to the convex hull of the generators.

    Exact in dimensions one (interval) and two (polygon); otherwise solved by
    the min-norm-point scheme over the generator simplex to absolute accuracy
    tol.
    """
    if not tol > 0:
        raise GeometryError("hull distance tolerance must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (hull.dim,):
        raise GeometryError(f"query point must have shape ({hull.dim},), got {x.shape}")
    if hull.dim == 1:
        lo, hi = hull.vertices[0, 0], hull.vertices[-1, 0]
        return float(max(lo - x[0], x[0] - hi, 0.0))
    if hull.dim == 2:
        return _polygon_distance(hull.vertices, x)
    return min_norm_point_distance(hull.points, x, tol)


def _segment_distance(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(x - a))
    t = float(np.clip((x - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(x - (a + t * ab)))


def _polygon_distance(verts: np.ndarray, x: np.ndarray) -> float:
    k = verts.shape[0]
    if k == 1:
        return float(np.linalg.norm(x - verts[0]))
    if k == 2:
        return _segment_distance(verts[0], verts[1], x)
    edges = np.roll(verts, -1, axis=0) - verts
    rel = x - verts
    crosses = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
    if np.all(crosses >= 0):  # counterclockwise polygon: inside or on boundary
        return 0.0
    return min(
        _segment_distance(verts[i], verts[(i + 1) % k], x) for i in range(k)
    )


def min_norm_point_distance(
    points, x, tol: float = HULL_TOL, max_iter: int = MIN_NORM_MAX_ITER
) -> float:
    """Distance from x to conv(points) by Frank-Wolfe with away steps.

    Minimizes ||x - V @ w||^2 over the simplex of generator weights with exact
    line search, stopping once the Frank-Wolfe duality gap is <= tol**2, which
    bounds the distance error by tol.
    """
    V = np.asarray(points, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if V.ndim != 2 or x.shape != (V.shape[1],):
        raise GeometryError("generators must be (p, m) and the query point (m,)")
    if not tol > 0:
        raise GeometryError("tolerance must be positive")
    p = V.shape[0]

    start = int(np.argmin(np.linalg.norm(V - x, axis=1)))
    w = np.zeros(p)
    w[start] = 1.0
    y = V[start].copy()

    gap = np.inf
    for _ in range(max_iter):
        r = y - x
        grad = 2.0 * (V @ r)
        s = int(np.argmin(grad))
        mean_grad = float(w @ grad)
        gap = mean_grad - grad[s]
        if gap <= tol * tol:
            return float(np.linalg.norm(r))

        active = np.flatnonzero(w > 0)
        a = int(active[np.argmax(grad[active])])
        toward_gain = mean_grad - grad[s]
        away_gain = grad[a] - mean_grad
        if toward_gain >= away_gain:
            direction = V[s] - y
            gamma_max = 1.0
            denom = float(direction @ direction)
            if denom == 0.0:
                return float(np.linalg.norm(r))
            gamma = min(max(-float(r @ direction) / denom, 0.0), gamma_max)
            w *= 1.0 - gamma
            w[s] += gamma
        else:
            direction = y - V[a]
            wa = w[a]
            if wa >= 1.0:  # single-vertex support, nothing to move away from
                return float(np.linalg.norm(r))
            gamma_max = wa / (1.0 - wa)
            denom = float(direction @ direction)
            if denom == 0.0:
                return float(np.linalg.norm(r))
            gamma = min(max(-float(r @ direction) / denom, 0.0), gamma_max)
            w *= 1.0 + gamma
            w[a] -= gamma
        np.maximum(w, 0.0, out=w)
        w /= w.sum()
        y = V.T @ w
    raise ProjectionSolverError(
        "min-norm-point solver exceeded its iteration cap", residual=float(gap)
    )
