"""Independent reference computations used by the test suite and diagnostics.

Everything here is deliberately separate from the main code paths: grid-search
projections, closed-form polygon distances from pairwise segments, empirical
CDFs, and the per-step growth-bound checker with its two constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Multifunction,
    PathEnsemble,
    SdeModel,
    bodies_at_nodes,
    gaussian_increments,
)
from .estimation import gaussian_cdf
from .geometry import Ball, Box, ConvexBody, HPolytope, Interval, norm_bound, row_norms


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class StepConstants:
    """Constants of the one-step growth bound

        ||h_next - x|| <= c1 * ||x_cur - x|| + c2 * ||sigma(x) z + drift(x) delta||

    for any probe x in the next body. The two suprema are sample maxima over
    points in the ball of radius m_c, hence lower bounds on the true values;
    for constant-diffusion models they do not enter (lip_diffusion = 0) and
    c1, c2 are exact.
    """

    c1: float
    c2: float
    m_c: float
    sup_inv_op_norm: float
    sup_inv_drift: float

    def __post_init__(self):
        if not (np.isfinite(self.c1) and np.isfinite(self.c2)):
            raise OracleError("constants must be finite")
        if self.c1 < 1 or self.c2 < 1:
            raise OracleError("constants must be at least one")


def constants_c1_c2(
    model: SdeModel,
    m_c: float,
    delta: float,
    probe_count: int = 1000,
    seed: int = 0,
) -> StepConstants:
    """Evaluate the two step-bound constants by sampling the m_c ball.

    c1 = 1 + (lip_drift + lip_diffusion * sup ||inv(sigma(v))|| * ||drift(v)||) * delta
    c2 = 1 + 2 * m_c * lip_diffusion * sup ||inv(sigma(v))||

    with both suprema over ||v|| <= m_c, estimated by probe_count uniform
    samples (operator norms from singular values).
    """
    if not m_c > 0:
        raise OracleError("m_c must be positive")
    if probe_count < 1000:
        raise OracleError("probe_count must be at least 1000")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((probe_count, model.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = m_c * rng.random(probe_count) ** (1.0 / model.dim)
    pts = dirs * radii[:, None]

    sig = np.asarray(model.diffusion(pts), dtype=float)
    svals = np.linalg.svd(sig, compute_uv=False)
    smallest = svals[:, -1]
    if np.any(smallest <= 1e-12):
        raise OracleError("diffusion matrix is singular at a sampled probe")
    inv_norms = 1.0 / smallest
    drift_norms = np.linalg.norm(model.drift(pts), axis=1)

    sup_inv = float(np.max(inv_norms))
    sup_inv_drift = float(np.max(inv_norms * drift_norms))
    c1 = 1.0 + (model.lip_drift + model.lip_diffusion * sup_inv_drift) * delta
    c2 = 1.0 + 2.0 * m_c * model.lip_diffusion * sup_inv
    return StepConstants(
        c1=c1, c2=c2, m_c=m_c, sup_inv_op_norm=sup_inv, sup_inv_drift=sup_inv_drift
    )


def brute_force_projection(body: ConvexBody, x, resolution: float) -> np.ndarray:
    """Nearest feasible point on a bounding-box grid of the given resolution.

    Feasibility is decided by the variant's defining inequalities, not by the
    projection code under test. Lands within resolution * sqrt(m) of the true
    projection for the fat bodies used in tests.
    """
    if body.dim > 2:
        raise OracleError("grid oracle supports dimensions one and two")
    if not resolution > 0:
        raise OracleError("resolution must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = body.bounding_box()
    axes = [np.arange(lo[i], hi[i] + resolution / 2, resolution) for i in range(body.dim)]
    if body.dim == 1:
        grid = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        grid = np.column_stack([gx.ravel(), gy.ravel()])

    if isinstance(body, (Interval, Box)):
        feasible = grid
    elif isinstance(body, Ball):
        mask = row_norms(grid - body.center) <= body.radius + 1e-12
        feasible = grid[mask]
    elif isinstance(body, HPolytope):
        mask = np.all(grid @ body.normals.T <= body.offsets + 1e-12, axis=1)
        feasible = grid[mask]
    else:
        raise OracleError(f"unsupported body type {type(body).__name__}")
    if feasible.shape[0] == 0:
        raise OracleError("no feasible grid point found; resolution too coarse")
    dists = row_norms(feasible - x)
    return feasible[int(np.argmin(dists))].copy()


def brute_force_hull_distance(points, x, grid_per_axis: int = 0) -> float:
    """Exact planar distance from x to the convex hull of the points.

    Membership is decided by separating the query with the normals of all
    point pairs; outside, the distance is the minimum over all pair segments.
    Independent of the hull construction and solvers under test.
    grid_per_axis is unused in the planar case and reserved for a future
    sampling oracle in dimension three.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise OracleError("pair-segment oracle requires two-dimensional points")
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise OracleError("query point must have shape (2,)")
    p = pts.shape[0]
    if p == 1:
        return float(np.linalg.norm(x - pts[0]))

    ii, jj = np.triu_indices(p, k=1)
    edges = pts[jj] - pts[ii]
    lengths = np.linalg.norm(edges, axis=1)
    nondeg = lengths > 0
    outside = False
    if np.any(nondeg):
        normals = np.column_stack([-edges[nondeg, 1], edges[nondeg, 0]])
        # x is separated from the cloud iff some pair normal (either sign) sees
        # it beyond every point
        for direction in (normals, -normals):
            h = np.max(pts @ direction.T, axis=0)
            if np.any(direction @ x > h):
                outside = True
                break
    else:
        outside = bool(np.linalg.norm(x - pts[0]) > 0)
    if not outside:
        return 0.0

    a = pts[ii]
    ab = edges
    denom = np.sum(ab * ab, axis=1)
    t = np.zeros_like(denom)
    pos = denom > 0
    t[pos] = np.clip(np.sum((x - a[pos]) * ab[pos], axis=1) / denom[pos], 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(x - closest, axis=1)))


def empirical_cdf(samples, x):
    """Fraction of samples at or below x (x may be an array of query points)."""
    arr = np.sort(np.asarray(samples, dtype=float))
    if arr.size == 0:
        raise OracleError("need at least one sample")
    counts = np.searchsorted(arr, np.asarray(x, dtype=float), side="right")
    res = counts / arr.size
    return float(res) if np.ndim(res) == 0 else res


@dataclass
class BoundCheckReport:
    """Outcome of the per-step growth-bound sweep."""

    n_checks: int
    n_violations: int
    worst_margin: float
    slack: float
    constants: StepConstants

    def to_dict(self) -> dict:
        return {
            "n_checks": self.n_checks,
            "n_violations": self.n_violations,
            "worst_margin": self.worst_margin,
            "slack": self.slack,
            "c1": self.constants.c1,
            "c2": self.constants.c2,
            "m_c": self.constants.m_c,
        }


def step1_bound_check(
    model: SdeModel,
    ensemble: PathEnsemble,
    mf: Multifunction,
    probes,
    slack: float = 1e-10,
    constants: StepConstants | None = None,
    probe_count: int = 4000,
) -> BoundCheckReport:
    """Check ||h_{j+1} - x|| <= c1 ||x_j - x|| + c2 ||sigma(x) z + drift(x) delta|| + slack.

    Runs over every copy, every step, and every probe x; each probe must lie
    in the body at the end of every step. The increments z are regenerated
    from the ensemble's stored seed. Passing constants overrides the sampled
    ones (used by the mutation test to confirm the check has power).
    """
    if ensemble.pre_projection is None:
        raise OracleError("ensemble was simulated without pre-projection storage")
    grid = ensemble.grid
    n, m = grid.steps, ensemble.dim
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != m:
        raise OracleError(f"probes must have {m} coordinates")

    bodies = bodies_at_nodes(mf, grid)
    from .geometry import distance_to_body

    for body in bodies[1:]:
        d = np.asarray(distance_to_body(body, probes))
        if np.any(d > 1e-9):
            raise OracleError("every probe must lie in the body at every step end")

    if constants is None:
        m_c = max(norm_bound(body) for body in bodies)
        constants = constants_c1_c2(model, m_c, grid.delta, probe_count=probe_count)

    z = np.empty((ensemble.n_copies, n, m))
    for i in range(ensemble.n_copies):
        z[i] = gaussian_increments(ensemble.seed, i + 1, n, m, grid.delta)

    worst = -np.inf
    violations = 0
    for x in probes:
        sig_x = np.asarray(model.diffusion(x), dtype=float)
        drift_x = np.asarray(model.drift(x), dtype=float)
        resid = row_norms(np.einsum("ij,cnj->cni", sig_x, z) + drift_x * grid.delta)
        lhs = row_norms(ensemble.pre_projection - x)
        rhs = constants.c1 * row_norms(ensemble.states[:, :-1] - x)
        margins = lhs - rhs - constants.c2 * resid
        worst = max(worst, float(margins.max()))
        violations += int(np.count_nonzero(margins > slack))
    n_checks = ensemble.n_copies * n * probes.shape[0]
    return BoundCheckReport(
        n_checks=n_checks,
        n_violations=violations,
        worst_margin=worst,
        slack=slack,
        constants=constants,
    )


@dataclass
class HittingReport:
    """Hit counts of pre-projection points in a ball around an interior probe.

    hits_per_node[j-1] counts copies whose pre-projection point at node j fell
    within the ball and strictly inside the body there; frequency pools all
    nodes.
    """

    probe: np.ndarray
    radius: float
    n_copies: int
    hits_per_node: np.ndarray
    total_hits: int = field(init=False)
    frequency: float = field(init=False)

    def __post_init__(self):
        self.total_hits = int(self.hits_per_node.sum())
        self.frequency = self.total_hits / (self.n_copies * self.hits_per_node.size)

    def to_dict(self) -> dict:
        return {
            "probe": self.probe.tolist(),
            "radius": self.radius,
            "n_copies": self.n_copies,
            "hits_per_node": self.hits_per_node.tolist(),
            "total_hits": self.total_hits,
            "frequency": self.frequency,
        }


def hitting_frequency(
    ensemble: PathEnsemble, mf: Multifunction, probe, radius: float = 0.1
) -> HittingReport:
    """Empirical frequency of pre-projection points near an interior probe."""
    if ensemble.pre_projection is None:
        raise OracleError("ensemble was simulated without pre-projection storage")
    if not radius > 0:
        raise OracleError("radius must be positive")
    probe = np.atleast_1d(np.asarray(probe, dtype=float))
    grid = ensemble.grid
    hits = np.zeros(grid.steps, dtype=int)
    for j in range(1, grid.steps + 1):
        body = mf(grid.node(j))
        h = ensemble.pre_projection[:, j - 1]
        close = row_norms(h - probe) <= radius
        inside = np.asarray(body.interior_margin(h)) > 0
        hits[j - 1] = int(np.count_nonzero(close & inside))
    return HittingReport(
        probe=probe, radius=radius, n_copies=ensemble.n_copies, hits_per_node=hits
    )


def cdf_sandwich_check(
    model: SdeModel,
    mf: Multifunction,
    ensemble: PathEnsemble,
    j: int,
    xs,
    probe_count: int = 2000,
    seed: int = 0,
) -> np.ndarray:
    """Margins of the analytic envelope around the empirical pre-projection CDF.

    For a one-dimensional model the pre-projection value at node j satisfies

        lo_env(x) = Phi(-|x - up_shift| / (sig_min sqrt(delta)))
        hi_env(x) = Phi(+|x - low_shift| / (sig_min sqrt(delta)))

    with low_shift = -m_c + delta * min drift, up_shift = m_c + delta * max
    drift over |v| <= m_c, and sig_min the smallest diffusion value there.
    Returns, per query x, min(emp - lo_env, hi_env - emp); nonnegative up to
    sampling error when the model assumptions hold.
    """
    if ensemble.dim != 1 or model.dim != 1:
        raise OracleError("the envelope check is one-dimensional")
    if ensemble.pre_projection is None:
        raise OracleError("ensemble was simulated without pre-projection storage")
    if not 1 <= j <= ensemble.grid.steps:
        raise OracleError("node index out of range")
    if probe_count < 1000:
        raise OracleError("probe_count must be at least 1000")

    grid = ensemble.grid
    m_c = max(norm_bound(body) for body in bodies_at_nodes(mf, grid))
    rng = np.random.default_rng(seed)
    v = rng.uniform(-m_c, m_c, size=(probe_count, 1))
    drift_vals = np.asarray(model.drift(v), dtype=float)[:, 0]
    sig_vals = np.asarray(model.diffusion(v), dtype=float)[:, 0, 0]
    if np.any(sig_vals <= 0):
        raise OracleError("the envelope derivation needs a positive scalar diffusion")
    sig_min = float(np.min(sig_vals))
    low_shift = -m_c + grid.delta * float(np.min(drift_vals))
    up_shift = m_c + grid.delta * float(np.max(drift_vals))
    step_std = sig_min * np.sqrt(grid.delta)

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    samples = ensemble.pre_projection[:, j - 1, 0]
    emp = empirical_cdf(samples, xs)
    lo_env = gaussian_cdf(-np.abs(xs - up_shift) / step_std)
    hi_env = gaussian_cdf(np.abs(xs - low_shift) / step_std)
    return np.minimum(emp - lo_env, hi_env - emp)
