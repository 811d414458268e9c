"""Projected Euler simulation of a diffusion constrained to a moving convex body.

One step reads

    x_next = project(C(t_{j+1}), x + drift(x) * delta + diffusion(x) @ z)

with z a Brownian increment over the step. Ensembles of independent copies
draw their increments from counter-based streams keyed by (seed, copy_index),
so copy i is reproducible in isolation and results do not depend on how the
copies are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Ball, Box, ConvexBody, GeometryError, contains, project

_MASK64 = (1 << 64) - 1
DET_FLOOR = 1e-12
CONTAINMENT_TOL = 1e-9


class ModelError(ValueError):
    """Bad model/multifunction input: dimensions, invertibility, containment."""


def splitmix64(state: int) -> int:
    """One step of the splitmix64 mixer (used to derive sub-seeds)."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master: int, *parts: int) -> int:
    """Deterministically mix a master seed with integer coordinates."""
    state = splitmix64(master & _MASK64)
    for part in parts:
        state = splitmix64(state ^ (part & _MASK64))
    return state


def gaussian_increments(seed: int, copy_index: int, n: int, m: int, delta: float) -> np.ndarray:
    """An (n, m) matrix of i.i.d. N(0, delta) Brownian increments.

    The stream is a Philox counter-based generator keyed by
    (seed, copy_index): identical arguments give bit-identical output.
    """
    if n < 1 or m < 1:
        raise ModelError("need n >= 1 steps and m >= 1 dimensions")
    if not delta > 0:
        raise ModelError("step size delta must be positive")
    key = np.array([seed & _MASK64, copy_index & _MASK64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.standard_normal((n, m)) * np.sqrt(delta)


class _IncrementBank:
    """Fast path over gaussian_increments: one Philox reused via state reset.

    Produces bit-identical values to gaussian_increments(seed, i, n, m, delta)
    while avoiding per-copy generator construction.
    """

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._bg = np.random.Philox(key=np.array([self._seed, 0], dtype=np.uint64))
        self._gen = np.random.Generator(self._bg)
        self._template = self._bg.state

    def normals(self, copy_index: int, n: int, m: int) -> np.ndarray:
        st = self._template
        st["state"]["key"][0] = self._seed
        st["state"]["key"][1] = copy_index & _MASK64
        st["state"]["counter"][:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen.standard_normal((n, m))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j * horizon / steps, j = 0..steps."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ModelError("horizon must be positive")
        if self.steps < 1:
            raise ModelError("need at least one step")

    @property
    def delta(self) -> float:
        return self.horizon / self.steps

    def node(self, j: int) -> float:
        if not 0 <= j <= self.steps:
            raise ModelError(f"node index {j} outside 0..{self.steps}")
        return j * self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.horizon / self.steps


@dataclass(frozen=True, eq=False)
class SdeModel:
    """Drift/diffusion pair with declared Lipschitz constants.

    drift maps arrays of shape (..., m) to (..., m); diffusion maps (..., m)
    to matrices (..., m, m) and must be invertible wherever it is evaluated
    (checked lazily, |det| > 1e-12). x0 is the deterministic starting point.
    """

    dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    lip_drift: float
    lip_diffusion: float
    label: str = ""

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.dim,):
            raise ModelError(f"x0 must have shape ({self.dim},), got {x0.shape}")
        if self.lip_drift < 0 or self.lip_diffusion < 0:
            raise ModelError("Lipschitz constants must be nonnegative")
        object.__setattr__(self, "x0", x0)


def diffusion_at(model: SdeModel, x: np.ndarray) -> np.ndarray:
    """Evaluate the diffusion matrix with the invertibility check applied."""
    sig = np.asarray(model.diffusion(x), dtype=float)
    expected = np.shape(x) + (model.dim,)
    if sig.shape != expected:
        raise ModelError(f"diffusion returned shape {sig.shape}, expected {expected}")
    dets = np.linalg.det(sig)
    bad = np.abs(dets) <= DET_FLOOR
    if np.any(bad):
        where = np.argwhere(bad)[0] if np.ndim(bad) else ()
        raise ModelError(f"diffusion matrix is singular at evaluation index {tuple(where)}")
    return sig


def euler_step(
    model: SdeModel,
    body_next: ConvexBody,
    x: np.ndarray,
    z: np.ndarray,
    delta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One projected Euler step; returns (pre-projection point, next state).

    Batched over leading axes of x and z.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape[-1] != model.dim or z.shape != x.shape:
        raise ModelError("state and increment must both have last axis of the model dimension")
    sig = diffusion_at(model, x)
    h = x + model.drift(x) * delta + np.einsum("...ij,...j->...i", sig, z)
    return h, project(body_next, h)


@dataclass(frozen=True)
class Multifunction:
    """Time-indexed family of convex bodies t -> C(t) on [0, horizon].

    decreasing means C(t) is contained in C(s) whenever t >= s (constant
    families qualify); it is declared here and can be validated empirically
    with check_decreasing.
    """

    evaluator: Callable[[float], ConvexBody]
    decreasing: bool
    label: str = ""

    def __call__(self, t: float) -> ConvexBody:
        return self.evaluator(t)


def constant_body(body: ConvexBody) -> Multifunction:
    return Multifunction(lambda t: body, decreasing=True, label="constant")


def shrinking_ball(center, r0: float, rate: float) -> Multifunction:
    """Ball whose radius decays linearly: radius(t) = r0 - rate * t."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if not r0 > 0 or rate < 0:
        raise ModelError("need r0 > 0 and rate >= 0")

    def evaluator(t: float) -> ConvexBody:
        return Ball(center=center, radius=r0 - rate * t)

    return Multifunction(evaluator, decreasing=True, label="shrinking_ball")


def shrinking_box(lo, hi, rate: float) -> Multifunction:
    """Box whose faces move inward at the given speed."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if rate < 0:
        raise ModelError("rate must be nonnegative")

    def evaluator(t: float) -> ConvexBody:
        return Box(lo=lo + rate * t, hi=hi - rate * t)

    return Multifunction(evaluator, decreasing=True, label="shrinking_box")


def piecewise_constant(pieces: list[tuple[float, ConvexBody]], decreasing: bool = False) -> Multifunction:
    """Body valid from each listed time until the next; first time must be 0."""
    if not pieces:
        raise ModelError("need at least one (time, body) piece")
    times = [t for t, _ in pieces]
    if times[0] > 0 or any(a >= b for a, b in zip(times, times[1:])):
        raise ModelError("piece times must start at 0 and strictly increase")

    def evaluator(t: float) -> ConvexBody:
        body = pieces[0][1]
        for start, candidate in pieces:
            if start <= t:
                body = candidate
            else:
                break
        return body

    return Multifunction(evaluator, decreasing=decreasing, label="piecewise_constant")


def check_decreasing(
    mf: Multifunction,
    horizon: float,
    pairs: int = 100,
    boundary_samples: int = 16,
    tol: float = CONTAINMENT_TOL,
    seed: int = 0,
) -> float:
    """Worst containment violation of C(t) inside C(s) over sampled s < t.

    Samples boundary points of the later body and measures their distance to
    the earlier one; a decreasing family stays below tol.
    """
    from .geometry import distance_to_body

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        s, t = np.sort(rng.uniform(0.0, horizon, size=2))
        if s == t:
            continue
        later = mf(t)
        earlier = mf(s)
        pts = later.boundary_points(boundary_samples, rng)
        worst = max(worst, float(np.max(distance_to_body(earlier, pts))))
    return worst


def check_lipschitz(
    model: SdeModel,
    lo,
    hi,
    pairs: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Largest empirical Lipschitz ratios of (drift, diffusion) over a box.

    The diffusion ratio uses the operator norm of the matrix difference.
    """
    rng = np.random.default_rng(seed)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (model.dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (model.dim,))
    u = rng.uniform(lo, hi, size=(pairs, model.dim))
    v = rng.uniform(lo, hi, size=(pairs, model.dim))
    gaps = np.linalg.norm(u - v, axis=1)
    ok = gaps > 1e-12
    u, v, gaps = u[ok], v[ok], gaps[ok]
    drift_ratio = float(np.max(np.linalg.norm(model.drift(u) - model.drift(v), axis=1) / gaps))
    dsig = diffusion_at(model, u) - diffusion_at(model, v)
    op_norms = np.linalg.svd(dsig, compute_uv=False)[..., 0]
    diff_ratio = float(np.max(op_norms / gaps))
    return drift_ratio, diff_ratio


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One simulated trajectory on the grid."""

    grid: TimeGrid
    copy_index: int
    states: np.ndarray  # (steps + 1, m)
    pre_projection: np.ndarray | None  # (steps, m); entry j is the point before projecting onto C(t_{j+1})


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """n_copies independent trajectories plus the seed that generated them.

    states[i, j] is copy i+1 at node j (copies use streams (seed, 1..N)).
    pre_projection, kept only on request, stores the point each step before
    it was projected onto the next body.
    """

    grid: TimeGrid
    n_copies: int
    seed: int
    states: np.ndarray  # (n_copies, steps + 1, m)
    pre_projection: np.ndarray | None = None  # (n_copies, steps, m)

    @property
    def dim(self) -> int:
        return self.states.shape[-1]


def bodies_at_nodes(mf: Multifunction, grid: TimeGrid) -> list[ConvexBody]:
    return [mf(grid.node(j)) for j in range(grid.steps + 1)]


def _check_start(model: SdeModel, mf: Multifunction) -> None:
    if not contains(mf(0.0), model.x0, CONTAINMENT_TOL):
        raise ModelError("x0 must lie in the body at time zero")


def simulate_path(
    model: SdeModel,
    mf: Multifunction,
    grid: TimeGrid,
    seed: int,
    copy_index: int,
    keep_pre_projection: bool = False,
) -> SamplePath:
    """Simulate a single copy on the stream (seed, copy_index)."""
    _check_start(model, mf)
    n, m = grid.steps, model.dim
    z = gaussian_increments(seed, copy_index, n, m, grid.delta)
    states = np.empty((n + 1, m))
    states[0] = model.x0
    pre = np.empty((n, m)) if keep_pre_projection else None
    x = model.x0.copy()
    for j in range(n):
        body_next = mf(grid.node(j + 1))
        try:
            h, x = euler_step(model, body_next, x, z[j], grid.delta)
        except (ModelError, GeometryError) as exc:
            raise ModelError(f"step {j} of copy {copy_index} failed: {exc}") from exc
        states[j + 1] = x
        if pre is not None:
            pre[j] = h
    return SamplePath(grid=grid, copy_index=copy_index, states=states, pre_projection=pre)


def simulate_ensemble(
    model: SdeModel,
    mf: Multifunction,
    grid: TimeGrid,
    n_copies: int,
    seed: int,
    keep_pre_projection: bool = False,
) -> PathEnsemble:
    """Simulate copies 1..n_copies on streams (seed, i), stepping them as a batch.

    Per-copy results are bit-identical to simulate_path with the same seed and
    copy index, so the ensemble equals its serial counterpart.
    """
    if n_copies < 1:
        raise ModelError("need at least one copy")
    _check_start(model, mf)
    n, m = grid.steps, model.dim

    bank = _IncrementBank(seed)
    z = np.empty((n_copies, n, m))
    for i in range(n_copies):
        z[i] = bank.normals(i + 1, n, m)
    z *= np.sqrt(grid.delta)

    states = np.empty((n_copies, n + 1, m))
    states[0 : n_copies, 0] = model.x0
    pre = np.empty((n_copies, n, m)) if keep_pre_projection else None
    x = np.broadcast_to(model.x0, (n_copies, m)).copy()
    for j in range(n):
        body_next = mf(grid.node(j + 1))
        try:
            h, x = euler_step(model, body_next, x, z[:, j], grid.delta)
        except (ModelError, GeometryError) as exc:
            raise ModelError(
                f"step {j} failed (evaluation indices are copy offsets): {exc}"
            ) from exc
        states[:, j + 1] = x
        if pre is not None:
            pre[:, j] = h
    return PathEnsemble(
        grid=grid, n_copies=n_copies, seed=seed, states=states, pre_projection=pre
    )


# ---------------------------------------------------------------------------
# model registry


def _diag_matrix(values: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros(values.shape + (m,))
    idx = np.arange(m)
    out[..., idx, idx] = values
    return out


def make_model(kind: str, dim: int, x0, **params) -> SdeModel:
    """Build a registered drift/diffusion model.

    Kinds: "ou" (linear mean reversion, constant diffusion), "zero_drift"
    (constant diffusion), "tanh_drift" (bounded nonlinear pull, constant
    diffusion), "tanh_sigma" (linear mean reversion, diagonal state-dependent
    diffusion sigma0 + sigma1 * tanh(x)).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    if kind == "ou":
        theta = float(params.pop("theta", 1.0))
        sigma = float(params.pop("sigma", 1.0))
        _reject_extras(kind, params)
        if theta < 0 or not sigma > 0:
            raise ModelError("ou model needs theta >= 0 and sigma > 0")
        eye = sigma * np.eye(dim)
        return SdeModel(
            dim=dim,
            drift=lambda x: -theta * x,
            diffusion=lambda x: np.broadcast_to(eye, np.shape(x) + (dim,)),
            x0=x0,
            lip_drift=theta,
            lip_diffusion=0.0,
            label=f"ou(theta={theta}, sigma={sigma})",
        )

    if kind == "zero_drift":
        sigma = float(params.pop("sigma", 1.0))
        _reject_extras(kind, params)
        if not sigma > 0:
            raise ModelError("zero_drift model needs sigma > 0")
        eye = sigma * np.eye(dim)
        return SdeModel(
            dim=dim,
            drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            diffusion=lambda x: np.broadcast_to(eye, np.shape(x) + (dim,)),
            x0=x0,
            lip_drift=0.0,
            lip_diffusion=0.0,
            label=f"zero_drift(sigma={sigma})",
        )

    if kind == "tanh_drift":
        scale = float(params.pop("scale", 1.0))
        sigma = float(params.pop("sigma", 1.0))
        _reject_extras(kind, params)
        if scale < 0 or not sigma > 0:
            raise ModelError("tanh_drift model needs scale >= 0 and sigma > 0")
        eye = sigma * np.eye(dim)
        return SdeModel(
            dim=dim,
            drift=lambda x: -scale * np.tanh(x),
            diffusion=lambda x: np.broadcast_to(eye, np.shape(x) + (dim,)),
            x0=x0,
            lip_drift=scale,
            lip_diffusion=0.0,
            label=f"tanh_drift(scale={scale}, sigma={sigma})",
        )

    if kind == "tanh_sigma":
        theta = float(params.pop("theta", 0.0))
        sigma0 = float(params.pop("sigma0", 0.3))
        sigma1 = float(params.pop("sigma1", 0.1))
        _reject_extras(kind, params)
        if theta < 0:
            raise ModelError("tanh_sigma model needs theta >= 0")
        if not sigma0 - abs(sigma1) > 0:
            raise ModelError("tanh_sigma needs sigma0 - |sigma1| > 0 to stay invertible")
        return SdeModel(
            dim=dim,
            drift=lambda x: -theta * x,
            diffusion=lambda x: _diag_matrix(
                sigma0 + sigma1 * np.tanh(np.asarray(x, dtype=float)), dim
            ),
            x0=x0,
            lip_drift=theta,
            lip_diffusion=abs(sigma1),
            label=f"tanh_sigma(theta={theta}, sigma0={sigma0}, sigma1={sigma1})",
        )

    raise ModelError(f"unknown model kind {kind!r}")


def _reject_extras(kind: str, params: dict) -> None:
    if params:
        raise ModelError(f"unexpected parameters for model {kind!r}: {sorted(params)}")


MODEL_KINDS = ("ou", "zero_drift", "tanh_drift", "tanh_sigma")
