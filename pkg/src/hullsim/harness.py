"""Experiment orchestration: convergence studies over a grid of copy counts.

A study simulates R independent ensembles per copy count N, measures the
estimation error at the requested nodes (interval defect in dimension one,
per-probe hull distances otherwise), aggregates quantiles and a log-log rate
fit, and emits a CSV plus a JSON report. Runs are deterministic given the
config: every ensemble seed derives from (master seed, N, replication).
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, estimation, geometry, oracle

CSV_HEADER = "N,replication,j,probe_index,error,scaled_error,seed"


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 1)."""


@dataclass
class ExperimentConfig:
    label: str
    model_kind: str
    model_params: dict
    x0: np.ndarray
    mf_kind: str
    mf_params: dict
    horizon: float
    steps: int
    n_grid: list[int]
    replications: int
    seed: int
    j_indices: list[int]
    probes: np.ndarray | None = None  # resolved lattice when None and dim > 1
    probe_margin: float = 0.01
    out: str | None = None
    formats: tuple[str, ...] = ("csv", "json")
    keep_pre_projection: bool = False
    run_step_bound: bool = False
    run_hitting: bool = False
    hitting_radius: float = 0.1

    def __post_init__(self):
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be a strictly ascending list of copy counts")
        if min(self.n_grid) < 1:
            raise ConfigError("copy counts must be positive")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if not all(1 <= j <= self.steps for j in self.j_indices):
            raise ConfigError(f"j indices must lie in 1..{self.steps}")
        if not self.probe_margin > 0:
            raise ConfigError("probe margin must be positive")
        bad = [f for f in self.formats if f not in ("csv", "json")]
        if bad:
            raise ConfigError(f"unknown output formats: {bad}")


def build_model(config: ExperimentConfig) -> dynamics.SdeModel:
    dim = np.atleast_1d(np.asarray(config.x0, dtype=float)).size
    try:
        return dynamics.make_model(config.model_kind, dim, config.x0, **config.model_params)
    except dynamics.ModelError as exc:
        raise ConfigError(str(exc)) from exc


def build_multifunction(config: ExperimentConfig) -> dynamics.Multifunction:
    kind, params = config.mf_kind, dict(config.mf_params)
    try:
        if kind == "constant_interval":
            return dynamics.constant_body(geometry.Interval(params.pop("lo"), params.pop("hi")))
        if kind == "constant_box":
            return dynamics.constant_body(geometry.Box(np.asarray(params.pop("lo")), np.asarray(params.pop("hi"))))
        if kind == "constant_ball":
            return dynamics.constant_body(
                geometry.Ball(np.asarray(params.pop("center")), params.pop("radius"))
            )
        if kind == "constant_square_hpoly":
            half = float(params.pop("half_width"))
            normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
            offsets = np.full(4, half)
            return dynamics.constant_body(geometry.HPolytope(normals, offsets))
        if kind == "shrinking_ball":
            return dynamics.shrinking_ball(
                np.asarray(params.pop("center")), params.pop("r0"), params.pop("rate")
            )
        if kind == "shrinking_box":
            return dynamics.shrinking_box(
                np.asarray(params.pop("lo")), np.asarray(params.pop("hi")), params.pop("rate")
            )
    except KeyError as exc:
        raise ConfigError(f"multifunction {kind!r} is missing parameter {exc}") from exc
    except (geometry.GeometryError, dynamics.ModelError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown multifunction kind {kind!r}")


def default_probes(body: geometry.ConvexBody, fraction: float = 0.8) -> np.ndarray:
    """Interior lattice ring: directions {-1,0,1}^m \\ {0}, normalized and
    scaled to the given fraction of the inradius about the Chebyshev center."""
    center, inradius = geometry.chebyshev_center(body)
    m = body.dim
    dirs = np.array(
        [v for v in np.ndindex(*([3] * m)) if any(c != 1 for c in v)], dtype=float
    ) - 1.0
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return center + fraction * inradius * dirs


def resolve_probes(
    config: ExperimentConfig,
    mf: dynamics.Multifunction,
    grid: dynamics.TimeGrid,
) -> np.ndarray:
    """Fixed probe points, validated interior to the body at every requested node."""
    j_last = max(config.j_indices)
    probes = config.probes
    if probes is None:
        probes = default_probes(mf(grid.node(j_last)))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    for j in config.j_indices:
        body = mf(grid.node(j))
        margin = np.asarray(body.interior_margin(probes))
        if np.any(margin < config.probe_margin):
            raise ConfigError(
                f"probe {int(np.argmin(margin))} is within {config.probe_margin} of the "
                f"boundary (or outside) at node {j}"
            )
    return probes


@dataclass
class ErrorRow:
    n_copies: int
    replication: int
    j: int
    probe_index: int  # -1 in dimension one
    error: float
    scaled_error: float | None  # N * error in dimension one, None otherwise
    seed: int

    def to_dict(self) -> dict:
        return {
            "N": self.n_copies,
            "replication": self.replication,
            "j": self.j,
            "probe_index": self.probe_index,
            "error": self.error,
            "scaled_error": self.scaled_error,
            "seed": self.seed,
        }


@dataclass
class ConvergenceReport:
    config_echo: dict
    dim: int
    n_grid: list[int]
    rows: list[ErrorRow]
    quantiles: dict  # (N, j, probe_index) -> {median, q10, q90, scaled_median}
    slopes: dict  # (j, probe_index) -> {slope, residual, n_used, excluded}
    probes: list | None
    diagnostics: dict
    meta: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "dim": self.dim,
            "n_grid": self.n_grid,
            "rows": [r.to_dict() for r in self.rows],
            "quantiles": [
                {"N": n, "j": j, "probe_index": p, **vals}
                for (n, j, p), vals in sorted(self.quantiles.items())
            ],
            "slopes": [
                {"j": j, "probe_index": p, **vals}
                for (j, p), vals in sorted(self.slopes.items())
            ],
            "probes": self.probes,
            "diagnostics": self.diagnostics,
            "meta": self.meta,
        }

    def median_errors(self, j: int, probe_index: int = -1) -> list[float]:
        """Median error per copy count, in n_grid order."""
        return [self.quantiles[(n, j, probe_index)]["median"] for n in self.n_grid]

    def median_scaled_errors(self, j: int) -> list[float]:
        return [self.quantiles[(n, j, -1)]["scaled_median"] for n in self.n_grid]


def rate_fit(n_values, errors) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(N) with its residual.

    Zero errors (perfect estimation at finite N) are excluded with a warning;
    at least two positive points must remain.
    """
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if n_values.size < 3 or n_values.size != errors.size:
        raise ConfigError("rate fit needs at least three (N, error) pairs")
    if np.any(errors < 0):
        raise ConfigError("errors must be nonnegative")
    keep = errors > 0
    if np.count_nonzero(keep) < 2:
        raise ConfigError("rate fit needs at least two positive errors")
    if not np.all(keep):
        warnings.warn(
            f"rate_fit excluded {int(np.count_nonzero(~keep))} zero error(s)",
            stacklevel=2,
        )
    lx = np.log(n_values[keep])
    ly = np.log(errors[keep])
    coeffs, res, *_ = np.polyfit(lx, ly, 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return float(coeffs[0]), residual


def run_experiment(config: ExperimentConfig) -> ConvergenceReport:
    t_start = time.perf_counter()
    model = build_model(config)
    mf = build_multifunction(config)
    grid = dynamics.TimeGrid(horizon=config.horizon, steps=config.steps)
    if not geometry.contains(mf(0.0), model.x0, 1e-9):
        raise ConfigError("x0 must lie in the body at time zero")

    dim = model.dim
    probes = None
    truths: dict[int, geometry.ConvexBody] = {}
    if dim == 1:
        truths = {j: mf(grid.node(j)) for j in config.j_indices}
    else:
        probes = resolve_probes(config, mf, grid)

    rows: list[ErrorRow] = []
    diagnostics: dict = {"step_bound": [], "hitting": []}
    for n_copies in config.n_grid:
        for r in range(config.replications):
            seed = dynamics.derive_seed(config.seed, n_copies, r)
            keep_h = config.keep_pre_projection or (
                r == 0 and (config.run_step_bound or config.run_hitting)
            )
            j = None
            try:
                ens = dynamics.simulate_ensemble(
                    model, mf, grid, n_copies, seed, keep_pre_projection=keep_h
                )
                for j in config.j_indices:
                    est = estimation.hull_estimate(ens, j)
                    if dim == 1:
                        err = estimation.hausdorff_error_1d(est, truths[j])
                        rows.append(
                            ErrorRow(n_copies, r, j, -1, err, n_copies * err, seed)
                        )
                    else:
                        for p_idx, x in enumerate(probes):
                            err = estimation.pointwise_error(est, x)
                            rows.append(ErrorRow(n_copies, r, j, p_idx, err, None, seed))
            except (dynamics.ModelError, geometry.GeometryError,
                    geometry.ProjectionSolverError, estimation.EstimationError) as exc:
                where = f"N={n_copies}, replication={r}" + (f", j={j}" if j else "")
                raise RuntimeError(f"experiment aborted at {where}: {exc}") from exc
            if r == 0 and config.run_step_bound:
                diag_probes = probes if probes is not None else _interval_probes(truths, config)
                report = oracle.step1_bound_check(model, ens, mf, diag_probes)
                diagnostics["step_bound"].append({"N": n_copies, **report.to_dict()})
            if r == 0 and config.run_hitting and probes is not None:
                for p_idx, x in enumerate(probes):
                    hit = oracle.hitting_frequency(ens, mf, x, config.hitting_radius)
                    diagnostics["hitting"].append(
                        {"N": n_copies, "probe_index": p_idx, **hit.to_dict()}
                    )

    quantiles = _aggregate_quantiles(rows, config)
    slopes = _fit_slopes(config, quantiles)
    meta = {
        "master_seed": config.seed,
        "wall_clock_s": time.perf_counter() - t_start,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    return ConvergenceReport(
        config_echo=config_echo(config),
        dim=dim,
        n_grid=list(config.n_grid),
        rows=rows,
        quantiles=quantiles,
        slopes=slopes,
        probes=probes.tolist() if probes is not None else None,
        diagnostics=diagnostics,
        meta=meta,
    )


def _interval_probes(truths: dict, config: ExperimentConfig) -> np.ndarray:
    j_last = max(config.j_indices)
    lo, hi = geometry.as_interval(truths[j_last])
    return np.linspace(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), 5)[:, None]


def _aggregate_quantiles(rows: list[ErrorRow], config: ExperimentConfig) -> dict:
    grouped: dict[tuple[int, int, int], list[ErrorRow]] = {}
    for row in rows:
        grouped.setdefault((row.n_copies, row.j, row.probe_index), []).append(row)
    out = {}
    for key, bucket in grouped.items():
        errs = np.array([b.error for b in bucket])
        vals = {
            "median": float(np.median(errs)),
            "q10": float(np.quantile(errs, 0.10)),
            "q90": float(np.quantile(errs, 0.90)),
        }
        if bucket[0].scaled_error is not None:
            vals["scaled_median"] = float(np.median([b.scaled_error for b in bucket]))
        out[key] = vals
    return out


def _fit_slopes(config: ExperimentConfig, quantiles: dict) -> dict:
    slopes = {}
    probe_indices = sorted({p for (_, _, p) in quantiles})
    for j in config.j_indices:
        for p in probe_indices:
            medians = np.array(
                [quantiles[(n, j, p)]["median"] for n in config.n_grid]
            )
            entry: dict = {"excluded": int(np.count_nonzero(medians == 0))}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    slope, residual = rate_fit(config.n_grid, medians)
                entry.update(
                    slope=slope,
                    residual=residual,
                    n_used=int(np.count_nonzero(medians > 0)),
                )
            except ConfigError:
                entry.update(slope=None, residual=None, n_used=int(np.count_nonzero(medians > 0)))
            slopes[(j, p)] = entry
    return slopes


def config_echo(config: ExperimentConfig) -> dict:
    echo = {
        "label": config.label,
        "model.kind": config.model_kind,
        "mf.kind": config.mf_kind,
        "grid.horizon": config.horizon,
        "grid.steps": config.steps,
        "n_grid": list(config.n_grid),
        "replications": config.replications,
        "seed": config.seed,
        "j_indices": list(config.j_indices),
        "probe_margin": config.probe_margin,
        "x0": np.atleast_1d(np.asarray(config.x0, dtype=float)).tolist(),
    }
    echo.update({f"model.{k}": v for k, v in sorted(config.model_params.items())})
    for k, v in sorted(config.mf_params.items()):
        echo[f"mf.{k}"] = v.tolist() if isinstance(v, np.ndarray) else v
    return echo


# ---------------------------------------------------------------------------
# emission


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(report: ConvergenceReport) -> str:
    lines = [CSV_HEADER]
    ordered = sorted(
        report.rows, key=lambda r: (r.n_copies, r.replication, r.j, r.probe_index)
    )
    for row in ordered:
        lines.append(
            ",".join(
                _csv_cell(v)
                for v in (
                    row.n_copies,
                    row.replication,
                    row.j,
                    row.probe_index,
                    row.error,
                    row.scaled_error,
                    row.seed,
                )
            )
        )
    return "\n".join(lines) + "\n"


def emit_report(
    report: ConvergenceReport, out: str | Path, formats: tuple[str, ...] = ("csv", "json")
) -> list[Path]:
    """Write report files under the output directory; returns the paths."""
    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if "csv" in formats:
            path = out_dir / "report.csv"
            path.write_text(render_csv(report))
            written.append(path)
        if "json" in formats:
            path = out_dir / "report.json"
            path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
            written.append(path)
        return written
    except OSError as exc:
        raise RuntimeError(f"failed to write report under {out_dir}: {exc}") from exc


# ---------------------------------------------------------------------------
# flat key-value config files


def parse_config_text(text: str) -> dict[str, str]:
    """Parse 'key = value' lines with # comments into a flat dict."""
    flat: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        flat[key] = value.strip()
    return flat


def _parse_floats(value: str) -> list[float]:
    try:
        return [float(tok) for tok in value.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {value!r}") from exc


def _parse_ints(value: str) -> list[int]:
    floats = _parse_floats(value)
    ints = [int(v) for v in floats]
    if any(i != v for i, v in zip(ints, floats)):
        raise ConfigError(f"expected integers, got {value!r}")
    return ints


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


_KNOWN_SCALARS = {
    "label",
    "model.kind",
    "mf.kind",
    "grid.horizon",
    "grid.steps",
    "n_grid",
    "replications",
    "seed",
    "j_indices",
    "x0",
    "probes",
    "probe_margin",
    "out",
    "format",
    "diagnostics.keep_h",
    "diagnostics.step_bound",
    "diagnostics.hitting",
    "diagnostics.hitting_radius",
}


def config_from_flat(flat: dict[str, str], overrides: dict | None = None) -> ExperimentConfig:
    flat = dict(flat)
    if overrides:
        flat.update({k: str(v) for k, v in overrides.items() if v is not None})

    def require(key: str) -> str:
        if key not in flat:
            raise ConfigError(f"missing required config key {key!r}")
        return flat[key]

    for key in flat:
        base_ok = key in _KNOWN_SCALARS or key.startswith(("model.", "mf."))
        if not base_ok:
            raise ConfigError(f"unknown config key {key!r}")

    model_params = {
        k.split(".", 1)[1]: float(v)
        for k, v in flat.items()
        if k.startswith("model.") and k != "model.kind"
    }
    mf_params: dict = {}
    for k, v in flat.items():
        if not k.startswith("mf.") or k == "mf.kind":
            continue
        name = k.split(".", 1)[1]
        vals = _parse_floats(v)
        mf_params[name] = vals[0] if len(vals) == 1 else np.array(vals)

    probes = None
    if "probes" in flat and flat["probes"].strip().lower() != "auto":
        probes = np.array(
            [_parse_floats(chunk) for chunk in flat["probes"].split(";") if chunk.strip()]
        )

    fmt = flat.get("format", "csv json")
    formats = tuple(tok for tok in fmt.replace(",", " ").split() if tok)

    return ExperimentConfig(
        label=flat.get("label", "experiment"),
        model_kind=require("model.kind"),
        model_params=model_params,
        x0=np.array(_parse_floats(require("x0"))),
        mf_kind=require("mf.kind"),
        mf_params=mf_params,
        horizon=float(require("grid.horizon")),
        steps=_parse_ints(require("grid.steps"))[0],
        n_grid=_parse_ints(require("n_grid")),
        replications=_parse_ints(require("replications"))[0],
        seed=_parse_ints(require("seed"))[0],
        j_indices=_parse_ints(require("j_indices")),
        probes=probes,
        probe_margin=float(flat.get("probe_margin", "0.01")),
        out=flat.get("out"),
        formats=formats,
        keep_pre_projection=_parse_bool(flat.get("diagnostics.keep_h", "false")),
        run_step_bound=_parse_bool(flat.get("diagnostics.step_bound", "false")),
        run_hitting=_parse_bool(flat.get("diagnostics.hitting", "false")),
        hitting_radius=float(flat.get("diagnostics.hitting_radius", "0.1")),
    )


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return config_from_flat(parse_config_text(text), overrides)
