"""Command line front end, config files, dataset ingestion, and artifacts.

The ``meinhardt`` command exposes the simulation, measurement,
estimation, and Monte Carlo layers as subcommands that write flat CSV
artifacts plus a JSON manifest echoing everything needed to re-run them.
Numbers are written with 17 significant digits throughout, so exported
matrices survive a round trip through disk bit for bit.

The ingestion path accepts externally produced measurement matrices:
rows are time frames, columns are observation channels around the ring,
with an optional non-numeric header row.  Such data carries no Laplacian
channel, so estimation falls back to finite differences across channels
and the realized-variation confidence interval, which only needs the
product of noise intensity and kernel norm and therefore no knowledge
of the instrument's point-spread function.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from meinhardt.domain import TorusGrid
from meinhardt.estimator import (
    DegenerateDataError,
    EstimateReport,
    augmented_mle,
    confidence_intervals,
    fd_laplacian_measurements,
)
from meinhardt.experiments import (
    ChannelPolicy,
    McCampaign,
    Scenario,
    estimation_campaign,
    repol_sweep,
)
from meinhardt.measurement import MeasurementSet, measure_trajectory, regular_layout
from meinhardt.model import (
    PARAM_KEYS,
    ModelParams,
    default_initial_condition,
    default_params,
    params_from_text,
)
from meinhardt.solver import (
    BlowUpError,
    CflViolationError,
    Scheme,
    SolverConfig,
    Trajectory,
    simulate,
)

_FLOAT_FMT = "%.17g"
_SOLVER_KEYS = ("m", "length", "T", "n_steps", "dt", "scheme", "record_stride")


class UsageError(ValueError):
    """Command line arguments that cannot be acted on."""


class DatasetFormatError(ValueError):
    """An external dataset file violates the expected tabular format."""


class EmptyDatasetError(DatasetFormatError):
    """The dataset file contains no data rows."""


class RaggedRowsError(DatasetFormatError):
    """Dataset rows disagree on the number of columns."""


class NonNumericCellError(DatasetFormatError):
    """A dataset cell is not a finite number."""


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything one command invocation depends on.

    Re-running a command with an equal RunConfig reproduces its outputs
    byte for byte; the manifest written next to the artifacts echoes the
    bundle for exactly that purpose.
    """

    params: ModelParams
    grid: TorusGrid
    solver: SolverConfig
    seed: int
    out_dir: Path | None
    workers: int = 1
    paper_scale: bool = False

    def manifest_entry(self) -> dict:
        return {
            "params": {key: getattr(self.params, key) for key in PARAM_KEYS},
            "quench_norm": self.params.quench_norm,
            "grid": {"length": self.grid.length, "m": self.grid.num_points},
            "solver": {
                "T": self.solver.T,
                "n_steps": self.solver.n_steps,
                "scheme": self.solver.scheme.value,
                "record_stride": self.solver.record_stride,
            },
            "seed": self.seed,
            "workers": self.workers,
            "paper_scale": self.paper_scale,
        }


def parse_config_text(text: str) -> tuple[ModelParams, dict[str, float | str]]:
    """Split a flat config file into model coefficients and solver keys.

    The file uses ``key = value`` lines with ``#`` comments.  Solver and
    grid keys (``m``, ``length``, ``T``, ``n_steps``, ``dt``, ``scheme``,
    ``record_stride``) are collected into a dict; the remaining lines
    must then form a complete coefficient set, or be absent entirely to
    keep the calibrated defaults.
    """
    solver_keys: dict[str, float | str] = {}
    model_lines: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key in _SOLVER_KEYS:
            if key in solver_keys:
                raise ValueError(f"config line {lineno}: duplicate key {key!r}")
            if key == "scheme":
                solver_keys[key] = rhs
            else:
                try:
                    solver_keys[key] = float(rhs)
                except ValueError as exc:
                    raise ValueError(
                        f"config line {lineno}: bad value for {key!r}: {rhs!r}"
                    ) from exc
        else:
            model_lines.append(line)
    params = params_from_text("\n".join(model_lines)) if model_lines else default_params()
    if "n_steps" in solver_keys and "dt" in solver_keys:
        raise ValueError("config sets both n_steps and dt; choose one")
    return params, solver_keys


def _resolve_run_config(ns: argparse.Namespace, defaults: SolverConfig) -> RunConfig:
    """Merge config file, command defaults, and flags into a RunConfig."""
    params = default_params()
    solver_keys: dict[str, float | str] = {}
    if ns.config is not None and ns.config != "default":
        path = Path(ns.config)
        if not path.exists():
            raise DatasetFormatError(f"config file not found: {path}")
        params, solver_keys = parse_config_text(path.read_text())

    length = float(solver_keys.get("length", 20.0))
    m = int(solver_keys.get("m", 500))
    total_time = float(solver_keys.get("T", defaults.T))
    if "n_steps" in solver_keys:
        n_steps = int(solver_keys["n_steps"])
    elif "dt" in solver_keys:
        dt = float(solver_keys["dt"])
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        n_steps = max(1, round(total_time / dt))
    else:
        n_steps = round(defaults.n_steps * total_time / defaults.T)
    stride = int(solver_keys.get("record_stride", defaults.record_stride))
    if n_steps % stride != 0:
        n_steps = stride * max(1, round(n_steps / stride))
    scheme = Scheme(str(solver_keys.get("scheme", defaults.scheme.value)))

    grid = TorusGrid(length=length, num_points=m)
    solver = SolverConfig(
        T=total_time, n_steps=n_steps, scheme=scheme, seed=ns.seed, record_stride=stride
    )
    return RunConfig(
        params=params,
        grid=grid,
        solver=solver,
        seed=ns.seed,
        out_dir=Path(ns.out) if ns.out else None,
        workers=ns.workers,
        paper_scale=ns.paper_scale,
    )


# ---------------------------------------------------------------------------
# artifact formats
# ---------------------------------------------------------------------------


def write_matrix_csv(matrix: np.ndarray, positions: np.ndarray, path: str | Path) -> None:
    """Write a frames-by-channels matrix with a position header row.

    Header cells carry an ``x=`` prefix, keeping them non-numeric so
    ingestion can tell the header from a data row unambiguously.
    """
    matrix = np.asarray(matrix, dtype=float)
    with Path(path).open("w", newline="") as handle:
        handle.write(",".join(f"x={p:.17g}" for p in positions) + "\n")
        np.savetxt(handle, matrix, fmt=_FLOAT_FMT, delimiter=",")


def write_heatmap_csv(trajectory: Trajectory, path: str | Path, which: str = "activator") -> None:
    """Write a recorded field as rows of ``time, node values...``."""
    values = (
        trajectory.activator_matrix() if which == "activator" else trajectory.inhibitor_matrix()
    )
    with Path(path).open("w", newline="") as handle:
        header = ["time"] + [f"x={x:.17g}" for x in trajectory.grid.coordinates]
        handle.write(",".join(header) + "\n")
        stacked = np.column_stack([trajectory.times, values])
        np.savetxt(handle, stacked, fmt=_FLOAT_FMT, delimiter=",")


def read_heatmap_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a heatmap CSV back as (times, coordinates, values)."""
    path = Path(path)
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise EmptyDatasetError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0] != "time":
        raise DatasetFormatError(f"{path}: not a heatmap CSV (missing time header)")
    coords = np.array([float(cell.removeprefix("x=")) for cell in header[1:]])
    body = np.array([[float(cell) for cell in row] for row in rows[1:]])
    return body[:, 0], coords, body[:, 1:]


@dataclass(frozen=True, eq=False)
class ExternalDataset:
    """A measurement matrix from outside the simulator.

    Attributes
    ----------
    M:
        Number of observation channels (columns).
    N:
        Number of time increments; the matrix has ``N + 1`` rows.
    L:
        Assumed circumference of the ring the channels sit on.
    values:
        The ``(N + 1, M)`` matrix of local readings.
    frame_dt:
        Physical duration of one time increment.
    """

    M: int
    N: int
    L: float
    values: np.ndarray
    frame_dt: float

    def __post_init__(self) -> None:
        if self.values.shape != (self.N + 1, self.M):
            raise ValueError(
                f"values must have shape {(self.N + 1, self.M)}, got {self.values.shape}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("dataset holds non-finite entries")
        if self.L <= 0.0 or self.frame_dt <= 0.0:
            raise ValueError("length and frame duration must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.frame_dt * np.arange(self.N + 1)


def ingest_csv(path, length: float = 20.0, frame_dt: float = 1.0) -> ExternalDataset:
    """Load an external measurement matrix from a CSV file.

    The file must be rectangular and numeric; an optional first row of
    channel positions is recognised by containing any non-numeric cell
    and skipped.  Rows are time frames in order, columns are channels
    ordered by position around the ring.

    Args:
        path: CSV file location.
        length: assumed circumference; the standard torus by default.
        frame_dt: duration of one frame, one time unit by default.

    Returns:
        The parsed dataset.

    Raises:
        EmptyDatasetError: no data rows.
        RaggedRowsError: rows of unequal width.
        NonNumericCellError: a cell that is not a finite number.
    """
    path = Path(path)
    with path.open(newline="") as handle:
        rows = [row for row in csv.reader(handle) if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyDatasetError(f"{path}: no rows")

    def parse_row(row: list[str], lineno: int) -> list[float]:
        out = []
        for col, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col + 1}"
                ) from None
            if not np.isfinite(value):
                raise NonNumericCellError(
                    f"{path}: non-finite cell {cell!r} at row {lineno}, column {col + 1}"
                )
            out.append(value)
        return out

    def is_numeric_row(row: list[str]) -> bool:
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            return False
        return all(np.isfinite(v) for v in values)

    start = 0 if is_numeric_row(rows[0]) else 1
    data_rows = rows[start:]
    if not data_rows:
        raise EmptyDatasetError(f"{path}: header only, no data rows")
    width = len(data_rows[0])
    parsed = []
    for offset, row in enumerate(data_rows):
        if len(row) != width:
            raise RaggedRowsError(
                f"{path}: row {start + offset + 1} has {len(row)} cells, expected {width}"
            )
        parsed.append(parse_row(row, start + offset + 1))
    values = np.array(parsed, dtype=float)
    return ExternalDataset(
        M=width, N=values.shape[0] - 1, L=length, values=values, frame_dt=frame_dt
    )


def estimate_from_dataset(dataset: ExternalDataset, alpha: float = 0.05) -> EstimateReport:
    """Diffusivity estimate from local readings alone.

    External data carries no Laplacian channel, so the Laplacian
    observations are approximated by periodic second differences across
    the channel ring, and the confidence interval is the data-driven one
    calibrated by realized variation.  That interval depends only on the
    product of noise intensity and kernel norm, which realized variation
    estimates directly, so the unknown point-spread function of the
    instrument drops out.

    Args:
        dataset: ingested measurement matrix with at least 3 channels.
        alpha: nominal non-coverage level of the attached interval.

    Returns:
        An EstimateReport with the data-driven interval attached.

    Raises:
        DegenerateDataError: vanishing observed information, for example
            a constant dataset.
    """
    if dataset.M < 3:
        raise ValueError(f"need at least 3 channels for finite differences, got {dataset.M}")
    if dataset.N < 1:
        raise ValueError("need at least two time frames")
    laplace = fd_laplacian_measurements(dataset.values, length=dataset.L)
    measurements = MeasurementSet(
        times=dataset.times, local=dataset.values, laplace=laplace, layout=None
    )
    report = augmented_mle(measurements)
    return confidence_intervals(report, alpha=alpha)


def _write_manifest(out_dir: Path, command: str, run: dict, outputs: list[str]) -> None:
    manifest = {
        "tool": "meinhardt",
        "command": command,
        "run": run,
        "outputs": sorted(outputs),
        "version": _package_version(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _package_version() -> str:
    from meinhardt import __version__

    return __version__


def _ensure_out(ns: argparse.Namespace) -> Path:
    if not ns.out:
        raise UsageError("this command writes files; pass --out DIR")
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_simulate(ns: argparse.Namespace) -> int:
    run = _resolve_run_config(ns, SolverConfig(T=120.0, n_steps=12_000, record_stride=25))
    out = _ensure_out(ns)
    init = default_initial_condition(run.grid, run.params)
    trajectory = simulate(run.params, init, run.solver, run.grid, linear=ns.linear)
    write_heatmap_csv(trajectory, out / "activator.csv", "activator")
    write_heatmap_csv(trajectory, out / "inhibitor.csv", "inhibitor")
    run_entry = run.manifest_entry()
    run_entry["linear"] = ns.linear
    run_entry["discarded_negative"] = trajectory.discarded
    _write_manifest(out, "simulate", run_entry, ["activator.csv", "inhibitor.csv"])
    flag = " (discarded: negative concentrations)" if trajectory.discarded else ""
    print(f"simulated T={run.solver.T:g} on {run.grid.num_points} nodes -> {out}{flag}")
    return 0


def _cmd_measure(ns: argparse.Namespace) -> int:
    run = _resolve_run_config(ns, SolverConfig(T=30.0, n_steps=50_000, record_stride=5))
    out = _ensure_out(ns)
    if ns.delta <= 0.0:
        raise UsageError(f"--delta must be positive, got {ns.delta}")
    channels = ns.channels
    if channels is None:
        from meinhardt.experiments import scaled_channel_count

        channels = scaled_channel_count(ns.delta, run.grid.length)
    init = default_initial_condition(run.grid, run.params)
    trajectory = simulate(run.params, init, run.solver, run.grid, linear=ns.linear)
    layout = regular_layout(ns.delta, channels, run.grid)
    measurements = measure_trajectory(trajectory, layout, _default_kernel())
    write_matrix_csv(measurements.local, layout.centers, out / "local.csv")
    write_matrix_csv(measurements.laplace, layout.centers, out / "laplace.csv")
    run_entry = run.manifest_entry()
    run_entry["linear"] = ns.linear
    run_entry["measurement"] = {
        "delta": ns.delta,
        "channels": channels,
        "frame_dt": float(measurements.times[1] - measurements.times[0]),
        "kernel": _default_kernel().name,
    }
    _write_manifest(out, "measure", run_entry, ["local.csv", "laplace.csv"])
    print(
        f"measured {channels} channels at delta={ns.delta:g} over "
        f"{measurements.times.size} frames -> {out}"
    )
    return 0


def _cmd_estimate(ns: argparse.Namespace) -> int:
    dataset = ingest_csv(ns.data, length=ns.length, frame_dt=ns.frame_dt)
    report = estimate_from_dataset(dataset, alpha=ns.alpha)
    payload = report.to_dict()
    payload["source"] = str(ns.data)
    payload["channels"] = dataset.M
    payload["frames"] = dataset.N + 1
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if ns.out:
        out = _ensure_out(ns)
        (out / "estimate.json").write_text(text + "\n")
        run = {
            "data": str(ns.data),
            "length": ns.length,
            "frame_dt": ns.frame_dt,
            "alpha": ns.alpha,
            "seed": ns.seed,
        }
        _write_manifest(out, "estimate", run, ["estimate.json"])
    return 0


def _parse_float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from exc
    if not values:
        raise UsageError(f"{flag} must list at least one value")
    return values


def _cmd_repol(ns: argparse.Namespace) -> int:
    run = _resolve_run_config(ns, SolverConfig(T=120.0, n_steps=12_000, record_stride=25))
    out = _ensure_out(ns)
    sigmas = _parse_float_list(ns.sigma_grid, "--sigma-grid")
    replicates = ns.replicates if ns.replicates is not None else (500 if run.paper_scale else 200)
    stats = repol_sweep(
        sigmas,
        replicates,
        gamma=ns.gamma,
        params=run.params,
        grid=run.grid,
        config=run.solver,
        master_seed=run.seed,
        n_workers=run.workers,
    )

    summary_path = out / "repol_summary.csv"
    with summary_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "sigma",
                "n_replicates",
                "n_kept",
                "n_discarded_negative",
                "n_never",
                "mean_tau",
                "median",
                "q1",
                "q3",
                "whisker_low",
                "whisker_high",
                "n_outliers",
            ]
        )
        for sigma, stat in stats.items():
            if stat.tau_samples.size:
                box = stat.boxplot_summary()
                tail = [
                    _FLOAT_FMT % stat.mean_tau(),
                    _FLOAT_FMT % box["median"],
                    _FLOAT_FMT % box["q1"],
                    _FLOAT_FMT % box["q3"],
                    _FLOAT_FMT % box["whisker_low"],
                    _FLOAT_FMT % box["whisker_high"],
                    box["n_outliers"],
                ]
            else:
                tail = ["nan"] * 6 + [0]
            writer.writerow(
                [
                    _FLOAT_FMT % sigma,
                    stat.n_replicates,
                    stat.tau_samples.size,
                    stat.n_discarded_negative,
                    stat.n_never,
                ]
                + tail
            )

    samples_path = out / "tau_samples.csv"
    with samples_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sigma", "tau"])
        for sigma, stat in stats.items():
            for tau in stat.tau_samples:
                writer.writerow([_FLOAT_FMT % sigma, _FLOAT_FMT % tau])

    run_entry = run.manifest_entry()
    run_entry["gamma"] = ns.gamma
    run_entry["sigma_grid"] = list(sigmas)
    run_entry["replicates"] = replicates
    _write_manifest(out, "repol", run_entry, ["repol_summary.csv", "tau_samples.csv"])
    for sigma, stat in stats.items():
        print(
            f"sigma={sigma:g}: kept {stat.tau_samples.size}/{stat.n_replicates}, "
            f"discarded {stat.n_discarded_negative}, mean tau {stat.mean_tau():.4g}"
        )
    return 0


def _cmd_campaign(ns: argparse.Namespace) -> int:
    run = _resolve_run_config(ns, SolverConfig(T=30.0, n_steps=50_000, record_stride=5))
    out = _ensure_out(ns)
    deltas = _parse_float_list(ns.deltas, "--deltas")
    replicates = ns.replicates if ns.replicates is not None else (500 if run.paper_scale else 200)
    if run.paper_scale and ns.config in (None, "default"):
        grid = TorusGrid(length=run.grid.length, num_points=2000)
        solver = SolverConfig(T=30.0, n_steps=1_000_000, record_stride=100, seed=run.seed)
    else:
        grid, solver = run.grid, run.solver
    scenario = {
        "linear": Scenario.LINEAR_ZERO_INIT,
        "meinhardt": Scenario.FULL_MEINHARDT,
    }[ns.scenario]
    policy = {"fixed": ChannelPolicy.FIXED, "scaled": ChannelPolicy.SCALED}[ns.policy]
    campaign = McCampaign(
        replicates=replicates,
        master_seed=run.seed,
        delta_grid=deltas,
        channel_policy=policy,
        scenario=scenario,
        fixed_channels=ns.fixed_channels,
    )
    result = estimation_campaign(
        campaign, params=run.params, grid=grid, config=solver, n_workers=run.workers
    )

    rows = result.summary_rows()
    table_path = out / "campaign.csv"
    with table_path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    key: (_FLOAT_FMT % value if isinstance(value, float) else value)
                    for key, value in row.items()
                }
            )

    slope = result.convergence_rate() if len(deltas) > 1 else float("nan")
    run_entry = run.manifest_entry()
    run_entry["grid"] = {"length": grid.length, "m": grid.num_points}
    run_entry["solver"]["n_steps"] = solver.n_steps
    run_entry["solver"]["record_stride"] = solver.record_stride
    run_entry["campaign"] = {
        "scenario": scenario.value,
        "policy": policy.value,
        "deltas": list(deltas),
        "replicates": replicates,
        "fixed_channels": ns.fixed_channels,
    }
    run_entry["rmse_slope"] = slope
    _write_manifest(out, "campaign", run_entry, ["campaign.csv"])
    print(
        f"campaign {scenario.value}/{policy.value}: {replicates} replicates, "
        f"rmse slope {slope:.3f} -> {out}"
    )
    return 0


def _cmd_plot(ns: argparse.Namespace) -> int:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "meinhardt"
    import matplotlib.pyplot as plt

    out = _ensure_out(ns)
    data = Path(ns.data)
    if not data.exists():
        raise DatasetFormatError(f"data file not found: {data}")

    if ns.kind == "heatmap":
        times, coords, values = read_heatmap_csv(data)
        fig, ax = plt.subplots(figsize=(7, 4.2))
        mesh = ax.pcolormesh(coords, times, values, shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="concentration")
        ax.set_xlabel("position")
        ax.set_ylabel("time")
        target = out / "heatmap.svg"
    elif ns.kind == "boxplot":
        groups: dict[float, list[float]] = {}
        with data.open(newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or "sigma" not in reader.fieldnames:
                raise DatasetFormatError(f"{data}: expected columns sigma,tau")
            for row in reader:
                groups.setdefault(float(row["sigma"]), []).append(float(row["tau"]))
        if not groups:
            raise EmptyDatasetError(f"{data}: no samples to plot")
        fig, ax = plt.subplots(figsize=(6, 4))
        keys = sorted(groups)
        ax.boxplot([groups[k] for k in keys], tick_labels=[f"{k:g}" for k in keys], whis=1.5)
        ax.set_xlabel("noise intensity")
        ax.set_ylabel("time to repolarisation")
        target = out / "boxplot.svg"
    else:
        deltas, rmses = [], []
        with data.open(newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or "rmse" not in reader.fieldnames:
                raise DatasetFormatError(f"{data}: expected campaign table with rmse column")
            for row in reader:
                deltas.append(float(row["delta"]))
                rmses.append(float(row["rmse"]))
        if len(deltas) < 2:
            raise DatasetFormatError(f"{data}: need at least two resolutions to plot a rate")
        order = np.argsort(deltas)
        deltas = np.array(deltas)[order]
        rmses = np.array(rmses)[order]
        slope, intercept = np.polyfit(np.log(deltas), np.log(rmses), 1)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.loglog(deltas, rmses, "o", label="RMSE")
        ax.loglog(
            deltas,
            np.exp(intercept) * deltas**slope,
            "-",
            label=f"slope {slope:.2f}",
        )
        ax.set_xlabel("resolution")
        ax.set_ylabel("RMSE")
        ax.legend()
        target = out / "rate.svg"

    fig.tight_layout()
    fig.savefig(target, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write_manifest(out, "plot", {"kind": ns.kind, "data": str(data)}, [target.name])
    print(f"wrote {target}")
    return 0


def _default_kernel():
    from meinhardt.measurement import bump_kernel

    return bump_kernel()


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meinhardt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="flat key = value config file, or 'default'")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument(
            "--paper-scale",
            action="store_true",
            help="full-size grids and replicate counts; hours of runtime",
        )

    p = sub.add_parser("simulate", help="integrate the model and export heatmap CSVs")
    common(p)
    p.add_argument("--linear", action="store_true", help="drop the reaction terms")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("measure", help="simulate and export local measurement CSVs")
    common(p)
    p.add_argument("--linear", action="store_true", help="drop the reaction terms")
    p.add_argument("--delta", type=float, default=1.0, help="observation resolution")
    p.add_argument("--channels", type=int, default=None, help="channel count (default: densest disjoint)")
    p.set_defaults(handler=_cmd_measure)

    p = sub.add_parser("estimate", help="estimate diffusivity from a measurement CSV")
    common(p)
    p.add_argument("--data", required=True, help="CSV of local readings, frames by channels")
    p.add_argument("--length", type=float, default=20.0, help="assumed circumference")
    p.add_argument("--frame-dt", type=float, default=1.0, dest="frame_dt", help="frame duration")
    p.add_argument("--alpha", type=float, default=0.05, help="non-coverage level")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("repol", help="noise sweep of repolarisation times")
    common(p)
    p.add_argument(
        "--sigma-grid",
        default="0.02,0.04,0.06,0.08,0.1",
        dest="sigma_grid",
        help="comma-separated noise intensities",
    )
    p.add_argument("--replicates", type=int, default=None, help="ensemble size per intensity")
    p.add_argument("--gamma", type=float, default=1.2, help="dominance factor")
    p.set_defaults(handler=_cmd_repol)

    p = sub.add_parser("campaign", help="Monte Carlo error and coverage study")
    common(p)
    p.add_argument("--scenario", choices=("linear", "meinhardt"), default="linear")
    p.add_argument("--policy", choices=("fixed", "scaled"), default="scaled")
    p.add_argument("--deltas", default="0.34,0.5,1.0,2.0", help="comma-separated resolutions")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--fixed-channels", type=int, default=5, dest="fixed_channels")
    p.set_defaults(handler=_cmd_campaign)

    p = sub.add_parser("plot", help="render a CSV artifact to SVG")
    common(p)
    p.add_argument("--kind", choices=("heatmap", "boxplot", "rate"), required=True)
    p.add_argument("--data", required=True, help="CSV produced by another subcommand")
    p.set_defaults(handler=_cmd_plot)

    return parser


def cli_dispatch(argv: list[str] | None = None) -> int:
    """Parse arguments, run the selected subcommand, and map errors.

    Exit codes: 0 success, 1 usage problems, 2 malformed or degenerate
    data, 3 numeric failure during integration.  Degenerate observations
    count as a data problem: the file was read fine but carries no
    information for the estimate.
    """
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help prints and exits
        return 0 if (exc.code or 0) == 0 else 1
    if getattr(ns, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return ns.handler(ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (BlowUpError, CflViolationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DegenerateDataError, DatasetFormatError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
