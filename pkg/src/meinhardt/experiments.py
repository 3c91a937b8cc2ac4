"""Monte Carlo studies of repolarisation timing and estimator quality.

Two experiment families live here.  The repolarisation study evolves
replicate ensembles of the full model from the polarised starting state,
measures when activator mass first dominates the half of the domain
opposite the initial peak, and reports how the timing and the rate of
discarded (negative) paths respond to the noise level.  The estimation
campaigns generate many independent trajectories, observe each through
local kernel averages at several resolutions, and collect error and
confidence-interval statistics for the diffusivity estimator.

Both families evolve all replicates of one setting as a single stacked
array with one pseudo-random stream per replicate.  The stacked update
applies exactly the arithmetic of the one-at-a-time solver, so each
replicate's path is bit for bit what :func:`meinhardt.solver.simulate`
would produce from the same seed, while the array work is shared.
Worker processes only split the replicate range; they never change the
numbers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import stats as _sci_stats

from meinhardt.domain import TorusGrid
from meinhardt.measurement import (
    Kernel,
    bump_kernel,
    laplace_kernel_samples,
    regular_layout,
    scaled_kernel_samples,
)
from meinhardt.model import (
    FieldPair,
    ModelParams,
    activator_reaction,
    default_initial_condition,
    default_params,
    inhibitor_reaction,
)
from meinhardt.solver import (
    BlowUpError,
    Scheme,
    SolverConfig,
    Trajectory,
    _implicit_factors,
    _solve_implicit,
    replicate_seed,
)

DEFAULT_GAMMA = 1.2
"""Dominance factor declaring repolarisation: front mass >= 1.2 rear mass."""


# ---------------------------------------------------------------------------
# window functionals and front counting
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _window_quadrature(grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature weights of the two half-domain mean functionals.

    The front window is the closed arc from ``length / 4`` to
    ``3 length / 4`` (the half opposite the coordinate origin), the rear
    window its complement.  Each node is weighted by the fraction of its
    midpoint cell inside the window, which halves the boundary nodes when
    they land exactly on a window edge and keeps the two weight vectors
    summing to one half each.  A constant field therefore gives equal
    front and rear means for every grid size.
    """
    x = grid.coordinates
    half = grid.dx / 2.0
    lo, hi = grid.length / 4.0, 3.0 * grid.length / 4.0
    overlap = np.clip(np.minimum(hi, x + half) - np.maximum(lo, x - half), 0.0, grid.dx)
    front = (2.0 / grid.length) * overlap
    rear = (2.0 / grid.length) * (grid.dx - overlap)
    return front, rear


def relative_concentrations(state: FieldPair, grid: TorusGrid) -> tuple[float, float]:
    """Mean activator levels of the front and rear half-domains.

    The front window is the closed half centred opposite the coordinate
    origin, where the default starting state has its trough; the rear
    window is the half around the origin holding the initial peak.

    Args:
        state: field pair on the grid's nodes.
        grid: spatial grid the state lives on.

    Returns:
        The pair ``(front_mean, rear_mean)``.
    """
    if state.activator.shape != (grid.num_points,):
        raise ValueError(
            f"state has {state.activator.shape[0]} nodes, grid has {grid.num_points}"
        )
    front, rear = _window_quadrature(grid)
    return float(front @ state.activator), float(rear @ state.activator)


def time_to_repolarisation(
    trajectory: Trajectory, gamma: float = DEFAULT_GAMMA
) -> float | None:
    """First recorded time the front mean dominates the rear mean.

    The crossing condition is ``front >= gamma * rear`` evaluated on the
    recorded frames only, so the answer is quantised to the recording
    stride.  The trajectory's discard flag is ignored here; ensemble
    statistics apply the discard rule in :func:`repol_sweep`.

    Args:
        trajectory: recorded simulation output.
        gamma: dominance factor, greater than zero.

    Returns:
        The crossing time, or None if no recorded frame crosses.
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    front, rear = _window_quadrature(trajectory.grid)
    activator = trajectory.activator_matrix()
    crossed = activator @ front >= gamma * (activator @ rear)
    if not crossed.any():
        return None
    return float(trajectory.times[int(np.argmax(crossed))])


def count_fronts(state: FieldPair | np.ndarray, threshold_fraction: float = 0.5) -> int:
    """Number of activator peaks, counted as contiguous super-threshold arcs.

    A node is active when the activator exceeds ``threshold_fraction``
    times the frame maximum; maximal runs of active nodes are counted
    with periodic wraparound, so a peak straddling the coordinate seam
    counts once.

    Args:
        state: field pair or bare activator node values.
        threshold_fraction: relative height cut, strictly between 0 and 1.

    Returns:
        The number of arcs; 0 for a non-positive field, 1 when every
        node is active.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError(
            f"threshold_fraction must lie strictly between 0 and 1, got {threshold_fraction}"
        )
    values = state.activator if isinstance(state, FieldPair) else np.asarray(state, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("need a one-dimensional field with at least two nodes")
    peak = float(values.max())
    if peak <= 0.0:
        return 0
    active = values > threshold_fraction * peak
    if active.all():
        return 1
    rises = active & ~np.roll(active, 1)
    return int(rises.sum())


def front_count_series(
    trajectory: Trajectory, threshold_fraction: float = 0.5
) -> np.ndarray:
    """Front count of every recorded frame, aligned with ``trajectory.times``."""
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError(
            f"threshold_fraction must lie strictly between 0 and 1, got {threshold_fraction}"
        )
    frames = trajectory.activator_matrix()
    peaks = frames.max(axis=1, keepdims=True)
    active = frames > threshold_fraction * peaks
    rises = active & ~np.roll(active, 1, axis=1)
    counts = rises.sum(axis=1)
    counts[active.all(axis=1)] = 1
    counts[(peaks <= 0.0).ravel()] = 0
    return counts.astype(int)


# ---------------------------------------------------------------------------
# stacked-ensemble integrator
# ---------------------------------------------------------------------------

_MAX_NOISE_CHUNK = 64


def _evolve_ensemble(
    params: ModelParams,
    grid: TorusGrid,
    config: SolverConfig,
    init_activator: np.ndarray,
    init_inhibitor: np.ndarray,
    seeds: np.ndarray,
    linear: bool,
    on_frame,
) -> np.ndarray:
    """Advance one stacked replicate ensemble and stream its frames.

    Every replicate starts from the same initial fields and consumes its
    own generator, seeded from ``seeds``.  Noise is pre-drawn in step
    chunks per replicate; the chunked draws consume each stream in
    exactly the per-step order of the sequential stepper, so replicate
    ``r`` reproduces ``simulate`` with ``seed=seeds[r]`` bit for bit.
    ``on_frame(frame_index, activator, inhibitor)`` is called on the
    initial state and after every ``record_stride`` steps, with arrays of
    shape ``(n_replicates, num_points)`` that the callback must not
    mutate.

    Returns a boolean array marking replicates that held a negative
    entry at any step, the ensemble version of the trajectory discard
    flag.

    Raises:
        BlowUpError: any replicate produced a non-finite value.
        ValueError: schemes other than the semi-implicit one, which is
            the only one with a stacked update path.
    """
    if config.scheme is not Scheme.SEMI_IMPLICIT:
        raise ValueError("ensemble evolution supports only the semi-implicit scheme")
    seeds = np.asarray(seeds)
    n_rep = seeds.size
    m = grid.num_points
    if init_activator.shape != (m,) or init_inhibitor.shape != (m,):
        raise ValueError("initial fields must match the grid size")

    activator = np.tile(init_activator, (n_rep, 1)).astype(float)
    inhibitor = np.tile(init_inhibitor, (n_rep, 1)).astype(float)
    generators = [np.random.default_rng(int(s)) for s in seeds]
    dt = config.dt
    factors_a = _implicit_factors(grid, params.D_A, dt)
    factors_i = _implicit_factors(grid, params.D_I, dt)
    sqrt_var = math.sqrt(dt / grid.dx)
    x = grid.coordinates

    draw_a = params.sigma_A > 0.0
    draw_i = params.sigma_I > 0.0
    n_fields = int(draw_a) + int(draw_i)
    slot_i = int(draw_a)
    if n_fields:
        chunk = int(np.clip(2**25 // max(n_rep * n_fields * m, 1), 1, _MAX_NOISE_CHUNK))
        noise = np.empty((n_rep, chunk, n_fields, m))
    else:
        chunk = _MAX_NOISE_CHUNK
        noise = None

    negative = np.zeros(n_rep, dtype=bool)
    negative |= (activator < 0.0).any(axis=1) | (inhibitor < 0.0).any(axis=1)
    on_frame(0, activator, inhibitor)

    step = 0
    while step < config.n_steps:
        span = min(chunk, config.n_steps - step)
        if noise is not None:
            for r, gen in enumerate(generators):
                gen.standard_normal(out=noise[r, :span])
            noise[:, :span] *= sqrt_var
        for j in range(span):
            if linear:
                react_a = 0.0
                react_i = 0.0
            else:
                react_a = activator_reaction(activator, inhibitor, x, params, grid.length)
                react_i = inhibitor_reaction(activator, inhibitor, params)
            noise_a = params.sigma_A * noise[:, j, 0] if draw_a else 0.0
            noise_i = params.sigma_I * noise[:, j, slot_i] if draw_i else 0.0
            activator = _solve_implicit(activator + dt * react_a + noise_a, factors_a, m)
            inhibitor = _solve_implicit(inhibitor + dt * react_i + noise_i, factors_i, m)
            if not (np.isfinite(activator.sum()) and np.isfinite(inhibitor.sum())):
                bad = ~(
                    np.isfinite(activator).all(axis=1) & np.isfinite(inhibitor).all(axis=1)
                )
                raise BlowUpError(
                    f"non-finite state at step {step + j + 1} in replicates "
                    f"{np.flatnonzero(bad).tolist()}"
                )
            negative |= (activator < 0.0).any(axis=1) | (inhibitor < 0.0).any(axis=1)
            done = step + j + 1
            if done % config.record_stride == 0:
                on_frame(done // config.record_stride, activator, inhibitor)
        step += span
    return negative


_PROJECT_BLOCK = 32


def _blocked_project(values: np.ndarray, rows_t: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Matrix product taken in fixed-size row blocks.

    Optimised matrix products accumulate in an order that depends on the
    operand shapes, so the same replicate row can give results differing
    in the last bits when batched differently.  Multiplying in blocks of
    ``_PROJECT_BLOCK`` rows pins the shapes, making every row's result
    independent of how the ensemble was split.
    """
    for lo in range(0, values.shape[0], _PROJECT_BLOCK):
        hi = min(lo + _PROJECT_BLOCK, values.shape[0])
        np.matmul(values[lo:hi], rows_t, out=out[lo:hi])
    return out


def _replicate_chunks(n_replicates: int, n_workers: int) -> list[tuple[int, int]]:
    """Contiguous index ranges splitting a replicate ensemble across workers.

    Edges land on multiples of the projection block size, so blocks sit
    at the same global replicate offsets for every worker count and the
    per-replicate arithmetic never changes with parallelism.
    """
    n_blocks = -(-n_replicates // _PROJECT_BLOCK)
    n_chunks = min(max(n_workers, 1), n_blocks)
    block_edges = np.linspace(0, n_blocks, n_chunks + 1).round().astype(int)
    edges = np.minimum(block_edges * _PROJECT_BLOCK, n_replicates)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


# ---------------------------------------------------------------------------
# repolarisation study
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RepolStats:
    """Repolarisation timing of one noise level's replicate ensemble.

    Attributes
    ----------
    sigma:
        Activator noise intensity the ensemble ran at.
    gamma:
        Dominance factor of the crossing condition.
    tau_samples:
        Crossing times of the kept paths, one entry per replicate that
        crossed and never held a negative entry.
    n_discarded_negative:
        Replicates dropped because some entry went negative at any step.
    n_never:
        Kept replicates that reached the horizon without crossing.
    horizon:
        Final time of the runs; crossing times are censored there.
    """

    sigma: float
    gamma: float
    tau_samples: np.ndarray
    n_discarded_negative: int
    n_never: int
    horizon: float

    @property
    def n_replicates(self) -> int:
        """Ensemble size; samples, discards, and non-crossers partition it."""
        return self.tau_samples.size + self.n_discarded_negative + self.n_never

    @property
    def discard_fraction(self) -> float:
        return self.n_discarded_negative / self.n_replicates

    def mean_tau(self) -> float:
        """Mean crossing time of the kept paths, NaN when none crossed."""
        if self.tau_samples.size == 0:
            return float("nan")
        return float(self.tau_samples.mean())

    def boxplot_summary(self) -> dict[str, float]:
        """Quartiles and 1.5 IQR whiskers of the kept crossing times."""
        from matplotlib import cbook

        if self.tau_samples.size == 0:
            raise ValueError("no kept crossing times to summarise")
        raw = cbook.boxplot_stats(self.tau_samples, whis=1.5)[0]
        return {
            "median": float(raw["med"]),
            "q1": float(raw["q1"]),
            "q3": float(raw["q3"]),
            "whisker_low": float(raw["whislo"]),
            "whisker_high": float(raw["whishi"]),
            "n_outliers": len(raw["fliers"]),
            "n": self.tau_samples.size,
        }


def _repol_chunk(
    params: ModelParams,
    grid: TorusGrid,
    config: SolverConfig,
    init_activator: np.ndarray,
    init_inhibitor: np.ndarray,
    gamma: float,
    seeds: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Crossing times and discard flags of one replicate chunk."""
    windows_t = np.stack(_window_quadrature(grid)).T.copy()
    n_rep = len(seeds)
    tau = np.full(n_rep, np.nan)
    means = np.empty((n_rep, 2))
    times = np.linspace(0.0, config.T, config.n_steps // config.record_stride + 1)

    def on_frame(index: int, activator: np.ndarray, inhibitor: np.ndarray) -> None:
        _blocked_project(activator, windows_t, means)
        crossed = means[:, 0] >= gamma * means[:, 1]
        fresh = np.isnan(tau) & crossed
        tau[fresh] = times[index]

    negative = _evolve_ensemble(
        params, grid, config, init_activator, init_inhibitor, seeds, False, on_frame
    )
    return tau, negative


def repol_sweep(
    sigma_grid,
    n_replicates: int = 200,
    *,
    gamma: float = DEFAULT_GAMMA,
    params: ModelParams | None = None,
    grid: TorusGrid | None = None,
    config: SolverConfig | None = None,
    initial_state: FieldPair | None = None,
    master_seed: int = 0,
    n_workers: int = 1,
) -> dict[float, RepolStats]:
    """Repolarisation statistics across a grid of noise levels.

    Each noise level runs its own replicate ensemble of the full model
    from the polarised default start.  Paths holding a negative entry at
    any step are discarded, matching the discard flag of single runs;
    the remaining paths contribute a crossing time or count as censored
    at the horizon.  Replicate seeds derive from the master seed and a
    global replicate index, so results do not depend on the worker
    count.

    Args:
        sigma_grid: activator noise intensities to sweep, each >= 0.
        n_replicates: ensemble size per noise level.
        gamma: dominance factor of the crossing condition.
        params: model coefficients; the swept intensity overrides
            ``sigma_A``.  Defaults to the calibrated set.
        grid: spatial grid; defaults to 500 nodes on the standard torus.
        config: temporal discretisation; defaults to a horizon of 120
            at step size 0.01 with every 25th step recorded.
        initial_state: starting fields; defaults to the polarised bump.
        master_seed: seed of the whole sweep.
        n_workers: worker processes to split replicate ranges across.

    Returns:
        Mapping from noise intensity to its ensemble statistics, in grid
        order.
    """
    sigmas = [float(s) for s in sigma_grid]
    if not sigmas:
        raise ValueError("sigma_grid must not be empty")
    if any(s < 0.0 for s in sigmas):
        raise ValueError("noise intensities must be nonnegative")
    if n_replicates < 1:
        raise ValueError(f"n_replicates must be at least 1, got {n_replicates}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    params = default_params() if params is None else params
    grid = TorusGrid(length=20.0, num_points=500) if grid is None else grid
    if config is None:
        config = SolverConfig(T=120.0, n_steps=12_000, record_stride=25)
    if initial_state is None:
        initial_state = default_initial_condition(grid, params)

    jobs: list[tuple[int, tuple[int, int]]] = []
    for sigma_index in range(len(sigmas)):
        for lo, hi in _replicate_chunks(n_replicates, n_workers):
            jobs.append((sigma_index, (lo, hi)))

    def job_args(sigma_index: int, lo: int, hi: int):
        run_params = replace(params, sigma_A=sigmas[sigma_index])
        seeds = np.array(
            [
                replicate_seed(master_seed, sigma_index * n_replicates + r)
                for r in range(lo, hi)
            ],
            dtype=np.uint64,
        )
        return (
            run_params,
            grid,
            config,
            initial_state.activator,
            initial_state.inhibitor,
            gamma,
            seeds,
        )

    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(_repol_chunk, *job_args(si, lo, hi)) for si, (lo, hi) in jobs
            ]
            partials = [f.result() for f in futures]
    else:
        partials = [_repol_chunk(*job_args(si, lo, hi)) for si, (lo, hi) in jobs]

    out: dict[float, RepolStats] = {}
    for sigma_index, sigma in enumerate(sigmas):
        taus = np.concatenate(
            [tau for (si, _), (tau, _) in zip(jobs, partials) if si == sigma_index]
        )
        negatives = np.concatenate(
            [neg for (si, _), (_, neg) in zip(jobs, partials) if si == sigma_index]
        )
        kept = ~negatives
        samples = taus[kept & ~np.isnan(taus)]
        out[sigma] = RepolStats(
            sigma=sigma,
            gamma=gamma,
            tau_samples=np.sort(samples),
            n_discarded_negative=int(negatives.sum()),
            n_never=int((kept & np.isnan(taus)).sum()),
            horizon=config.T,
        )
    return out


# ---------------------------------------------------------------------------
# estimation campaigns
# ---------------------------------------------------------------------------


class Scenario(enum.Enum):
    """Data-generating process of an estimation campaign."""

    LINEAR_ZERO_INIT = "linear_zero_init"
    FULL_MEINHARDT = "full_meinhardt"


class ChannelPolicy(enum.Enum):
    """How the observation channel count responds to the resolution."""

    FIXED = "fixed"
    SCALED = "scaled"


def scaled_channel_count(delta: float, length: float) -> int:
    """Densest channel count whose kernel supports stay disjoint.

    Supports of radius ``delta`` on evenly spread centers are disjoint
    exactly when there are at most ``length / (2 delta)`` of them, so
    the count is the floor of that ratio.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    count = math.floor(length / (2.0 * delta))
    if count < 1:
        raise ValueError(
            f"no disjoint channel fits: delta {delta} exceeds half of the domain"
        )
    return count


@dataclass(frozen=True)
class McCampaign:
    """Design of one Monte Carlo estimation campaign.

    Attributes
    ----------
    replicates:
        Independent trajectories to generate.
    master_seed:
        Seed deriving every replicate's noise stream.
    delta_grid:
        Observation resolutions, one result cell per entry.
    channel_policy:
        Fixed channel count, or the densest disjoint packing per
        resolution.
    scenario:
        Diffusion plus noise from flat zero fields, or the full model
        from the polarised start.
    fixed_channels:
        Channel count under the fixed policy.
    """

    replicates: int = 200
    master_seed: int = 0
    delta_grid: tuple[float, ...] = (0.34, 0.5, 1.0, 2.0)
    channel_policy: ChannelPolicy = ChannelPolicy.SCALED
    scenario: Scenario = Scenario.LINEAR_ZERO_INIT
    fixed_channels: int = 5

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError(f"replicates must be at least 1, got {self.replicates}")
        if not self.delta_grid:
            raise ValueError("delta_grid must not be empty")
        if any(d <= 0.0 for d in self.delta_grid):
            raise ValueError("every resolution must be positive")
        if len(set(self.delta_grid)) != len(self.delta_grid):
            raise ValueError("delta_grid entries must be distinct")
        if self.fixed_channels < 1:
            raise ValueError(f"fixed_channels must be at least 1, got {self.fixed_channels}")

    def channel_count(self, delta: float, length: float) -> int:
        """Channels observing at resolution ``delta`` under this policy."""
        if self.channel_policy is ChannelPolicy.FIXED:
            return self.fixed_channels
        return scaled_channel_count(delta, length)


@dataclass(frozen=True, eq=False)
class CampaignCell:
    """Per-replicate estimator outputs at one observation resolution.

    ``estimates`` holds the diffusivity estimates, ``information`` the
    observed information (the estimator's denominator), and
    ``noise_quadratic`` the channel-averaged realized variation of the
    smoothed field; all three are aligned by replicate index.
    Replicates whose information was not strictly positive carry NaN
    entries and are counted in ``n_degenerate``.
    """

    delta: float
    num_channels: int
    estimates: np.ndarray
    information: np.ndarray
    noise_quadratic: np.ndarray
    n_degenerate: int


@dataclass(frozen=True, eq=False)
class CampaignResult:
    """Outputs of one estimation campaign across its resolution grid."""

    campaign: McCampaign
    params: ModelParams
    grid: TorusGrid
    config: SolverConfig
    kernel: Kernel
    cells: tuple[CampaignCell, ...]
    n_negative_paths: int

    @property
    def deltas(self) -> np.ndarray:
        return np.array([cell.delta for cell in self.cells])

    def bias(self) -> np.ndarray:
        """Mean estimate minus the true diffusivity, per resolution."""
        return np.array(
            [np.nanmean(cell.estimates) - self.params.D_A for cell in self.cells]
        )

    def rmse(self) -> np.ndarray:
        """Root mean square estimation error per resolution."""
        return np.array(
            [
                math.sqrt(float(np.nanmean((cell.estimates - self.params.D_A) ** 2)))
                for cell in self.cells
            ]
        )

    def convergence_rate(self) -> float:
        """Log-log slope of the RMSE against the resolution."""
        if len(self.cells) < 2:
            raise ValueError("need at least two resolutions to fit a rate")
        slope, _ = np.polyfit(np.log(self.deltas), np.log(self.rmse()), 1)
        return float(slope)

    def standardised_errors(self, delta: float) -> np.ndarray:
        """Estimation errors scaled to unit variance under the CLT.

        The error of each kept replicate at the requested resolution is
        multiplied by ``sqrt(M T / (D Sigma)) / delta`` with the true
        diffusivity ``D``; asymptotically the result is standard normal.
        """
        cell = self._cell_at(delta)
        scale = math.sqrt(
            cell.num_channels * self.config.T / (self.params.D_A * self.kernel.Sigma)
        )
        values = (cell.estimates - self.params.D_A) * scale / cell.delta
        return values[np.isfinite(values)]

    def half_widths(self, delta: float, alpha: float, interval: str) -> np.ndarray:
        """Per-replicate confidence half widths at one resolution.

        The ``"plugin"`` interval uses the estimate itself with the
        kernel constant, ``delta * sqrt(D_hat * Sigma / (M T)) * q``; it
        is NaN where the estimate is negative.  The ``"data_driven"``
        interval divides the known noise scale by the square root of the
        observed information, ``sigma * norm_K * q / sqrt(info)``.
        """
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie strictly between 0 and 1, got {alpha}")
        cell = self._cell_at(delta)
        q = float(_sci_stats.norm.ppf(1.0 - alpha / 2.0))
        if interval == "plugin":
            with np.errstate(invalid="ignore"):
                return (
                    cell.delta
                    * np.sqrt(
                        cell.estimates
                        * self.kernel.Sigma
                        / (cell.num_channels * self.config.T)
                    )
                    * q
                )
        if interval == "data_driven":
            return (
                self.params.sigma_A * self.kernel.norm_K * q / np.sqrt(cell.information)
            )
        raise ValueError(f"unknown interval kind {interval!r}")

    def coverage(self, alpha: float, interval: str) -> np.ndarray:
        """Fraction of replicates whose interval covers the truth, per cell.

        Replicates without a well-defined interval (degenerate data, or
        a negative estimate under the plugin construction) count as not
        covering.
        """
        rates = []
        for cell in self.cells:
            widths = self.half_widths(cell.delta, alpha, interval)
            hit = np.abs(cell.estimates - self.params.D_A) <= widths
            rates.append(float(np.where(np.isnan(widths), False, hit).mean()))
        return np.array(rates)

    def summary_rows(self) -> list[dict[str, float]]:
        """One flat record per resolution, ready for tabular export."""
        rows = []
        cov90_pl = self.coverage(0.10, "plugin")
        cov90_dd = self.coverage(0.10, "data_driven")
        cov95_pl = self.coverage(0.05, "plugin")
        cov95_dd = self.coverage(0.05, "data_driven")
        bias = self.bias()
        rmse = self.rmse()
        for k, cell in enumerate(self.cells):
            rows.append(
                {
                    "delta": cell.delta,
                    "num_channels": cell.num_channels,
                    "n_replicates": int(cell.estimates.size),
                    "n_degenerate": cell.n_degenerate,
                    "mean_estimate": float(np.nanmean(cell.estimates)),
                    "bias": float(bias[k]),
                    "rmse": float(rmse[k]),
                    "coverage90_plugin": float(cov90_pl[k]),
                    "coverage90_data_driven": float(cov90_dd[k]),
                    "coverage95_plugin": float(cov95_pl[k]),
                    "coverage95_data_driven": float(cov95_dd[k]),
                }
            )
        return rows

    def _cell_at(self, delta: float) -> CampaignCell:
        for cell in self.cells:
            if cell.delta == delta:
                return cell
        raise KeyError(f"no cell at resolution {delta}")


def _campaign_chunk(
    params: ModelParams,
    grid: TorusGrid,
    config: SolverConfig,
    init_activator: np.ndarray,
    init_inhibitor: np.ndarray,
    linear: bool,
    loc_rows_t: np.ndarray,
    lap_rows_t: np.ndarray,
    starts: np.ndarray,
    seeds: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Estimator accumulators of one replicate chunk.

    Observations happen at every recorded frame: the stacked fields are
    projected onto all cells' kernel rows at once, and the three
    left-endpoint sums of the estimator (drift integral, observed
    information, realized variation) grow online per cell, so no frame
    history is kept.
    """
    n_rep = seeds.size
    n_cells = starts.size
    times = np.linspace(0.0, config.T, config.n_steps // config.record_stride + 1)
    frame_dt = np.diff(times)
    num = np.zeros((n_rep, n_cells))
    den = np.zeros((n_rep, n_cells))
    qv = np.zeros((n_rep, n_cells))
    loc = np.empty((n_rep, loc_rows_t.shape[1]))
    lap = np.empty_like(loc)
    prev_loc = np.empty_like(loc)
    prev_lap = np.empty_like(loc)

    def on_frame(index: int, activator: np.ndarray, inhibitor: np.ndarray) -> None:
        scaled = grid.dx * activator
        _blocked_project(scaled, loc_rows_t, loc)
        _blocked_project(scaled, lap_rows_t, lap)
        if index > 0:
            inc = loc - prev_loc
            num[:] += np.add.reduceat(prev_lap * inc, starts, axis=1)
            den[:] += np.add.reduceat(prev_lap**2, starts, axis=1) * frame_dt[index - 1]
            qv[:] += np.add.reduceat(inc**2, starts, axis=1)
        prev_loc[:] = loc
        prev_lap[:] = lap

    negative = _evolve_ensemble(
        params, grid, config, init_activator, init_inhibitor, seeds, linear, on_frame
    )
    return num, den, qv, negative


def estimation_campaign(
    campaign: McCampaign,
    *,
    params: ModelParams | None = None,
    grid: TorusGrid | None = None,
    config: SolverConfig | None = None,
    kernel: Kernel | None = None,
    n_workers: int = 1,
) -> CampaignResult:
    """Run one Monte Carlo estimation campaign.

    Every replicate is an independent trajectory of the chosen scenario,
    observed through local kernel averages at each resolution of the
    campaign's grid with the channel count its policy prescribes.  The
    diffusivity estimate, observed information, and realized variation
    of each replicate and resolution accumulate online at the recording
    stride of ``config``, matching an estimate from the recorded
    trajectory to floating point roundoff.

    Replicate seeds derive from the campaign's master seed and the
    replicate index, so the outputs are a pure function of the campaign
    design regardless of ``n_workers``.

    Args:
        campaign: design to execute.
        params: model coefficients; the default calibrated set carries
            the standard noise intensity.  The activator noise must be
            positive, otherwise the estimator data is degenerate.
        grid: spatial grid; defaults to 500 nodes on the standard torus.
        config: temporal discretisation; defaults to a window of 30 in
            50 000 steps with every 5th recorded, giving 10 000
            observation frames.
        kernel: local observation kernel; defaults to the smooth bump.
        n_workers: worker processes to split the replicate range across.

    Returns:
        A CampaignResult with one cell per resolution.
    """
    params = default_params() if params is None else params
    grid = TorusGrid(length=20.0, num_points=500) if grid is None else grid
    if config is None:
        config = SolverConfig(T=30.0, n_steps=50_000, record_stride=5)
    kernel = bump_kernel() if kernel is None else kernel
    if params.sigma_A <= 0.0:
        raise ValueError("estimation campaigns need activator noise; sigma_A is zero")

    counts = [campaign.channel_count(d, grid.length) for d in campaign.delta_grid]
    loc_blocks = []
    lap_blocks = []
    for delta, count in zip(campaign.delta_grid, counts):
        layout = regular_layout(delta, count, grid)
        loc_blocks.extend(
            scaled_kernel_samples(kernel, delta, c, grid) for c in layout.centers
        )
        lap_blocks.extend(
            laplace_kernel_samples(kernel, delta, c, grid) for c in layout.centers
        )
    loc_rows_t = np.stack(loc_blocks).T.copy()
    lap_rows_t = np.stack(lap_blocks).T.copy()
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.intp)

    if campaign.scenario is Scenario.LINEAR_ZERO_INIT:
        init_a = np.zeros(grid.num_points)
        init_i = np.zeros(grid.num_points)
        linear = True
    else:
        start = default_initial_condition(grid, params)
        init_a, init_i = start.activator, start.inhibitor
        linear = False

    seeds = np.array(
        [replicate_seed(campaign.master_seed, r) for r in range(campaign.replicates)],
        dtype=np.uint64,
    )
    chunks = _replicate_chunks(campaign.replicates, n_workers)
    chunk_args = [
        (
            params,
            grid,
            config,
            init_a,
            init_i,
            linear,
            loc_rows_t,
            lap_rows_t,
            starts,
            seeds[lo:hi],
        )
        for lo, hi in chunks
    ]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_campaign_chunk, *args) for args in chunk_args]
            partials = [f.result() for f in futures]
    else:
        partials = [_campaign_chunk(*args) for args in chunk_args]

    num = np.concatenate([p[0] for p in partials])
    den = np.concatenate([p[1] for p in partials])
    qv = np.concatenate([p[2] for p in partials])
    negative = np.concatenate([p[3] for p in partials])

    cells = []
    for k, (delta, count) in enumerate(zip(campaign.delta_grid, counts)):
        degenerate = ~(den[:, k] > 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            estimates = np.where(degenerate, np.nan, num[:, k] / den[:, k])
        cells.append(
            CampaignCell(
                delta=delta,
                num_channels=count,
                estimates=estimates,
                information=np.where(degenerate, np.nan, den[:, k]),
                noise_quadratic=qv[:, k] / count,
                n_degenerate=int(degenerate.sum()),
            )
        )
    return CampaignResult(
        campaign=campaign,
        params=params,
        grid=grid,
        config=config,
        kernel=kernel,
        cells=tuple(cells),
        n_negative_paths=int(negative.sum()),
    )
