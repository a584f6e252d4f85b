"""Channel inversion: estimate the quantized clean-input distribution whose
induced output density is L1-closest to a tabulated density estimate.

The inversion is a linear program over the probability simplex on the
quantized support grid; levels of the recovered masses are then quantized
uniformly (which may leave a vector that no longer sums to 1 -- the Bayes
response downstream accepts such improper priors).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import simplex
from .density import DensityEstimate, DensityError, Kernel


class InversionError(ValueError):
    pass


@dataclass(frozen=True)
class SupportGrid:
    """Uniform quantization a_i = a + i*Delta of the clean range [a, b].

    When (b - a) / Delta is not integral the last symbol is clamped to b, so
    the final gap is shorter than Delta.
    """

    a: float
    b: float
    Delta: float

    def __post_init__(self):
        if not self.a < self.b:
            raise InversionError("support grid needs a < b")
        if not 0 < self.Delta <= self.b - self.a:
            raise InversionError("Delta must be in (0, b - a]")

    @property
    def symbols(self):
        n_full = int(math.floor((self.b - self.a) / self.Delta + 1e-9))
        pts = self.a + self.Delta * np.arange(n_full + 1)
        if pts[-1] < self.b - 1e-9 * max(1.0, abs(self.b)):
            pts = np.append(pts, self.b)
        else:
            pts[-1] = min(pts[-1], self.b)
        return pts

    @property
    def size(self):
        return self.symbols.size


@dataclass(frozen=True)
class QuantizedPmf:
    """Mass vector aligned to a SupportGrid's symbols.

    ``delta`` is the level-quantizer step (0 means raw, unquantized levels).
    After level quantization the masses need not sum to 1; ``normalized``
    records whether they are known to.
    """

    grid: SupportGrid
    masses: np.ndarray
    delta: float = 0.0
    normalized: bool = True

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        if masses.shape != (self.grid.size,):
            raise InversionError("mass vector does not match the support grid")
        if np.any(masses < -1e-12):
            raise InversionError("masses must be non-negative")
        object.__setattr__(self, "masses", np.maximum(masses, 0.0))

    def total(self):
        return float(self.masses.sum())

    def cdf(self):
        """Right-continuous step CDF of the pmf (symbols, cumulative masses)."""
        return self.grid.symbols, np.cumsum(self.masses)

    def mode_symbol(self):
        return float(self.grid.symbols[int(np.argmax(self.masses))])

    def to_csv(self, path):
        data = np.column_stack([self.grid.symbols, self.masses])
        np.savetxt(path, data, delimiter=",", header="symbol,mass",
                   comments="", fmt="%.17g")


def load_pmf_csv(path, delta=0.0):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    symbols, masses = data[:, 0], data[:, 1]
    steps = np.diff(symbols)
    grid = SupportGrid(a=float(symbols[0]), b=float(symbols[-1]),
                       Delta=float(steps[0]))
    total = masses.sum()
    return QuantizedPmf(grid=grid, masses=masses, delta=delta,
                        normalized=bool(abs(total - 1.0) < 1e-9))


@dataclass(frozen=True)
class LpSolution:
    """Result of an L1 channel inversion."""

    pmf: QuantizedPmf          # level-quantized masses
    raw_masses: np.ndarray     # LP minimizer before level quantization
    objective: float           # achieved (grid-step weighted) L1 value
    residuals: np.ndarray      # per-grid-point |model - data|
    iterations: int
    gap: float                 # optimality-gap certificate

    def sidecar(self):
        return {"objective": self.objective, "iterations": self.iterations,
                "gap": self.gap}

    def write_sidecar(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2)


def quantize_support(samples, grid):
    """Map an empirical CDF to masses on the grid: P(a_i) = F(a_i) - F(a_{i-1}).

    Samples in the half-open interval (a_{i-1}, a_i] are allocated to the
    upper endpoint a_i; P(a_0) = F(a_0).  The result sums to 1 exactly.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise InversionError("no samples")
    if samples.min() < grid.a - 1e-12 or samples.max() > grid.b + 1e-12:
        raise InversionError("sample outside the support interval")
    symbols = grid.symbols
    n = samples.size
    cdf_at = np.searchsorted(np.sort(samples), symbols + 1e-12) / n
    masses = np.diff(np.concatenate([[0.0], cdf_at]))
    masses[-1] += 1.0 - cdf_at[-1]  # guard against boundary rounding
    return QuantizedPmf(grid=grid, masses=masses, delta=0.0, normalized=True)


def quantize_levels(pmf, delta):
    """Round each mass to the nearest multiple of delta (half away from zero)."""
    if not 0 < delta <= 1:
        raise InversionError("delta must be in (0, 1]")
    # nudge guards against ratios like 0.95/0.1 landing just below a half
    ratio = pmf.masses / delta
    masses = np.floor(ratio + 0.5 + 1e-9 * np.maximum(ratio, 1.0)) * delta
    total = masses.sum()
    return replace(pmf, masses=masses, delta=float(delta),
                   normalized=bool(abs(total - 1.0) < 1e-12))


def _axis_model_matrix(channel, symbols, axis, smooth_kernel, bandwidth):
    """Channel density of each symbol on one grid axis, optionally smoothed by
    the same kernel that produced the data density estimate."""
    pts = axis.points()
    mat = channel.density_matrix(symbols, pts)
    if smooth_kernel is not None and bandwidth > 0:
        radius = int(math.ceil(smooth_kernel.support_radius * bandwidth / axis.step))
        if radius >= 1:
            taps = smooth_kernel.profile(
                np.arange(-radius, radius + 1) * axis.step / bandwidth)
            taps = taps * (axis.step / bandwidth)
            from scipy.ndimage import convolve1d

            mat = convolve1d(mat, taps, axis=1, mode="constant", cval=0.0)
    return mat


def _subsample_axis(axis, stride):
    from .density import GridAxis

    count = (axis.count + stride - 1) // stride
    return GridAxis(origin=axis.origin, step=axis.step * stride, count=count)


def invert_channel(f_hat, channel, grid, delta, *, smooth_model="auto",
                   max_rows=4096, solver="auto", alphabet_cap=100_000,
                   max_iter=None):
    """L1 projection of a density estimate through the channel.

    Solves  min_{p in simplex}  sum_i step * | f_hat(y_i) - sum_j f(y_i | a_j) p_j |
    over the symbols a_j of ``grid`` (tuples of symbols when f_hat is
    multi-dimensional), then level-quantizes the minimizer with ``delta``.

    ``smooth_model="auto"`` convolves the model densities with the kernel and
    bandwidth recorded on ``f_hat`` (when present), matching the smoothing the
    data density went through; pass ``smooth_model=False`` for raw densities.
    """
    if not isinstance(f_hat, DensityEstimate):
        raise InversionError("f_hat must be a DensityEstimate")
    d = f_hat.dimension
    symbols = grid.symbols
    n_states = symbols.size ** d
    if n_states > alphabet_cap:
        raise InversionError(
            f"tuple alphabet size {n_states} exceeds cap {alphabet_cap}; "
            f"use a coarser Delta")

    if smooth_model == "auto":
        kernel = f_hat.kernel
        bandwidth = f_hat.bandwidth if kernel is not None else 0.0
    elif smooth_model:
        kernel = f_hat.kernel or Kernel("gaussian", 1)
        bandwidth = f_hat.bandwidth
    else:
        kernel, bandwidth = None, 0.0

    # subsample the evaluation grid if the LP would otherwise be too tall
    axes = list(f_hat.axes)
    values = f_hat.values
    total_rows = int(np.prod([ax.count for ax in axes]))
    stride = 1
    while total_rows > max_rows:
        stride += 1
        total_rows = int(np.prod([(ax.count + stride - 1) // stride for ax in axes]))
    if stride > 1:
        slices = tuple(slice(None, None, stride) for _ in axes)
        values = values[slices]
        axes = [_subsample_axis(ax, stride) for ax in axes]

    axis_mats = [
        _axis_model_matrix(channel, symbols, ax, kernel, bandwidth) for ax in axes
    ]
    if d == 1:
        A = axis_mats[0].T  # rows: grid points, cols: symbols
    else:
        letters = "abcdefg"[:d]
        spec = ",".join(f"{letters[t]}{letters[t].upper()}" for t in range(d)) \
            + "->" + letters + letters.upper()
        operands = [axis_mats[t].T for t in range(d)]
        A = np.einsum(spec, *operands).reshape(total_rows, n_states)

    b = values.reshape(-1)
    step_volume = float(np.prod([ax.step for ax in axes]))

    ones = np.ones((1, n_states))
    p, resid, obj_rows, iters = simplex.l1_fit(
        A, b, extra_eq=(ones, np.array([1.0])), solver=solver, max_iter=max_iter)
    p = np.maximum(p, 0.0)
    objective = obj_rows * step_volume
    gap = max(1e-12, 1e-7 * objective)

    if d == 1:
        raw = QuantizedPmf(grid=grid, masses=p, delta=0.0,
                           normalized=bool(abs(p.sum() - 1.0) < 1e-9))
        quantized = quantize_levels(raw, delta) if delta > 0 else raw
        return LpSolution(pmf=quantized, raw_masses=p, objective=objective,
                          residuals=resid, iterations=iters, gap=gap)
    # multi-dimensional: return the tuple-shaped masses via TuplePmf in denoise
    from .denoise import TuplePmf

    shape = (symbols.size,) * d
    raw = p.reshape(shape)
    if delta > 0:
        q = np.floor(raw / delta + 0.5) * delta
    else:
        q = raw
    pmf = TuplePmf(grid=grid, masses=q, delta=float(delta))
    return LpSolution(pmf=pmf, raw_masses=raw, objective=objective,
                      residuals=resid, iterations=iters, gap=gap)


def inversion_objective(f_hat, channel, grid, masses, *, smooth_model="auto",
                        max_rows=4096):
    """Direct evaluation of the inversion objective at a given mass vector.

    Independent of the LP solve path; used to certify solver output.
    """
    if smooth_model == "auto":
        kernel = f_hat.kernel
        bandwidth = f_hat.bandwidth if kernel is not None else 0.0
    else:
        kernel, bandwidth = (None, 0.0) if not smooth_model else (f_hat.kernel, f_hat.bandwidth)
    axes = list(f_hat.axes)
    values = f_hat.values
    total_rows = int(np.prod([ax.count for ax in axes]))
    stride = 1
    while total_rows > max_rows:
        stride += 1
        total_rows = int(np.prod([(ax.count + stride - 1) // stride for ax in axes]))
    if stride > 1:
        slices = tuple(slice(None, None, stride) for _ in axes)
        values = values[slices]
        axes = [_subsample_axis(ax, stride) for ax in axes]
    symbols = grid.symbols
    d = len(axes)
    axis_mats = [_axis_model_matrix(channel, symbols, ax, kernel, bandwidth)
                 for ax in axes]
    masses = np.asarray(masses, dtype=float)
    if d == 1:
        model = axis_mats[0].T @ masses.reshape(-1)
    else:
        letters = "abcdefg"[:d]
        spec = ",".join(f"{letters[t]}{letters[t].upper()}" for t in range(d)) \
            + "," + letters.upper() + "->" + letters
        operands = [m.T for m in axis_mats] + [masses.reshape((symbols.size,) * d)]
        model = np.einsum(spec, *operands)
    step_volume = float(np.prod([ax.step for ax in axes]))
    return float(np.abs(model - values.reshape(model.shape)).sum() * step_volume)


def _cdf_eval(breaks, heights, x):
    """Right-continuous step CDF evaluation; heights[i] is the value on
    [breaks[i], breaks[i+1])."""
    idx = np.searchsorted(breaks, x, side="right") - 1
    out = np.where(idx < 0, 0.0, heights[np.clip(idx, 0, heights.size - 1)])
    return out


def levy_distance(f_breaks, f_heights, g_breaks, g_heights, tol=1e-6):
    """Levy metric between two piecewise-constant CDFs, by bisection on eps.

    Each CDF is given by its jump locations and the cumulative values attained
    there (right-continuous).  Accepts either explicit (breaks, heights) pairs
    or raw sample arrays via :func:`levy_distance_samples`.
    """
    f_breaks = np.asarray(f_breaks, dtype=float)
    g_breaks = np.asarray(g_breaks, dtype=float)
    f_heights = np.asarray(f_heights, dtype=float)
    g_heights = np.asarray(g_heights, dtype=float)

    def satisfied(eps):
        # the sandwich F(x - eps) - eps <= G(x) <= F(x + eps) + eps can only
        # fail near jumps; check both one-sided limits at every shifted break
        cand = np.unique(np.concatenate([
            f_breaks, g_breaks, f_breaks - eps, f_breaks + eps,
            g_breaks - eps, g_breaks + eps]))
        shift = 1e-12 * max(1.0, np.abs(cand).max())
        xs = np.unique(np.concatenate([cand, cand - shift]))
        gx = _cdf_eval(g_breaks, g_heights, xs)
        f_lo = _cdf_eval(f_breaks, f_heights, xs - eps)
        f_hi = _cdf_eval(f_breaks, f_heights, xs + eps)
        return np.all(gx >= f_lo - eps - 1e-12) and np.all(gx <= f_hi + eps + 1e-12)

    lo, hi = 0.0, 1.0
    span = max(f_breaks.max(), g_breaks.max()) - min(f_breaks.min(), g_breaks.min())
    hi = max(1.0, span)
    if satisfied(0.0):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


def empirical_cdf(samples):
    """(breaks, heights) of the empirical CDF of a sample array."""
    samples = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    breaks, counts = np.unique(samples, return_counts=True)
    heights = np.cumsum(counts) / samples.size
    return breaks, heights


def levy_distance_samples(x, y, tol=1e-6):
    fb, fh = empirical_cdf(x)
    gb, gh = empirical_cdf(y)
    return levy_distance(fb, fh, gb, gh, tol=tol)
