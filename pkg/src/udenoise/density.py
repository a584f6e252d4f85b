"""Kernel and histogram density estimation on uniform evaluation grids.

Estimates are represented on per-axis uniform grids (origin, step, count) and
integrate with the midpoint rule, so a histogram whose bins coincide with the
grid integrates to 1 exactly.  Product kernels are used in dimension d > 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import convolve1d


class DensityError(ValueError):
    pass


_KERNELS = ("gaussian", "epanechnikov", "box")


@dataclass(frozen=True)
class Kernel:
    """Symmetric non-negative kernel, applied per coordinate (product form)."""

    kind: str = "gaussian"
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in _KERNELS:
            raise DensityError(f"unknown kernel {self.kind!r}; choose from {_KERNELS}")
        if self.dimension < 1:
            raise DensityError("kernel dimension must be >= 1")

    def profile(self, u):
        """1D kernel values K(u); integrates to 1, symmetric about 0."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        if self.kind == "epanechnikov":
            return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
        return np.where(np.abs(u) <= 0.5, 1.0, 0.0)

    @property
    def support_radius(self):
        """Radius beyond which the kernel is zero or negligible (6 sigma)."""
        if self.kind == "gaussian":
            return 6.0
        if self.kind == "epanechnikov":
            return 1.0
        return 0.5


@dataclass(frozen=True)
class GridAxis:
    origin: float
    step: float
    count: int

    def points(self):
        return self.origin + self.step * np.arange(self.count)

    @property
    def upper(self):
        return self.origin + self.step * (self.count - 1)


@dataclass(frozen=True)
class DensityEstimate:
    """Density values tabulated on a uniform (product) grid."""

    axes: tuple
    values: np.ndarray
    bandwidth: float
    sample_count: int
    kernel: Kernel | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(ax.count for ax in self.axes):
            raise DensityError("value array does not match grid shape")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axes", tuple(self.axes))

    @property
    def dimension(self):
        return len(self.axes)

    @property
    def cell_volume(self):
        return float(np.prod([ax.step for ax in self.axes]))

    def grid_points(self):
        """Per-axis coordinate arrays."""
        return tuple(ax.points() for ax in self.axes)

    def integral(self):
        return float(self.values.sum() * self.cell_volume)

    def with_values(self, values):
        return replace(self, values=values)

    def to_csv(self, path):
        """One row per grid point: coordinates..., value.

        A leading comment line preserves the kernel and bandwidth so a file
        round trip keeps enough information for model smoothing downstream.
        """
        pts = np.meshgrid(*self.grid_points(), indexing="ij")
        cols = [p.reshape(-1) for p in pts] + [self.values.reshape(-1)]
        data = np.column_stack(cols)
        header = ",".join([f"x{i}" for i in range(self.dimension)] + ["value"])
        if self.kernel is not None:
            header = (f"# kernel={self.kernel.kind} "
                      f"bandwidth={self.bandwidth:.17g} "
                      f"samples={self.sample_count}\n") + header
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def load_density_csv(path):
    """Inverse of DensityEstimate.to_csv for 1D estimates."""
    with open(path) as fh:
        first = fh.readline()
    kernel, bandwidth, samples, skip = None, 0.0, 0, 1
    if first.startswith("#"):
        fields = dict(tok.split("=", 1) for tok in first[1:].split())
        if "kernel" in fields:
            kernel = Kernel(fields["kernel"], 1)
        bandwidth = float(fields.get("bandwidth", 0.0))
        samples = int(fields.get("samples", 0))
        skip = 2
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.shape[1] != 2:
        raise DensityError("only 1D density CSV files are supported here")
    coords, values = data[:, 0], data[:, 1]
    if coords.size < 2:
        raise DensityError("density CSV needs at least two grid points")
    steps = np.diff(coords)
    if not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12):
        raise DensityError("density CSV grid must be uniform")
    axis = GridAxis(origin=float(coords[0]), step=float(steps[0]), count=coords.size)
    return DensityEstimate(axes=(axis,), values=values, bandwidth=bandwidth,
                           sample_count=samples, kernel=kernel)


def silverman_bandwidth(samples, dimension=1, support_range=None):
    """Rule-of-thumb bandwidth 1.06 * sigma_hat * n ** (-1 / (4 + d)).

    sigma_hat is the per-axis sample standard deviation averaged over axes.
    Degenerate inputs (all samples identical) fall back to 1/100 of the
    support range, with a warning.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if n < 2:
        raise DensityError("bandwidth selection needs at least 2 samples")
    sigma = float(np.mean(np.std(samples, axis=0, ddof=1)))
    scale = max(1.0, float(np.abs(samples).max()))
    if sigma <= 1e-12 * scale:
        if support_range is not None:
            fallback = (support_range[1] - support_range[0]) / 100.0
        else:
            fallback = max(1.0, float(np.abs(samples).max())) / 100.0
        warnings.warn("all samples identical; falling back to range/100 bandwidth",
                      RuntimeWarning, stacklevel=2)
        return fallback
    return 1.06 * sigma * n ** (-1.0 / (4.0 + dimension))


def cross_validated_bandwidth(samples, kernel=None, num=10):
    """Leave-one-out log-likelihood bandwidth search on a log grid around
    Silverman's rule.  Direct evaluation; intended for moderate n."""
    samples = np.asarray(samples, dtype=float).reshape(-1)
    kernel = kernel or Kernel("gaussian", 1)
    h0 = silverman_bandwidth(samples)
    n = samples.size
    diffs = samples[:, None] - samples[None, :]
    best_h, best_ll = h0, -np.inf
    for h in h0 * np.logspace(-0.7, 0.7, num):
        k = kernel.profile(diffs / h) / h
        np.fill_diagonal(k, 0.0)
        loo = k.sum(axis=1) / (n - 1)
        ll = float(np.log(np.maximum(loo, 1e-300)).sum())
        if ll > best_ll:
            best_h, best_ll = h, ll
    return best_h


def make_grid(samples, h, num_points, kernel=None, bounds=None):
    """Per-axis grids covering the samples plus a kernel-support margin."""
    samples = _as_2d(samples)
    kernel = kernel or Kernel("gaussian", samples.shape[1])
    margin = kernel.support_radius * h
    axes = []
    for d in range(samples.shape[1]):
        if bounds is not None:
            lo, hi = bounds[d]
        else:
            lo = samples[:, d].min() - margin
            hi = samples[:, d].max() + margin
        step = (hi - lo) / (num_points - 1)
        axes.append(GridAxis(origin=float(lo), step=float(step), count=int(num_points)))
    return tuple(axes)


def _as_2d(samples):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DensityError("no samples")
    if samples.ndim == 1:
        samples = samples[:, None]
    return samples


def kde(samples, kernel=None, h=None, axes=None, num_points=512, method="binned"):
    """Kernel density estimate (1 / (n h^d)) sum_i K((y - Y_i) / h).

    ``method`` is "binned" (linear binning + separable convolution, O(N + n))
    or "direct" (exact sum over samples).  The binned path deviates from the
    direct one by less than 1e-3 of the peak value on sane inputs.
    """
    samples = _as_2d(samples)
    n, d = samples.shape
    kernel = kernel or Kernel("gaussian", d)
    if kernel.dimension != d:
        kernel = Kernel(kernel.kind, d)
    if h is None:
        h = silverman_bandwidth(samples, d)
    if h <= 0:
        raise DensityError("bandwidth must be positive")
    if axes is None:
        axes = make_grid(samples, h, num_points, kernel)
    for dd, ax in enumerate(axes):
        lo, hi = ax.origin, ax.upper
        if samples[:, dd].min() < lo - 1e-9 or samples[:, dd].max() > hi + 1e-9:
            raise DensityError("evaluation grid does not cover the samples")
    if method == "direct":
        values = _kde_direct(samples, kernel, h, axes)
    elif method == "binned":
        values = _kde_binned(samples, kernel, h, axes)
    else:
        raise DensityError(f"unknown KDE method {method!r}")
    return DensityEstimate(axes=tuple(axes), values=values, bandwidth=float(h),
                           sample_count=n, kernel=kernel)


def _kde_direct(samples, kernel, h, axes):
    n, d = samples.shape
    shape = tuple(ax.count for ax in axes)
    values = np.zeros(shape)
    pts = [ax.points() for ax in axes]
    # evaluate one sample at a time as a separable outer product
    for i in range(n):
        factors = [kernel.profile((pts[dd] - samples[i, dd]) / h) for dd in range(d)]
        contrib = factors[0]
        for f in factors[1:]:
            contrib = np.multiply.outer(contrib, f)
        values += contrib
    return values / (n * h ** d)


def _kde_binned(samples, kernel, h, axes):
    n, d = samples.shape
    shape = tuple(ax.count for ax in axes)
    counts = np.zeros(shape)
    # linear binning: split each sample's unit weight between the two
    # neighbouring grid points along every axis
    pos = np.empty_like(samples)
    for dd, ax in enumerate(axes):
        pos[:, dd] = (samples[:, dd] - ax.origin) / ax.step
    base = np.floor(pos).astype(int)
    frac = pos - base
    for corner in range(1 << d):
        idx = np.empty((n, d), dtype=int)
        w = np.ones(n)
        for dd in range(d):
            bit = (corner >> dd) & 1
            idx[:, dd] = np.clip(base[:, dd] + bit, 0, shape[dd] - 1)
            w = w * (frac[:, dd] if bit else (1.0 - frac[:, dd]))
        np.add.at(counts, tuple(idx.T), w)
    values = counts
    for dd, ax in enumerate(axes):
        radius = int(math.ceil(kernel.support_radius * h / ax.step))
        taps = kernel.profile(np.arange(-radius, radius + 1) * ax.step / h)
        values = convolve1d(values, taps, axis=dd, mode="constant", cval=0.0)
    return values / (n * h ** d)


def histogram_estimate(samples, h, anchor=0.0, axes=None):
    """Piecewise-constant density: bin count / (n * bin volume).

    Bins are half-open [anchor + j*h, anchor + (j+1)*h); the returned grid
    points are bin centers with step h, so the estimate integrates to 1
    exactly under the midpoint rule.
    """
    samples = _as_2d(samples)
    n, d = samples.shape
    if h <= 0:
        raise DensityError("bin width must be positive")
    if axes is None:
        new_axes = []
        for dd in range(d):
            lo_bin = math.floor((samples[:, dd].min() - anchor) / h)
            hi_bin = math.floor((samples[:, dd].max() - anchor) / h)
            origin = anchor + (lo_bin + 0.5) * h
            new_axes.append(GridAxis(origin=float(origin), step=float(h),
                                     count=int(hi_bin - lo_bin + 1)))
        axes = tuple(new_axes)
    shape = tuple(ax.count for ax in axes)
    idx = np.empty((n, d), dtype=int)
    for dd, ax in enumerate(axes):
        j = np.floor((samples[:, dd] - (ax.origin - 0.5 * ax.step)) / ax.step).astype(int)
        if np.any(j < 0) or np.any(j >= ax.count):
            raise DensityError("histogram grid does not cover the samples")
        idx[:, dd] = j
    counts = np.zeros(shape)
    np.add.at(counts, tuple(idx.T), 1.0)
    values = counts / (n * h ** d)
    return DensityEstimate(axes=tuple(axes), values=values, bandwidth=float(h),
                           sample_count=n, kernel=None)


def l1_distance(f, g):
    """Grid quadrature of |f - g|; both estimates must share one grid."""
    if f.dimension != g.dimension or f.values.shape != g.values.shape:
        raise DensityError("mismatched grids")
    for af, ag in zip(f.axes, g.axes):
        if not (math.isclose(af.origin, ag.origin, rel_tol=1e-9, abs_tol=1e-12)
                and math.isclose(af.step, ag.step, rel_tol=1e-9, abs_tol=1e-12)):
            raise DensityError("mismatched grids")
    return float(np.abs(f.values - g.values).sum() * f.cell_volume)


def super_symbols(sequence, k, subsequence=None):
    """(2k+1)-tuples of a sequence.

    With ``subsequence=None``, every valid sliding window (centers k..n-k-1,
    0-based).  With ``subsequence=i`` (1-based, per partition_subsequences),
    only the windows of that jumping subsequence, which are independent under
    a memoryless channel.
    """
    sequence = np.asarray(sequence, dtype=float).reshape(-1)
    n = sequence.size
    w = 2 * k + 1
    if n < w:
        raise DensityError(f"sequence shorter than window length {w}")
    windows = np.lib.stride_tricks.sliding_window_view(sequence, w)
    if subsequence is None:
        return windows.copy()
    if not 1 <= subsequence <= w:
        raise DensityError(f"subsequence index must be in 1..{w}")
    return windows[subsequence - 1::w].copy()


def context_kde(sequence, k, subsequence, kernel=None, h=None, axes=None,
                num_points=64, method="binned"):
    """(2k+1)-dimensional product-kernel estimate over the super-symbols of
    one jumping subsequence."""
    if k < 1:
        raise DensityError("context order k must be >= 1")
    supers = super_symbols(sequence, k, subsequence)
    d = 2 * k + 1
    kernel = kernel or Kernel("gaussian", d)
    return kde(supers, kernel=Kernel(kernel.kind, d), h=h, axes=axes,
               num_points=num_points, method=method)
