"""Memoryless channel models: conditional densities, sampling, diagnostics.

A channel is a family of conditional output densities f(y | x) indexed by the
clean symbol x in a closed input range [a, b].  All models are immutable after
construction and every operation is pure given an explicit RNG, so they are
safe to share across worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# Floor applied to degenerate scale parameters (e.g. the Rayleigh parameter at
# x = 0), where the model would otherwise collapse to a point mass.
SCALE_FLOOR = 1e-3


class ChannelDomainError(ValueError):
    """Raised when an input symbol lies outside the channel's input range."""


class ChannelConfigError(ValueError):
    """Raised for invalid channel parameters or malformed channel tables."""


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / SQRT2PI


def _norm_cdf(z):
    from scipy.special import ndtr

    return ndtr(z)


class ChannelModel:
    """Base class for memoryless channels on an input range [a, b]."""

    def __init__(self, input_range):
        a, b = float(input_range[0]), float(input_range[1])
        if not a < b:
            raise ChannelConfigError(f"input range must satisfy a < b, got [{a}, {b}]")
        self.input_range = (a, b)

    # -- subclass surface ---------------------------------------------------

    def _density(self, x, y):
        raise NotImplementedError

    def _cdf(self, x, y):
        raise NotImplementedError

    def _sample(self, x, rng, size):
        raise NotImplementedError

    def output_range(self):
        """Interval containing essentially all output mass for any valid input."""
        raise NotImplementedError

    # -- public operations --------------------------------------------------

    def _check_domain(self, x):
        a, b = self.input_range
        x = np.asarray(x, dtype=float)
        if np.any(x < a - 1e-12) or np.any(x > b + 1e-12):
            raise ChannelDomainError(
                f"input symbol outside channel range [{a}, {b}]")
        return x

    def conditional_density(self, x, y):
        """f(y | x), broadcasting over x and y."""
        x = self._check_domain(x)
        y = np.asarray(y, dtype=float)
        out = self._density(x, y)
        if np.isscalar(out) or out.ndim == 0:
            return float(out)
        return out

    def log_density(self, x, y):
        """log f(y | x); -inf where the density vanishes."""
        x = self._check_domain(x)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(self._density(x, y))

    def conditional_cdf(self, x, y):
        """F(y | x), broadcasting over x and y."""
        x = self._check_domain(x)
        y = np.asarray(y, dtype=float)
        out = self._cdf(x, y)
        if np.isscalar(out) or out.ndim == 0:
            return float(out)
        return out

    def sample(self, x, rng, size=None):
        """Draw from F(. | x).  Identical RNG state gives identical draws."""
        x = self._check_domain(x)
        if size is None and np.ndim(x) > 0:
            size = np.shape(x)
        return self._sample(x, rng, size)

    def density_matrix(self, symbols, grid):
        """Matrix D[i, j] = f(grid[j] | symbols[i])."""
        symbols = self._check_domain(np.atleast_1d(symbols))
        grid = np.asarray(grid, dtype=float)
        return self._density(symbols[:, None], grid[None, :])

    def quadrature_grid(self, num=2048):
        """Uniform grid covering the channel's effective output range."""
        if num < 2:
            raise ChannelConfigError("quadrature grid needs at least 2 points")
        lo, hi = self.output_range()
        return np.linspace(lo, hi, num)

    def xi_delta(self, delta, grid=None, x_points=256):
        """Channel continuity modulus: worst-case L1 distance between the
        conditional densities of inputs at most ``delta`` apart.

        The supremum over x is approximated on a uniform grid of ``x_points``
        inputs and the integral on ``grid`` (midpoint rule).
        """
        a, b = self.input_range
        if delta < 0:
            raise ChannelConfigError("delta must be non-negative")
        if delta > (b - a) + 1e-12:
            raise ChannelConfigError("delta exceeds the input range width")
        if delta == 0:
            return 0.0
        if grid is None:
            grid = self.quadrature_grid()
        grid = np.asarray(grid, dtype=float)
        if grid.size == 0:
            raise ChannelConfigError("empty quadrature grid")
        step = grid[1] - grid[0]
        xs = np.linspace(a, b, x_points)
        best = 0.0
        for shifted in (np.clip(xs + delta, a, b), np.clip(xs - delta, a, b)):
            d0 = self.density_matrix(xs, grid)
            d1 = self.density_matrix(shifted, grid)
            l1 = np.abs(d0 - d1).sum(axis=1) * step
            best = max(best, float(l1.max()))
        return best

    def discretize(self, symbols, alpha, origin=None):
        """Quantized-output channel matrix Pi(i, j) = P(Q_alpha(Y) = j | x = symbols[i]).

        Interior bins have width ``alpha``; the two end bins absorb the tails.
        By default bin boundaries sit at ``symbols[0] - alpha/2 + j*alpha`` so
        that, when ``alpha`` equals the symbol spacing, boundaries fall halfway
        between consecutive symbols.
        """
        symbols = np.atleast_1d(np.asarray(symbols, dtype=float))
        m = symbols.size
        if m < 2:
            raise ChannelConfigError("need at least 2 input symbols")
        if alpha <= 0:
            raise ChannelConfigError("alpha must be positive")
        if origin is None:
            origin = symbols[0] - alpha / 2.0
        edges = origin + alpha * np.arange(1, m)
        cdf = self._cdf(self._check_domain(symbols)[:, None], edges[None, :])
        full = np.empty((m, m))
        full[:, 0] = cdf[:, 0]
        full[:, 1:-1] = np.diff(cdf, axis=1)
        full[:, -1] = 1.0 - cdf[:, -1]
        np.clip(full, 0.0, 1.0, out=full)
        return ChannelMatrix(entries=full, alpha=float(alpha), origin=float(origin))


@dataclass(frozen=True)
class ChannelMatrix:
    """Row-stochastic M x M matrix of quantized-output probabilities."""

    entries: np.ndarray
    alpha: float
    origin: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ChannelConfigError("channel matrix must be square")
        object.__setattr__(self, "entries", e)

    @property
    def size(self):
        return self.entries.shape[0]

    def condition_number(self):
        return float(np.linalg.cond(self.entries))


class AdditiveGaussianChannel(ChannelModel):
    """Y = x + N(0, sigma^2)."""

    def __init__(self, sigma, input_range=(0.0, 1.0)):
        super().__init__(input_range)
        if sigma <= 0:
            raise ChannelConfigError("sigma must be positive")
        self.sigma = float(sigma)

    def _density(self, x, y):
        return _norm_pdf((y - x) / self.sigma) / self.sigma

    def _cdf(self, x, y):
        return _norm_cdf((y - x) / self.sigma)

    def _sample(self, x, rng, size):
        return x + self.sigma * rng.standard_normal(size)

    def output_range(self):
        a, b = self.input_range
        return (a - 6.0 * self.sigma, b + 6.0 * self.sigma)

    def __repr__(self):
        return f"AdditiveGaussianChannel(sigma={self.sigma}, range={self.input_range})"


class MultiplicativeGaussianChannel(ChannelModel):
    """Y = x * N(mean, sigma^2).

    The effective multiplier of x is floored at SCALE_FLOOR so the conditional
    law stays absolutely continuous at x = 0.
    """

    def __init__(self, mean, sigma, input_range=(0.0, 1.0)):
        super().__init__(input_range)
        if sigma <= 0:
            raise ChannelConfigError("sigma must be positive")
        self.mean = float(mean)
        self.sigma = float(sigma)

    def _scale(self, x):
        return np.maximum(np.abs(x), SCALE_FLOOR)

    def _density(self, x, y):
        s = self._scale(x)
        return _norm_pdf((y / s - self.mean) / self.sigma) / (self.sigma * s)

    def _cdf(self, x, y):
        s = self._scale(x)
        return _norm_cdf((y / s - self.mean) / self.sigma)

    def _sample(self, x, rng, size):
        return self._scale(x) * (self.mean + self.sigma * rng.standard_normal(size))

    def output_range(self):
        a, b = self.input_range
        corners = [s * (self.mean + sgn * 6 * self.sigma)
                   for s in (self._scale(a), self._scale(b), a, b)
                   for sgn in (-1.0, 1.0)]
        return (min(min(corners), 0.0), max(max(corners), SCALE_FLOOR))

    def __repr__(self):
        return (f"MultiplicativeGaussianChannel(mean={self.mean}, "
                f"sigma={self.sigma}, range={self.input_range})")


class InputScaledRayleighChannel(ChannelModel):
    """Rayleigh output with parameter B(x) = max(x * slope, SCALE_FLOOR).

    f(y | x) = (y / B^2) exp(-y^2 / (2 B^2)) for y >= 0.
    """

    def __init__(self, scale_slope, input_range=(0.0, 1.0)):
        super().__init__(input_range)
        if scale_slope <= 0:
            raise ChannelConfigError("scale slope must be positive")
        self.scale_slope = float(scale_slope)

    def _b(self, x):
        return np.maximum(x * self.scale_slope, SCALE_FLOOR)

    def _density(self, x, y):
        b2 = self._b(x) ** 2
        out = np.where(y >= 0, (y / b2) * np.exp(-np.square(y) / (2.0 * b2)), 0.0)
        return np.maximum(out, 0.0)

    def _cdf(self, x, y):
        b2 = self._b(x) ** 2
        return np.where(y >= 0, 1.0 - np.exp(-np.square(y) / (2.0 * b2)), 0.0)

    def _sample(self, x, rng, size):
        u = rng.random(size)
        return self._b(x) * np.sqrt(-2.0 * np.log1p(-u))

    def output_range(self):
        a, b = self.input_range
        b_max = max(self._b(a), self._b(b))
        return (0.0, 6.5 * float(b_max))

    def __repr__(self):
        return (f"InputScaledRayleighChannel(slope={self.scale_slope}, "
                f"range={self.input_range})")


class TabulatedChannel(ChannelModel):
    """Custom channel given by conditional density values on an observation grid.

    Density values are interpolated linearly along the observation axis and
    across tabulated input symbols; each row is renormalized at construction.
    """

    def __init__(self, input_symbols, obs_grid, densities, input_range=None):
        symbols = np.asarray(input_symbols, dtype=float)
        grid = np.asarray(obs_grid, dtype=float)
        dens = np.asarray(densities, dtype=float)
        if symbols.ndim != 1 or grid.ndim != 1 or dens.shape != (symbols.size, grid.size):
            raise ChannelConfigError("density table shape mismatch")
        if symbols.size < 1 or grid.size < 2:
            raise ChannelConfigError("need at least one symbol and two grid points")
        if np.any(np.diff(symbols) <= 0) or np.any(np.diff(grid) <= 0):
            raise ChannelConfigError("symbols and observation grid must be increasing")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ChannelConfigError("density values must be finite and non-negative")
        mass = np.trapezoid(dens, grid, axis=1)
        if np.any(mass <= 0):
            raise ChannelConfigError("every density row needs positive mass")
        dens = dens / mass[:, None]
        if input_range is None:
            input_range = (symbols[0], symbols[-1]) if symbols.size > 1 else \
                (symbols[0] - 0.5, symbols[0] + 0.5)
        super().__init__(input_range)
        self.symbols = symbols
        self.obs_grid = grid
        self.table = dens
        # per-row CDF on the observation grid, for sampling and discretization
        widths = np.diff(grid)
        seg = 0.5 * (dens[:, 1:] + dens[:, :-1]) * widths
        cdf = np.concatenate([np.zeros((symbols.size, 1)), np.cumsum(seg, axis=1)], axis=1)
        self._cdf_table = cdf / cdf[:, -1:]

    def _row_values(self, x, table):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.symbols, x) - 1, 0, max(self.symbols.size - 2, 0))
        if self.symbols.size == 1:
            return np.broadcast_to(table[0], x.shape + (table.shape[1],)).copy()
        x0 = self.symbols[idx]
        x1 = self.symbols[idx + 1]
        w = np.clip((x - x0) / (x1 - x0), 0.0, 1.0)
        return (1.0 - w)[..., None] * table[idx] + w[..., None] * table[idx + 1]

    def _interp_obs(self, rows, y):
        y = np.asarray(y, dtype=float)
        flat_rows = rows.reshape(-1, self.obs_grid.size)
        flat_y = np.broadcast_to(y, rows.shape[:-1]).reshape(-1)
        out = np.empty(flat_y.shape)
        for i in range(flat_y.size):
            out[i] = np.interp(flat_y[i], self.obs_grid, flat_rows[i],
                               left=0.0, right=0.0)
        return out.reshape(rows.shape[:-1])

    def _density(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xb, yb = np.broadcast_arrays(x, y)
        rows = self._row_values(xb, self.table)
        return self._interp_obs(rows, yb)

    def _cdf(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xb, yb = np.broadcast_arrays(x, y)
        rows = self._row_values(xb, self._cdf_table)
        flat_rows = rows.reshape(-1, self.obs_grid.size)
        flat_y = yb.reshape(-1)
        out = np.empty(flat_y.shape)
        for i in range(flat_y.size):
            out[i] = np.interp(flat_y[i], self.obs_grid, flat_rows[i],
                               left=0.0, right=1.0)
        return out.reshape(xb.shape)

    def _sample(self, x, rng, size):
        x = np.asarray(x, dtype=float)
        u = rng.random(size if size is not None else x.shape)
        xb, ub = np.broadcast_arrays(x, u)
        rows = self._row_values(xb, self._cdf_table).reshape(-1, self.obs_grid.size)
        flat_u = ub.reshape(-1)
        out = np.empty(flat_u.shape)
        for i in range(flat_u.size):
            out[i] = np.interp(flat_u[i], rows[i], self.obs_grid)
        return out.reshape(xb.shape)

    def output_range(self):
        return (float(self.obs_grid[0]), float(self.obs_grid[-1]))


def load_tabulated_channel(path, input_range=None):
    """Load a custom channel from CSV.

    Format: header row ``x, y_1, ..., y_N`` giving the observation grid, then
    one row per input symbol: the symbol value followed by density values.
    """
    raw = np.genfromtxt(path, delimiter=",", dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2 or raw.shape[1] < 3:
        raise ChannelConfigError(f"malformed channel table in {path}")
    obs_grid = raw[0, 1:]
    symbols = raw[1:, 0]
    densities = raw[1:, 1:]
    return TabulatedChannel(symbols, obs_grid, densities, input_range=input_range)


def parse_channel_spec(spec, input_range=None):
    """Build a channel from a ``name:key=val,key=val`` string.

    Names: ``awgn`` (sigma), ``multiplicative`` (mean, sigma), ``rayleigh``
    (slope), ``table`` (path).  An optional ``range=a:b`` key sets the clean
    input range; an ``input_range`` argument overrides it.
    """
    if not isinstance(spec, str) or not spec:
        raise ChannelConfigError("empty channel spec")
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, sep, val = item.partition("=")
            if not sep or not key:
                raise ChannelConfigError(f"malformed channel parameter {item!r}")
            params[key.strip()] = val.strip()
    if input_range is None and "range" in params:
        lo, sep, hi = params.pop("range").partition(":")
        if not sep:
            raise ChannelConfigError("range must look like a:b")
        input_range = (float(lo), float(hi))
    elif "range" in params:
        params.pop("range")
    kwargs = {"input_range": input_range} if input_range is not None else {}

    def done(channel):
        if params:
            raise ChannelConfigError(
                f"unknown channel parameter(s) for {name!r}: "
                f"{', '.join(sorted(params))}")
        return channel

    try:
        if name == "awgn":
            sigma = float(params.pop("sigma"))
            return done(AdditiveGaussianChannel(sigma=sigma, **kwargs))
        if name == "multiplicative":
            mean = float(params.pop("mean", 1.0))
            sigma = float(params.pop("sigma"))
            return done(MultiplicativeGaussianChannel(mean=mean, sigma=sigma,
                                                      **kwargs))
        if name == "rayleigh":
            slope = float(params.pop("slope"))
            return done(InputScaledRayleighChannel(scale_slope=slope, **kwargs))
        if name == "table":
            path = params.pop("path")
            return done(load_tabulated_channel(path, input_range=input_range))
    except KeyError as exc:
        raise ChannelConfigError(
            f"channel {name!r} is missing parameter {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ChannelConfigError(f"bad channel parameter: {exc}") from None
    raise ChannelConfigError(
        f"unknown channel {name!r}; choose awgn, multiplicative, rayleigh or table")
