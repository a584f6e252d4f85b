"""Bayes-response denoisers: symbol-by-symbol (two-pass) and the 2k+1
sliding-window extension, plus genie benchmarks against which they compete.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelModel
from .density import Kernel, context_kde, kde, silverman_bandwidth, super_symbols
from .inversion import (InversionError, LpSolution, QuantizedPmf, SupportGrid,
                        invert_channel, quantize_support)


class DenoiseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# loss functions


class LossFunction:
    """Per-symbol loss on [a, b]^2 with known bound and Lipschitz norm."""

    def __init__(self, kind, a, b, table=None, symbols=None):
        self.kind = kind
        self.a, self.b = float(a), float(b)
        span = self.b - self.a
        if kind == "squared":
            self.lambda_max = span ** 2
            self.lipschitz = 2.0 * span
        elif kind == "absolute":
            self.lambda_max = span
            self.lipschitz = 1.0
        elif kind == "table":
            if table is None or symbols is None:
                raise DenoiseError("custom loss needs a table and its symbols")
            self._table = np.asarray(table, dtype=float)
            self._symbols = np.asarray(symbols, dtype=float)
            if self._table.shape != (self._symbols.size, self._symbols.size):
                raise DenoiseError("loss table must be square over the symbols")
            if np.any(self._table < 0):
                raise DenoiseError("loss values must be non-negative")
            self.lambda_max = float(self._table.max())
            diffs = np.abs(np.diff(self._table, axis=0))
            gaps = np.diff(self._symbols)[:, None]
            self.lipschitz = float((diffs / gaps).max()) if diffs.size else 0.0
        else:
            raise DenoiseError(f"unknown loss kind {kind!r}")

    @classmethod
    def squared(cls, a, b):
        return cls("squared", a, b)

    @classmethod
    def absolute(cls, a, b):
        return cls("absolute", a, b)

    @classmethod
    def from_table(cls, symbols, table):
        symbols = np.asarray(symbols, dtype=float)
        return cls("table", symbols[0], symbols[-1], table=table, symbols=symbols)

    def __call__(self, x, xhat):
        x = np.asarray(x, dtype=float)
        xhat = np.asarray(xhat, dtype=float)
        if self.kind == "squared":
            return np.square(x - xhat)
        if self.kind == "absolute":
            return np.abs(x - xhat)
        ix = np.searchsorted(self._symbols, x)
        jx = np.searchsorted(self._symbols, xhat)
        return self._table[np.clip(ix, 0, self._symbols.size - 1),
                           np.clip(jx, 0, self._symbols.size - 1)]

    def matrix(self, values, candidates):
        """Loss matrix L[i, j] = loss(values[i], candidates[j])."""
        values = np.asarray(values, dtype=float)
        candidates = np.asarray(candidates, dtype=float)
        return self(values[:, None], candidates[None, :])


def cumulative_loss(x, xhat, loss):
    """Normalized cumulative loss (1/n) sum loss(x_i, xhat_i)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    xhat = np.asarray(xhat, dtype=float).reshape(-1)
    if x.size != xhat.size:
        raise DenoiseError("sequence length mismatch")
    if x.size == 0:
        raise DenoiseError("empty sequences")
    return float(np.mean(loss(x, xhat)))


# ---------------------------------------------------------------------------
# Bayes envelope and response


@dataclass(frozen=True)
class TuplePmf:
    """Mass tensor over (2k+1)-tuples of a SupportGrid's symbols."""

    grid: SupportGrid
    masses: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        if any(s != self.grid.size for s in masses.shape):
            raise DenoiseError("tuple pmf shape does not match the support grid")
        object.__setattr__(self, "masses", masses)

    @property
    def order(self):
        return (self.masses.ndim - 1) // 2

    def center_marginal(self):
        k = self.order
        axes = tuple(i for i in range(self.masses.ndim) if i != k)
        marg = self.masses.sum(axis=axes)
        return QuantizedPmf(grid=self.grid, masses=np.maximum(marg, 0.0),
                            delta=self.delta,
                            normalized=bool(abs(marg.sum() - 1.0) < 1e-9))


def bayes_envelope(pmf, loss, candidates=None):
    """min over candidate reconstructions of the expected loss under ``pmf``.

    Masses need not sum to 1.  Ties break toward the smallest candidate.
    """
    symbols = pmf.grid.symbols
    if candidates is None:
        candidates = symbols
    candidates = np.sort(np.asarray(candidates, dtype=float).reshape(-1))
    costs = pmf.masses @ loss.matrix(symbols, candidates)
    return float(costs.min())


@dataclass(frozen=True)
class DenoiserRule:
    """Realized Bayes response g_opt[P] for a fixed prior, channel and loss.

    For order 0 the rule maps a real observation to a reconstruction symbol;
    for order k >= 1 it maps a (2k+1)-tuple of observations (the prior is then
    a TuplePmf and the posterior is marginalized to the center coordinate).
    ``candidates`` defaults to the prior's support symbols.
    """

    pmf: QuantizedPmf | TuplePmf
    channel: ChannelModel
    loss: LossFunction
    order: int = 0
    candidates: np.ndarray | None = None

    def _candidates(self):
        if self.candidates is not None:
            return np.sort(np.asarray(self.candidates, dtype=float).reshape(-1))
        return self.pmf.grid.symbols

    def __call__(self, y):
        out, _ = self.apply(np.atleast_2d(y) if self.order else np.atleast_1d(y))
        return float(out[0]) if np.ndim(y) <= (1 if self.order else 0) else out

    def apply(self, y):
        """Vectorized responses.  Returns (reconstructions, degenerate_mask);
        degenerate positions (zero likelihood under every symbol) get the
        prior's modal symbol."""
        if self.order == 0:
            return self._apply_0(np.asarray(y, dtype=float).reshape(-1))
        return self._apply_k(np.asarray(y, dtype=float))

    def _apply_0(self, y):
        symbols = self.pmf.grid.symbols
        cands = self._candidates()
        dens = self.channel.density_matrix(symbols, y)  # (S, B)
        w = dens * self.pmf.masses[:, None]
        col_tot = w.sum(axis=0)
        degenerate = col_tot <= 0.0
        if np.any(degenerate):
            # retry in log space for positions that underflowed
            bad = np.nonzero(degenerate)[0]
            logd = self.channel.log_density(symbols[:, None], y[bad][None, :])
            with np.errstate(divide="ignore"):
                logw = logd + np.log(self.pmf.masses)[:, None]
            peak = logw.max(axis=0)
            ok = np.isfinite(peak)
            w[:, bad[ok]] = np.exp(logw[:, ok] - peak[ok][None, :])
            col_tot = w.sum(axis=0)
            degenerate = col_tot <= 0.0
        costs = w.T @ self.loss.matrix(symbols, cands)  # (B, C)
        pick = cands[np.argmin(costs, axis=1)]
        if np.any(degenerate):
            pick = np.where(degenerate, self.pmf.mode_symbol(), pick)
        return pick, degenerate

    def _apply_k(self, windows):
        if windows.ndim == 1:
            windows = windows[None, :]
        k = self.order
        w = 2 * k + 1
        if windows.shape[1] != w:
            raise DenoiseError(f"expected {w}-tuples for an order-{k} rule")
        symbols = self.pmf.grid.symbols
        cands = self._candidates()
        S = symbols.size
        B = windows.shape[0]
        dens = [self.channel.density_matrix(symbols, windows[:, t]).T  # (B, S)
                for t in range(w)]
        post = _center_posterior(self.pmf.masses, dens, k)
        col_tot = post.sum(axis=1)
        degenerate = col_tot <= 0.0
        costs = post @ self.loss.matrix(symbols, cands)
        pick = cands[np.argmin(costs, axis=1)]
        if np.any(degenerate):
            marginal = self.pmf.center_marginal()
            pick = np.where(degenerate, marginal.mode_symbol(), pick)
        return pick, degenerate


def _center_posterior(P, dens, k):
    """Batch posterior over the center symbol.

    P has shape (S,)*(2k+1); dens is a list of (B, S) per-window-slot density
    matrices.  Returns (B, S): sum over tuples with fixed center, weighted by
    the product of slot densities.
    """
    w = 2 * k + 1
    letters = "cdefghij"[:w]
    spec = ",".join("b" + letters[t] for t in range(w)) + "," + letters \
        + "->b" + letters[k]
    return np.einsum(spec, *dens, P, optimize=True)


def bayes_response(rule, y):
    """Functional wrapper around DenoiserRule.apply for a single observation
    or context tuple."""
    out, _ = rule.apply(y)
    return float(out[0]) if out.size == 1 else out


# ---------------------------------------------------------------------------
# subsequence partitioning


@dataclass(frozen=True)
class SubsequencePlan:
    """1-based window-center indices of the 2k+1 jumping subsequences."""

    n: int
    k: int
    centers: tuple  # tuple of int arrays, one per subsequence

    def all_centers(self):
        return np.sort(np.concatenate(self.centers)) if self.centers else np.array([], int)


def partition_subsequences(n, k):
    """Subsequence i in 1..2k+1 owns centers {i+k, i+k+(2k+1), ...} inside
    [k+1, n-k] (1-based).  Windows within a subsequence are disjoint and the
    union over subsequences covers every valid center exactly once."""
    w = 2 * k + 1
    if n < w:
        raise DenoiseError(f"need n >= 2k+1 = {w}, got n = {n}")
    centers = []
    for i in range(1, w + 1):
        centers.append(np.arange(i + k, n - k + 1, w, dtype=int))
    return SubsequencePlan(n=n, k=k, centers=tuple(centers))


# ---------------------------------------------------------------------------
# two-pass pipelines


@dataclass
class Diagnostics:
    bandwidth: float = 0.0
    lp_objective: float = 0.0
    lp_iterations: int = 0
    pmf: object = None
    degenerate_positions: int = 0
    per_subsequence: list = field(default_factory=list)


def _resolve_bandwidth(samples, policy, dimension, support_range):
    if policy is None or policy == "silverman" or policy == "auto":
        return silverman_bandwidth(samples, dimension, support_range)
    if isinstance(policy, str) and policy.startswith("n^"):
        exponent = float(policy[2:])
        return float(np.asarray(samples).shape[0] ** exponent)
    return float(policy)


def denoise_symbolwise(y, channel, loss, Delta, delta, *, bandwidth="silverman",
                       kernel=None, grid_points=512, candidates=None,
                       solver="auto", smooth_model="auto"):
    """Two-pass symbol-by-symbol denoiser.

    First pass: kernel density estimate of the noisy marginal, L1 channel
    inversion onto the Delta-quantized clean support, level quantization with
    delta.  Second pass: Bayes response at every position.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise DenoiseError("empty input sequence")
    a, b = channel.input_range
    grid = SupportGrid(a=a, b=b, Delta=Delta)
    kernel = kernel or Kernel("gaussian", 1)
    diagnostics = Diagnostics()
    if y.size == 1:
        # no statistics to estimate; fall back to a uniform prior
        masses = np.full(grid.size, 1.0 / grid.size)
        pmf = QuantizedPmf(grid=grid, masses=masses, delta=0.0, normalized=True)
        rule = DenoiserRule(pmf=pmf, channel=channel, loss=loss,
                            candidates=candidates)
        out, degen = rule.apply(y)
        diagnostics.pmf = pmf
        diagnostics.degenerate_positions = int(degen.sum())
        return out, diagnostics
    h = _resolve_bandwidth(y, bandwidth, 1, channel.input_range)
    f_hat = kde(y, kernel=kernel, h=h, num_points=grid_points)
    sol = invert_channel(f_hat, channel, grid, delta, solver=solver,
                         smooth_model=smooth_model)
    rule = DenoiserRule(pmf=sol.pmf, channel=channel, loss=loss,
                        candidates=candidates)
    out, degen = rule.apply(y)
    diagnostics.bandwidth = h
    diagnostics.lp_objective = sol.objective
    diagnostics.lp_iterations = sol.iterations
    diagnostics.pmf = sol.pmf
    diagnostics.degenerate_positions = int(degen.sum())
    return out, diagnostics


def denoise_sliding(y, channel, loss, k, Delta, delta, *,
                    bandwidth="silverman", kernel=None, grid_points=48,
                    candidates=None, context_shape="1d-window",
                    image_shape=None, alphabet_cap=100_000, lp_rows=4096,
                    threads=1, solver="auto", smooth_model="auto",
                    symbolwise_kwargs=None):
    """2k+1 sliding-window denoiser.

    Each of the 2k+1 jumping subsequences gets its own context density
    estimate, k-th order channel inversion over the tuple alphabet, and Bayes
    response with center marginalization.  Border positions without a full
    context fall back to the symbol-by-symbol rule.
    """
    if k < 1:
        raise DenoiseError("sliding-window order k must be >= 1")
    y = np.asarray(y, dtype=float)
    if context_shape == "2d-neighborhood":
        return _denoise_sliding_2d(y, channel, loss, k, Delta, delta,
                                   bandwidth=bandwidth, kernel=kernel,
                                   candidates=candidates,
                                   image_shape=image_shape,
                                   alphabet_cap=alphabet_cap,
                                   symbolwise_kwargs=symbolwise_kwargs)
    y = y.reshape(-1)
    n = y.size
    w = 2 * k + 1
    if n < w:
        raise DenoiseError(f"need n >= {w}")
    a, b = channel.input_range
    grid = SupportGrid(a=a, b=b, Delta=Delta)
    if grid.size ** w > alphabet_cap:
        raise DenoiseError(
            f"tuple alphabet size {grid.size ** w} exceeds cap {alphabet_cap}; "
            f"use a coarser Delta")
    kernel = kernel or Kernel("gaussian", w)
    sw = symbolwise_kwargs or {}
    base, base_diag = denoise_symbolwise(y, channel, loss, Delta, delta,
                                         bandwidth=bandwidth,
                                         candidates=candidates, solver=solver,
                                         smooth_model=smooth_model, **sw)
    xhat = np.array(base, dtype=float)
    plan = partition_subsequences(n, k)
    diagnostics = Diagnostics(bandwidth=base_diag.bandwidth,
                              pmf=base_diag.pmf,
                              lp_objective=base_diag.lp_objective)

    def handle(args):
        i, centers = args
        if centers.size == 0:
            return centers, None, None
        supers = super_symbols(y, k, subsequence=i)
        h = _resolve_bandwidth(supers, bandwidth, w, channel.input_range)
        fk = kde(supers, kernel=Kernel(kernel.kind, w), h=h,
                 num_points=grid_points)
        sol = invert_channel(fk, channel, grid, delta, solver=solver,
                             smooth_model=smooth_model, max_rows=lp_rows,
                             alphabet_cap=alphabet_cap)
        rule = DenoiserRule(pmf=sol.pmf, channel=channel, loss=loss,
                            order=k, candidates=candidates)
        windows = np.stack([y[c - 1 - k:c + k] for c in centers])
        rec, degen = rule.apply(windows)
        return centers, rec, (sol, int(degen.sum()))

    jobs = [(i + 1, c) for i, c in enumerate(plan.centers)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(handle, jobs))
    else:
        results = [handle(j) for j in jobs]
    for centers, rec, info in results:
        if rec is None:
            continue
        xhat[centers - 1] = rec
        sol, degens = info
        diagnostics.per_subsequence.append(sol.sidecar())
        diagnostics.degenerate_positions += degens
    return xhat, diagnostics


def _context_offsets_2d(k):
    """2D neighborhood offsets for order k: the Manhattan ball of radius k
    (a cross for k = 1), sorted row-major, center included."""
    return sorted((dr, dc) for dr in range(-k, k + 1)
                  for dc in range(-k, k + 1) if abs(dr) + abs(dc) <= k)


def _denoise_sliding_2d(y, channel, loss, k, Delta, delta, *, bandwidth,
                        kernel, candidates, image_shape, alphabet_cap,
                        symbolwise_kwargs, offsets=None):
    """Image contexts.  When the tuple alphabet exceeds the cap the prior is
    approximated by a product of the symbol-by-symbol marginal, which is
    a heuristic outside the pipeline's guarantees, noted in diagnostics."""
    if image_shape is None:
        if y.ndim != 2:
            raise DenoiseError("2d-neighborhood needs image dimensions")
        image = y
    else:
        image = y.reshape(image_shape)
    rows, cols = image.shape
    flat = image.reshape(-1)
    a, b = channel.input_range
    grid = SupportGrid(a=a, b=b, Delta=Delta)
    offsets = offsets or _context_offsets_2d(k)
    w = len(offsets)
    center_idx = offsets.index((0, 0))
    sw = symbolwise_kwargs or {}
    base, base_diag = denoise_symbolwise(flat, channel, loss, Delta, delta,
                                         candidates=candidates,
                                         bandwidth=bandwidth, **sw)
    xhat = base.reshape(rows, cols).copy()
    diagnostics = Diagnostics(bandwidth=base_diag.bandwidth, pmf=base_diag.pmf,
                              lp_objective=base_diag.lp_objective)

    n_states = grid.size ** w
    if n_states > alphabet_cap:
        # Product-prior approximation: with an independent prior over the
        # neighborhood the center posterior ignores the neighbors, so the
        # rule collapses to the symbol-by-symbol one already applied.
        diagnostics.per_subsequence.append({"product_prior": True})
        diagnostics.degenerate_positions = base_diag.degenerate_positions
        return xhat.reshape(image.shape), diagnostics
    else:
        # joint prior over contexts from windowed density estimation over
        # disjoint tilings (one subsequence per residue class)
        supers = _image_windows(image, offsets, stride=2 * k + 1)
        h = _resolve_bandwidth(supers, bandwidth, w, channel.input_range)
        fk = kde(supers, kernel=Kernel((kernel or Kernel("gaussian", w)).kind, w),
                 h=h, num_points=16)
        sol = invert_channel(fk, channel, grid, delta,
                             alphabet_cap=alphabet_cap)
        pmf = sol.pmf
        diagnostics.per_subsequence.append(sol.sidecar())

    interior = _image_windows(image, offsets, stride=1)
    rec, degen = _apply_tuple_rule(pmf, channel, loss, interior, center_idx,
                                   candidates)
    rr = np.arange(k, rows - k)
    cc = np.arange(k, cols - k)
    xhat[np.ix_(rr, cc)] = rec.reshape(rr.size, cc.size)
    diagnostics.degenerate_positions = int(degen.sum())
    return xhat.reshape(image.shape), diagnostics


def _image_windows(image, offsets, stride=1):
    rows, cols = image.shape
    radius = max(max(abs(dr), abs(dc)) for dr, dc in offsets)
    rr = np.arange(radius, rows - radius, stride)
    cc = np.arange(radius, cols - radius, stride)
    R, C = np.meshgrid(rr, cc, indexing="ij")
    out = np.empty((R.size, len(offsets)))
    for t, (dr, dc) in enumerate(offsets):
        out[:, t] = image[R + dr, C + dc].reshape(-1)
    return out


def _apply_tuple_rule(pmf, channel, loss, windows, center_idx, candidates):
    symbols = pmf.grid.symbols
    cands = np.sort(np.asarray(candidates, dtype=float).reshape(-1)) \
        if candidates is not None else symbols
    w = windows.shape[1]
    dens = [channel.density_matrix(symbols, windows[:, t]).T for t in range(w)]
    letters = "cdefghijk"[:w]
    spec = ",".join("b" + letters[t] for t in range(w)) + "," + letters \
        + "->b" + letters[center_idx]
    post = np.einsum(spec, *dens, pmf.masses, optimize=True)
    degen = post.sum(axis=1) <= 0.0
    costs = post @ loss.matrix(symbols, cands)
    pick = cands[np.argmin(costs, axis=1)]
    if np.any(degen):
        axes = tuple(t for t in range(pmf.masses.ndim) if t != center_idx)
        marg = pmf.masses.sum(axis=axes)
        pick = np.where(degen, symbols[int(np.argmax(marg))], pick)
    return pick, degen


# ---------------------------------------------------------------------------
# genie benchmarks


def genie_d0(x, channel, loss, grid, quad_points=2048, candidates=None):
    """Symbol-by-symbol genie benchmark D_0(x^n) by output quadrature.

    The genie applies the Bayes response to the exact clean empirical
    distribution; the expected loss is integrated on the channel's quadrature
    grid with the reconstruction restricted to the support grid's symbols
    (or an explicit candidate set).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    channel._check_domain(x)
    values, counts = np.unique(x, return_counts=True)
    weights = counts / x.size
    ygrid = channel.quadrature_grid(quad_points)
    step = ygrid[1] - ygrid[0]
    dens = channel.density_matrix(values, ygrid)  # (V, Y)
    wdens = weights[:, None] * dens
    cands = np.sort(np.asarray(candidates, dtype=float).reshape(-1)) \
        if candidates is not None else grid.symbols
    costs = loss.matrix(values, cands).T @ wdens  # (C, Y)
    return float(costs.min(axis=0).sum() * step)


def genie_dk(x, channel, loss, k, grid, budget=20_000, seed=0,
             candidates=None, subsequence=None):
    """k-th order sliding-window genie benchmark, by Monte Carlo.

    Builds the exact k-th order empirical distribution of the clean windows
    (optionally of one jumping subsequence), applies its Bayes response to
    freshly sampled channel outputs, and averages the loss at the window
    centers.  Returns (estimate, std_error).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if k == 0:
        return genie_d0(x, channel, loss, grid, candidates=candidates), 0.0
    w = 2 * k + 1
    if x.size < w:
        raise DenoiseError(f"need n >= {w}")
    windows = super_symbols(x, k, subsequence)
    uniq, counts = np.unique(windows, axis=0, return_counts=True)
    probs = counts / counts.sum()
    rng = np.random.default_rng(seed)
    pick = rng.choice(uniq.shape[0], size=budget, p=probs)
    clean = uniq[pick]
    noisy = channel.sample(clean, rng)
    cands = np.sort(np.asarray(candidates, dtype=float).reshape(-1)) \
        if candidates is not None else grid.symbols
    # like[u, b] = P(window u) * prod_t f(noisy[b, t] | uniq[u, t])
    like = np.broadcast_to(probs[:, None], (uniq.shape[0], budget)).copy()
    for t in range(w):
        like *= channel.conditional_density(uniq[:, t][:, None],
                                            noisy[:, t][None, :])
    costs = loss.matrix(uniq[:, k], cands).T @ like  # (C, B)
    rec = cands[np.argmin(costs, axis=0)]
    degenerate = like.sum(axis=0) <= 0.0
    if np.any(degenerate):
        # zero likelihood everywhere: fall back to the modal clean window
        rec = np.where(degenerate, uniq[np.argmax(probs), k], rec)
    losses = loss(clean[:, k], rec)
    est = float(losses.mean())
    err = float(losses.std(ddof=1) / math.sqrt(budget))
    return est, err
