"""Bridge to the discrete universal denoiser (DUDE).

When the channel outputs are uniformly quantized to M levels and the density
estimate is a histogram whose bins align with the quantizer, the two-pass
pipeline collapses to a purely count-based discrete rule: bin frequencies
replace the density estimate and the inverse channel matrix replaces the L1
program.  This module implements both routes and checks that they produce the
same reconstruction symbol for symbol.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channels import ChannelMatrix
from .denoise import partition_subsequences
from .density import DensityEstimate, histogram_estimate, super_symbols

_COND_LIMIT = 1e12


class BridgeError(ValueError):
    pass


@dataclass(frozen=True)
class CountStatistics:
    """Occurrence counts of (2k+1)-tuples of quantized output levels."""

    M: int
    k: int
    counts: np.ndarray  # shape (M,) * (2k+1), non-negative integers
    total: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        w = 2 * self.k + 1
        if counts.shape != (self.M,) * w:
            raise BridgeError("count tensor shape does not match (M,)*(2k+1)")
        if np.any(counts < 0):
            raise BridgeError("counts must be non-negative")
        if int(counts.sum()) != self.total:
            raise BridgeError("count total mismatch")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    def frequencies(self):
        if self.total == 0:
            raise BridgeError("no counts collected")
        return self.counts / self.total


def quantize_outputs(y, alpha, M, origin=0.0):
    """Map real observations to levels 0..M-1.

    Boundaries sit at origin + j*alpha for j = 1..M-1; interior bins have
    width alpha and the two end bins absorb the tails.  A value exactly on a
    boundary goes to the upper bin.
    """
    if M < 2:
        raise BridgeError("need at least 2 quantization levels")
    if alpha <= 0:
        raise BridgeError("quantization step must be positive")
    y = np.asarray(y, dtype=float)
    levels = np.floor((y - origin) / alpha).astype(int)
    return np.clip(levels, 0, M - 1)


def count_statistics(levels, M, k, subsequence=None):
    """Tuple counts of a level sequence; ``subsequence`` (1-based) restricts
    to one jumping subsequence's windows."""
    levels = np.asarray(levels, dtype=int).reshape(-1)
    if np.any((levels < 0) | (levels >= M)):
        raise BridgeError("levels out of range")
    w = 2 * k + 1
    if k == 0:
        windows = levels[:, None]
    else:
        windows = super_symbols(levels, k, subsequence).astype(int)
    counts = np.zeros((M,) * w, dtype=np.int64)
    np.add.at(counts, tuple(windows.T), 1)
    return CountStatistics(M=M, k=k, counts=counts, total=windows.shape[0])


def histogram_pmf(density, alpha, M, origin=0.0):
    """Integrate a histogram density estimate over the quantizer's bins.

    The histogram's bin width must be an integer fraction of ``alpha`` and its
    bin edges must align with the quantizer boundaries; then the returned pmf
    equals the level-tuple frequencies exactly (sums of count ratios).
    """
    if not isinstance(density, DensityEstimate):
        raise BridgeError("expected a DensityEstimate")
    if density.kernel is not None:
        raise BridgeError("histogram_pmf needs a histogram estimate, not a KDE")
    levels_per_axis = []
    for ax in density.axes:
        ratio = alpha / ax.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise BridgeError(
                f"histogram bin width {ax.step} is not an integer fraction "
                f"of the quantization step {alpha}")
        # left edge of the first histogram bin must sit on a boundary lattice
        edge = ax.origin - 0.5 * ax.step
        offset = (edge - origin) / ax.step
        if abs(offset - round(offset)) > 1e-9:
            raise BridgeError("histogram bins are not aligned with the "
                              "quantization boundaries")
        centers = ax.points()
        levels_per_axis.append(quantize_outputs(centers, alpha, M, origin))
    w = density.dimension
    pmf = np.zeros((M,) * w)
    mesh = np.meshgrid(*levels_per_axis, indexing="ij")
    idx = tuple(m.reshape(-1) for m in mesh)
    np.add.at(pmf, idx, density.values.reshape(-1) * density.cell_volume)
    return pmf


def count_inversion(counts, matrix):
    """Recover the clean tuple distribution from level-tuple frequencies.

    Applies the inverse of the discretized channel matrix along every tuple
    coordinate (the tuple channel is a Kronecker power, so the M x M inverse
    suffices).  The result may have negative entries: it is the unconstrained
    minimizer, not a projected pmf.
    """
    if isinstance(matrix, ChannelMatrix):
        Pi = matrix.entries
    else:
        Pi = np.asarray(matrix, dtype=float)
    if Pi.shape[0] != Pi.shape[1]:
        raise BridgeError("channel matrix must be square")
    cond = float(np.linalg.cond(Pi))
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise BridgeError(f"channel matrix is numerically singular "
                          f"(condition number {cond:.3e})")
    if isinstance(counts, CountStatistics):
        r = counts.frequencies()
    else:
        r = np.asarray(counts, dtype=float)
    Pinv = np.linalg.inv(Pi)
    q = r
    for axis in range(r.ndim):
        q = np.moveaxis(np.tensordot(q, Pinv, axes=([axis], [0])), -1, axis)
    return q


@dataclass
class EquivalenceReport:
    match: bool
    positions_checked: int
    first_mismatch: int | None
    condition_number: float

    def to_json(self):
        return json.dumps({
            "match": self.match,
            "positions-checked": self.positions_checked,
            "first-mismatch": self.first_mismatch,
            "condition-number": self.condition_number,
        }, indent=2)


def _discrete_rule(q, Pi, loss_matrix):
    """cost[z, c] = sum_u loss(u, c) * q[u] * Pi[u, z]; argmin per level,
    ties toward the smallest candidate (argmin picks the first index and
    candidates are sorted ascending)."""
    W = q[:, None] * Pi  # (M, M): symbol x level
    costs = W.T @ loss_matrix  # (levels, candidates)
    return np.argmin(costs, axis=1)


def _tuple_rule(q, Pi, loss_matrix, windows, k):
    """Center-marginalized argmin over candidate indices for level windows."""
    w = 2 * k + 1
    letters = "cdefghij"[:w]
    dens = [Pi[:, windows[:, t]].T for t in range(w)]  # (B, M) each
    spec = ",".join("b" + letters[t] for t in range(w)) + "," + letters \
        + "->b" + letters[k]
    post = np.einsum(spec, *dens, q, optimize=True)
    costs = post @ loss_matrix
    return np.argmin(costs, axis=1)


def equivalence_check(y, channel, loss, k, M, alpha, origin=None,
                      candidates=None):
    """Compare the histogram-pipeline rule with the count-based rule.

    Route (a) follows the pipeline shape: histogram density estimate with bin
    width alpha, integration to a level pmf, inversion through the channel
    matrix, Bayes response.  Route (b) counts quantized levels directly and
    inverts the same matrix.  With aligned bins both arithmetics coincide and
    the reconstructions must agree at every position.
    """
    if k not in (0, 1):
        raise BridgeError("equivalence check supports k in {0, 1}")
    y = np.asarray(y, dtype=float).reshape(-1)
    a, b = channel.input_range
    symbols = np.linspace(a, b, M)
    if origin is None:
        origin = symbols[0] - 0.5 * alpha
    matrix = channel.discretize(symbols, alpha, origin=origin)
    Pi = matrix.entries
    cond = float(np.linalg.cond(Pi))
    if y.size == 0:
        return EquivalenceReport(match=True, positions_checked=0,
                                 first_mismatch=None, condition_number=cond)
    cands = np.sort(np.asarray(candidates, dtype=float).reshape(-1)) \
        if candidates is not None else symbols
    lmat = loss.matrix(symbols, cands)
    levels = quantize_outputs(y, alpha, M, origin)
    n = y.size
    w = 2 * k + 1

    # order-0 rules cover everything for k=0 and the borders for k=1
    hist0 = histogram_estimate(y, h=alpha, anchor=origin)
    pmf_a0 = histogram_pmf(hist0, alpha, M, origin)
    stats0 = count_statistics(levels, M, 0)
    q_a0 = count_inversion(pmf_a0, matrix)
    q_b0 = count_inversion(stats0, matrix)
    rec_a = cands[_discrete_rule(q_a0, Pi, lmat)][levels]
    rec_b = cands[_discrete_rule(q_b0, Pi, lmat)][levels]

    if k == 1 and n >= w:
        plan = partition_subsequences(n, k)
        win_levels = np.lib.stride_tricks.sliding_window_view(levels, w)
        for i, centers in enumerate(plan.centers, start=1):
            if centers.size == 0:
                continue
            ss = super_symbols(y, k, subsequence=i)
            hist = histogram_estimate(ss, h=alpha, anchor=origin)
            pmf_a = histogram_pmf(hist, alpha, M, origin)
            stats = count_statistics(levels, M, k, subsequence=i)
            q_a = count_inversion(pmf_a, matrix)
            q_b = count_inversion(stats, matrix)
            windows = win_levels[centers - 1 - k]
            rec_a[centers - 1] = cands[_tuple_rule(q_a, Pi, lmat, windows, k)]
            rec_b[centers - 1] = cands[_tuple_rule(q_b, Pi, lmat, windows, k)]

    mismatches = np.nonzero(rec_a != rec_b)[0]
    return EquivalenceReport(
        match=mismatches.size == 0,
        positions_checked=int(n),
        first_mismatch=int(mismatches[0]) if mismatches.size else None,
        condition_number=cond,
    )
