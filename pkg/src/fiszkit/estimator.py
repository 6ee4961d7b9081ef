"""Wavelet denoising with thresholds tied to the local mean of the data.

Each detail coefficient at the coarse levels j < max_level is compared
against its own threshold sqrt(h(local mean)) * sqrt(2 log N), where N is
the number of coefficients at those levels and h is either a known
closed-form mean-to-variance map or the step estimate fitted by
:mod:`fiszkit.varfn`. Finer levels are zeroed outright; the smooth
coefficient always passes through. Translation invariance comes from
cycle spinning over circular shifts.

A running-MAD comparator shares the same pipeline but derives thresholds
from a robust per-level scale estimate of the coefficients themselves,
ignoring any mean-variance link.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log, sqrt
from typing import Callable, Optional, Union

import numpy as np

from .signals import as_signal
from .varfn import VarFnConfig, VarianceEstimate, estimate_variance_function
from .wavelet import (CoeffPyramid, WaveletBasis, dwt_forward, dwt_inverse, haar,
                      local_means)

__all__ = [
    "EstimatorConfig",
    "EstimateResult",
    "n_threshold_coeffs",
    "universal_factor",
    "soft_threshold",
    "hard_threshold",
    "thresholds_known_h",
    "thresholds_data_driven",
    "apply_threshold",
    "estimate",
    "baseline_mad_estimate",
]

MAD_TO_SIGMA = 1.4826  # normal-consistency constant for the MAD


def n_threshold_coeffs(max_level: int) -> int:
    """Number of detail coefficients at levels 0 .. max_level-1."""
    if max_level < 1:
        raise ValueError(f"max_level must be >= 1, got {max_level}")
    return (1 << max_level) - 1


def universal_factor(max_level: int) -> float:
    """sqrt(2 log N) for N coefficients under consideration."""
    return sqrt(2.0 * log(n_threshold_coeffs(max_level)))


def soft_threshold(y, lam):
    return np.sign(y) * np.maximum(np.abs(y) - lam, 0.0)


def hard_threshold(y, lam):
    return np.where(np.abs(y) >= lam, y, 0.0)


_RULES = {"soft": soft_threshold, "hard": hard_threshold}


@dataclass
class EstimatorConfig:
    """Configuration of the denoiser.

    ``max_level`` of None resolves to J-2 at run time (floored at 1).
    ``known_variance``, when given, is a vectorised mean-to-variance map
    used directly in the thresholds; otherwise the map is estimated from
    the data once (on the unshifted signal) with ``varfn``.
    ``shift_stride`` divides the cycle-spinning budget: only the first
    n/shift_stride circular shifts are averaged.
    """

    max_level: Optional[int] = None
    rule: str = "hard"
    translation_invariant: bool = True
    shift_stride: int = 1
    basis: WaveletBasis = field(default_factory=haar)
    known_variance: Optional[Callable[[np.ndarray], np.ndarray]] = None
    varfn: VarFnConfig = field(default_factory=lambda: VarFnConfig(half_window=1))

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ValueError(f"rule must be 'soft' or 'hard', got {self.rule!r}")
        if self.shift_stride < 1:
            raise ValueError("shift_stride must be >= 1")

    def resolve_max_level(self, n_levels: int) -> int:
        ml = self.max_level if self.max_level is not None else max(1, n_levels - 2)
        if not 1 <= ml <= n_levels:
            raise ValueError(f"max_level must be in [1, {n_levels}], got {ml}")
        return ml


@dataclass
class EstimateResult:
    """Denoised signal plus the thresholding evidence of the unshifted pass."""

    values: np.ndarray
    thresholds: list[np.ndarray]
    survivors: list[np.ndarray]
    variance_fn: Union[VarianceEstimate, Callable, None]
    shifts_averaged: int


def thresholds_known_h(lm: list[np.ndarray], h: Callable, max_level: int) -> list[np.ndarray]:
    """Per-coefficient thresholds sqrt(h(local mean)) * sqrt(2 log N)."""
    factor = universal_factor(max_level)
    out = []
    for j in range(max_level):
        hv = np.asarray(h(lm[j]), dtype=float)
        if np.any(hv < 0):
            raise ValueError(f"variance map returned negative values at level {j}")
        out.append(np.sqrt(hv) * factor)
    return out


def thresholds_data_driven(lm: list[np.ndarray], hhat: VarianceEstimate,
                           max_level: int) -> list[np.ndarray]:
    """Same as :func:`thresholds_known_h` with the fitted step function."""
    factor = universal_factor(max_level)
    return [np.sqrt(hhat.query(lm[j])) * factor for j in range(max_level)]


def apply_threshold(p: CoeffPyramid, thresholds: list[np.ndarray], rule: str,
                    max_level: int) -> CoeffPyramid:
    """Threshold levels below ``max_level``, zero the rest, keep the smooth."""
    shrink = _RULES[rule]
    if max_level > p.n_levels:
        raise ValueError(f"max_level {max_level} exceeds pyramid depth {p.n_levels}")
    if len(thresholds) < max_level:
        raise ValueError(f"need thresholds for {max_level} levels, got {len(thresholds)}")
    details = []
    for j, d in enumerate(p.details):
        if j >= max_level:
            details.append(np.zeros_like(d))
            continue
        lam = np.asarray(thresholds[j], dtype=float)
        if lam.shape != d.shape:
            raise ValueError(f"threshold level {j} has shape {lam.shape}, expected {d.shape}")
        if np.any(lam < 0):
            raise ValueError(f"negative threshold at level {j}")
        details.append(shrink(d, lam))
    return CoeffPyramid(details, p.smooth)


def _survivor_mask(p: CoeffPyramid, thresholds, rule, max_level) -> list[np.ndarray]:
    masks = []
    for j in range(max_level):
        if rule == "hard":
            masks.append(np.abs(p.details[j]) >= thresholds[j])
        else:
            masks.append(np.abs(p.details[j]) > thresholds[j])
    return masks


def _shift_list(n: int, cfg: EstimatorConfig) -> range:
    # Thinning keeps the first n/stride consecutive shifts: consecutive
    # shifts cover every alignment of the fine levels, where the averaging
    # matters; strided shifts would leave those levels aligned identically
    # in every pass.
    if not cfg.translation_invariant:
        return range(1)
    return range(max(1, n // cfg.shift_stride))


def _denoise_shifts(x, cfg, threshold_fn):
    """Shared cycle-spinning loop; ``threshold_fn(pyramid, shifted_x)`` builds thresholds."""
    x = as_signal(x)
    n = x.size
    max_level = cfg.resolve_max_level(n.bit_length() - 1)
    shifts = _shift_list(n, cfg)
    acc = np.zeros(n)
    first_thr = first_surv = None
    for s in shifts:
        xs = np.roll(x, s) if s else x
        p = dwt_forward(xs, cfg.basis)
        thr = threshold_fn(p, xs)
        q = apply_threshold(p, thr, cfg.rule, max_level)
        y = dwt_inverse(q, cfg.basis)
        acc += np.roll(y, -s) if s else y
        if s == 0:
            first_thr = thr
            first_surv = _survivor_mask(p, thr, cfg.rule, max_level)
    return acc / len(shifts), first_thr, first_surv, len(shifts), max_level


def estimate(x, cfg: EstimatorConfig | None = None) -> EstimateResult:
    """Denoise ``x``; thresholds from a known or data-estimated variance map.

    The variance map, when estimated, is fitted once on the unshifted data
    and reused across all shifts.
    """
    cfg = cfg or EstimatorConfig()
    x = as_signal(x)
    max_level = cfg.resolve_max_level(x.size.bit_length() - 1)
    if cfg.known_variance is not None:
        h_used = cfg.known_variance

        def threshold_fn(_p, xs):
            return thresholds_known_h(local_means(xs, cfg.basis), h_used, max_level)
    else:
        h_used = estimate_variance_function(x, cfg.varfn)

        def threshold_fn(_p, xs):
            return thresholds_data_driven(local_means(xs, cfg.basis), h_used, max_level)

    values, thr, surv, n_shifts, _ = _denoise_shifts(x, cfg, threshold_fn)
    return EstimateResult(values, thr, surv, h_used, n_shifts)


def _running_mad(values: np.ndarray, window: int) -> np.ndarray:
    """Median absolute deviation over a periodic window around each entry."""
    m = values.size
    w = min(window, m)
    offsets = np.arange(w) - w // 2
    stack = np.stack([np.roll(values, -o) for o in offsets])
    med = np.median(stack, axis=0)
    return np.median(np.abs(stack - med), axis=0)


def _mad_window(j: int) -> int:
    return (1 << max(0, j - 4)) + 1


def baseline_mad_estimate(x, cfg: EstimatorConfig | None = None) -> np.ndarray:
    """Comparator: same pipeline, thresholds from a running MAD per level.

    The scale of each coefficient is estimated robustly from its level
    neighbours (window grows with level), times sqrt(2 log N); no use is
    made of the mean-variance link.
    """
    cfg = cfg or EstimatorConfig()
    x = as_signal(x)
    max_level = cfg.resolve_max_level(x.size.bit_length() - 1)
    factor = universal_factor(max_level)

    def threshold_fn(p, _xs):
        return [MAD_TO_SIGMA * _running_mad(p.details[j], _mad_window(j)) * factor
                for j in range(max_level)]

    values, _, _, _, _ = _denoise_shifts(x, cfg, threshold_fn)
    return values
