"""Orthonormal discrete wavelet transform with periodic boundaries.

The transform decomposes a length-2^J signal fully, down to a single
smooth coefficient. Detail levels are indexed coarse-first: level j holds
2^j coefficients, j = 0 (coarsest) .. J-1 (finest). Periodisation keeps
the overall matrix exactly orthonormal at every depth, which is what the
round-trip and energy-preservation guarantees rely on.

Alongside the transform proper, :func:`local_means` computes, for every
detail coefficient, the uniform average of the data over the support of
that coefficient's wavelet vector. For Haar these are rescaled scaling
coefficients; for longer filters the supports are cyclic intervals found
once per (basis, length) and cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt

import numpy as np

from .signals import as_signal

__all__ = [
    "WaveletBasis",
    "haar",
    "daubechies",
    "CoeffPyramid",
    "dwt_forward",
    "dwt_inverse",
    "local_means",
    "cyclic_shift",
    "wavelet_vector",
]

_SQRT2 = sqrt(2.0)
_SUPPORTED_TAPS = (2, 4, 6, 8)


@lru_cache(maxsize=None)
def _daubechies_lowpass(taps: int) -> tuple[float, ...]:
    """Extremal-phase scaling filter via spectral factorisation.

    Computing the filter (rather than typing published decimals) keeps the
    coefficients accurate to machine precision, which the exact round-trip
    and energy-preservation guarantees depend on.
    """
    p = taps // 2
    if p == 1:
        return (1.0 / _SQRT2, 1.0 / _SQRT2)
    # q(z) = z^(p-1) * P((2 - z - 1/z)/4) with P(y) = sum_k C(p-1+k, k) y^k;
    # coefficient arrays are lowest-degree first.
    yz = np.array([-0.25, 0.5, -0.25])  # y*z as a polynomial in z
    q = np.zeros(2 * p - 1)
    for k in range(p):
        term = np.array([float(comb(p - 1 + k, k))])
        for _ in range(k):
            term = np.convolve(term, yz)
        q[p - 1 - k:p - 1 - k + term.size] += term
    roots = np.roots(q[::-1])
    h = np.array([1.0])
    for _ in range(p):
        h = np.convolve(h, [1.0, 1.0])  # (1 + z)^p
    for r in roots[np.abs(roots) < 1]:
        h = np.convolve(h, [-r, 1.0])  # minimum-phase factor
    h = np.real(h)
    h *= _SQRT2 / h.sum()
    if abs(h[0]) < abs(h[-1]):  # direct order: large taps first
        h = h[::-1]
    return tuple(float(v) for v in h)


@dataclass(frozen=True)
class WaveletBasis:
    """A compactly supported orthonormal wavelet filter pair."""

    name: str
    lowpass: tuple[float, ...]

    def __post_init__(self):
        g = np.asarray(self.lowpass)
        if g.size < 2 or g.size % 2:
            raise ValueError("filter length must be even and >= 2")
        if abs(np.sum(g**2) - 1.0) > 1e-10:
            raise ValueError(f"filter {self.name!r} is not normalised: sum of squares != 1")
        for s in range(1, g.size // 2 + 1):
            if abs(np.dot(g[: -2 * s], g[2 * s:])) > 1e-10:
                raise ValueError(f"filter {self.name!r} violates even-shift orthogonality")

    @property
    def length(self) -> int:
        return len(self.lowpass)

    def filter_pair(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (lowpass, highpass) as arrays; highpass is the alternating flip."""
        g = np.asarray(self.lowpass, dtype=float)
        h = g[::-1].copy()
        h[1::2] *= -1.0
        return g, h


def haar() -> WaveletBasis:
    """The two-tap basis; the package default."""
    return WaveletBasis("haar", _daubechies_lowpass(2))


def daubechies(taps: int) -> WaveletBasis:
    """Daubechies extremal-phase basis with the given tap count (2, 4, 6 or 8)."""
    if taps not in _SUPPORTED_TAPS:
        raise ValueError(f"unsupported tap count {taps}, choose from {list(_SUPPORTED_TAPS)}")
    return haar() if taps == 2 else WaveletBasis(f"daub{taps}", _daubechies_lowpass(taps))


def basis_by_name(name: str) -> WaveletBasis:
    if name == "haar":
        return haar()
    if name.startswith("daub"):
        return daubechies(int(name[4:]))
    raise ValueError(f"unknown wavelet basis {name!r}")


@dataclass
class CoeffPyramid:
    """Wavelet coefficients of a length-2^J signal.

    ``details[j]`` holds the 2^j detail coefficients of level j (coarse
    first); ``smooth`` is the single remaining scaling coefficient.
    """

    details: list[np.ndarray] = field(default_factory=list)
    smooth: float = 0.0

    def __post_init__(self):
        for j, d in enumerate(self.details):
            d = np.asarray(d, dtype=float)
            if d.shape != (1 << j,):
                raise ValueError(f"level {j} must hold {1 << j} coefficients, got shape {d.shape}")
            self.details[j] = d

    @property
    def n_levels(self) -> int:
        return len(self.details)

    @property
    def n(self) -> int:
        return 1 << self.n_levels

    def copy(self) -> "CoeffPyramid":
        return CoeffPyramid([d.copy() for d in self.details], self.smooth)

    def energy(self) -> float:
        return self.smooth**2 + sum(float(np.sum(d**2)) for d in self.details)

    def as_lines(self) -> list[str]:
        """Debug serialisation: one ``j k value`` line per coefficient."""
        lines = [f"-1 1 {self.smooth:.17g}"]
        for j, d in enumerate(self.details):
            lines.extend(f"{j} {k + 1} {v:.17g}" for k, v in enumerate(d))
        return lines

    @classmethod
    def from_lines(cls, lines) -> "CoeffPyramid":
        entries = {}
        smooth = None
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            j_s, k_s, v_s = line.split()
            j, k, v = int(j_s), int(k_s), float(v_s)
            if j == -1:
                smooth = v
            else:
                entries[(j, k)] = v
        if smooth is None:
            raise ValueError("missing smooth coefficient line (-1 1 value)")
        n_levels = 1 + max((j for j, _ in entries), default=-1)
        details = []
        for j in range(n_levels):
            d = np.empty(1 << j)
            for k in range(1 << j):
                try:
                    d[k] = entries[(j, k + 1)]
                except KeyError:
                    raise ValueError(f"missing coefficient ({j}, {k + 1})") from None
            details.append(d)
        return cls(details, smooth)


def _analysis_step(approx: np.ndarray, g: np.ndarray, h: np.ndarray):
    m = approx.size
    if g.size == 2:
        a, b = approx[0::2], approx[1::2]
        return (a + b) * g[0], a * h[0] + b * h[1]
    idx = (2 * np.arange(m // 2)[:, None] + np.arange(g.size)) % m
    win = approx[idx]
    return win @ g, win @ h


def _synthesis_step(approx: np.ndarray, detail: np.ndarray, g: np.ndarray, h: np.ndarray):
    m = 2 * approx.size
    if g.size == 2:
        out = np.empty(m)
        out[0::2] = (approx + detail) * g[0]
        out[1::2] = approx * g[1] + detail * h[1]
        return out
    idx = (2 * np.arange(approx.size)[:, None] + np.arange(g.size)) % m
    out = np.zeros(m)
    np.add.at(out, idx.ravel(), (approx[:, None] * g + detail[:, None] * h).ravel())
    return out


def dwt_forward(x, basis: WaveletBasis | None = None) -> CoeffPyramid:
    """Full orthonormal decomposition of ``x`` (periodic boundaries)."""
    x = as_signal(x)
    g, h = (basis or haar()).filter_pair()
    approx = x
    fine_first = []
    while approx.size > 1:
        approx, detail = _analysis_step(approx, g, h)
        fine_first.append(detail)
    return CoeffPyramid(fine_first[::-1], float(approx[0]))


def dwt_inverse(p: CoeffPyramid, basis: WaveletBasis | None = None) -> np.ndarray:
    """Invert :func:`dwt_forward`; exact transpose of the analysis cascade."""
    g, h = (basis or haar()).filter_pair()
    approx = np.array([p.smooth])
    for detail in p.details:
        if detail.size != approx.size:
            raise ValueError("malformed pyramid: level sizes must double")
        approx = _synthesis_step(approx, detail, g, h)
    return approx


def cyclic_shift(x, s: int) -> np.ndarray:
    """Rotate ``x`` periodically by ``s`` positions (s=1 sends x[-1] to the front)."""
    return np.roll(np.asarray(x, dtype=float), s)


def wavelet_vector(basis: WaveletBasis, n: int, j: int, k: int) -> np.ndarray:
    """The discrete basis vector of detail coefficient (j, k), k 1-based.

    ``j = -1`` returns the vector of the smooth coefficient.
    """
    J = n.bit_length() - 1
    details = [np.zeros(1 << lvl) for lvl in range(J)]
    smooth = 0.0
    if j == -1:
        smooth = 1.0
    else:
        details[j][k - 1] = 1.0
    return dwt_inverse(CoeffPyramid(details, smooth), basis)


def _min_cyclic_interval(indices: np.ndarray, n: int) -> tuple[int, int]:
    """Smallest cyclic interval [start, start+length) covering ``indices``."""
    m = indices.size
    if m == n:
        return 0, n
    gaps = np.diff(np.append(indices, indices[0] + n))
    widest = int(np.argmax(gaps))
    start = int(indices[(widest + 1) % m])
    length = n - int(gaps[widest]) + 1
    return start, length


@lru_cache(maxsize=None)
def _level_supports(basis: WaveletBasis, n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Per level: (start, length) of the support of the k=1 wavelet vector.

    Supports of the remaining coefficients at level j follow by rotating
    in steps of 2^(J-j), a consequence of the periodic decimated cascade.
    """
    J = n.bit_length() - 1
    starts, lengths = [], []
    for j in range(J):
        v = wavelet_vector(basis, n, j, 1)
        sup = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
        s, ln = _min_cyclic_interval(sup, n)
        starts.append(s)
        lengths.append(ln)
    return tuple(starts), tuple(lengths)


def local_means(x, basis: WaveletBasis | None = None) -> list[np.ndarray]:
    """Uniform-weight data averages over each detail coefficient's support.

    Returns one array per level, aligned with ``dwt_forward`` details. For
    Haar, entry (j, k) is the scaling coefficient at (j, k) divided by
    2^((J-j)/2).
    """
    x = as_signal(x)
    basis = basis or haar()
    n = x.size
    J = n.bit_length() - 1
    starts, lengths = _level_supports(basis, n)
    csum = np.concatenate([[0.0], np.cumsum(np.concatenate([x, x]))])
    means = []
    for j in range(J):
        step = n >> j
        s = (starts[j] + step * np.arange(1 << j)) % n
        means.append((csum[s + lengths[j]] - csum[s]) / lengths[j])
    return means
