"""Contractive compression operators, the noisy channel, and bit accounting.

Every operator Q satisfies the contraction property
E||x - Q(x)/r||^2 <= (1 - delta)^2 ||x||^2 for its own delta; the channel
adds zero-mean Gaussian noise with total energy sigma_xi^2 on top of the
compressed payload.  Bit counts are accounting only, payloads stay float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError

IDENTITY = "identity"
QSGD = "qsgd"
TOP_K = "top_k"
RAND_K = "rand_k"

PER_VECTOR = "per_vector"
PER_COORDINATE = "per_coordinate"


@dataclass(frozen=True)
class CompressorSpec:
    """Compressor kind plus its parameters.

    s is the number of quantization levels (qsgd), k the number of kept
    coordinates (top_k / rand_k).  r is the dynamic-scaling parameter; all
    stock compressors use r = 1.
    """

    kind: str
    s: int | None = None
    k: int | None = None
    r: float = 1.0

    def __post_init__(self):
        if self.kind not in (IDENTITY, QSGD, TOP_K, RAND_K):
            raise InvalidConfigError(f"unknown compressor kind {self.kind!r}")
        if self.kind == QSGD and (self.s is None or self.s < 1):
            raise InvalidConfigError("qsgd needs s >= 1 levels")
        if self.kind in (TOP_K, RAND_K) and (self.k is None or self.k < 1):
            raise InvalidConfigError(f"{self.kind} needs k >= 1")
        if self.r <= 0:
            raise InvalidConfigError("scaling parameter r must be positive")

    def delta(self, d: int) -> float:
        """Contraction factor for messages of dimension d."""
        if self.kind == IDENTITY:
            return 1.0
        if self.kind == QSGD:
            return 1.0 / (2.0 * qsgd_tau(d, self.s))
        if self.k > d:
            raise InvalidConfigError(f"k={self.k} exceeds dimension {d}")
        return self.k / d


@dataclass(frozen=True)
class ChannelSpec:
    """Additive zero-mean Gaussian channel noise.

    per_vector:     per-coordinate std sigma_xi/sqrt(d), so E||W||^2 = sigma_xi^2
    per_coordinate: per-coordinate std sigma_xi
    """

    sigma_xi: float = 0.0
    mode: str = PER_VECTOR

    def __post_init__(self):
        if self.sigma_xi < 0:
            raise InvalidConfigError("sigma_xi must be >= 0")
        if self.mode not in (PER_VECTOR, PER_COORDINATE):
            raise InvalidConfigError(f"unknown channel mode {self.mode!r}")


@dataclass(frozen=True)
class Message:
    """Decoded payload of one transmission plus its exact bit cost."""

    payload: np.ndarray
    bits: int


def qsgd_tau(d: int, s: int) -> float:
    return 1.0 + min(d / s**2, math.sqrt(d) / s)


def qsgd(x: np.ndarray, s: int, rng: np.random.Generator) -> np.ndarray:
    """Randomized quantization with uniform dithering.

    Output is (||x|| / (s tau)) * sign(x) * floor(s |x| / ||x|| + u) with
    u ~ U[0,1)^d.  The zero vector is returned unchanged (the scheme is
    undefined at ||x|| = 0 and zero is the contraction-consistent choice).
    """
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return np.zeros_like(x)
    tau = qsgd_tau(x.size, s)
    levels = np.floor(s * np.abs(x) / norm + rng.random(x.size))
    return (norm / (s * tau)) * np.sign(x) * levels


def top_k(x: np.ndarray, k: int) -> np.ndarray:
    """Keep the k largest-magnitude coordinates, ties broken by lowest index."""
    x = np.asarray(x, dtype=float)
    d = x.size
    if not (1 <= k <= d):
        raise InvalidConfigError(f"top_k needs 1 <= k <= {d}, got {k}")
    if k == d:
        return x.copy()
    # stable sort on -|x| keeps the lowest index first among ties
    order = np.argsort(-np.abs(x), kind="stable")[:k]
    out = np.zeros_like(x)
    out[order] = x[order]
    if __debug__:
        err = x - out
        assert err @ err <= (1.0 - k / d) * (x @ x) * (1.0 + 1e-12) + 1e-300
    return out


def rand_k(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Keep a uniformly random k-subset of coordinates."""
    x = np.asarray(x, dtype=float)
    d = x.size
    if not (1 <= k <= d):
        raise InvalidConfigError(f"rand_k needs 1 <= k <= {d}, got {k}")
    keep = rng.choice(d, size=k, replace=False)
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def compress(x: np.ndarray, spec: CompressorSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply the compressor Q-hat of `spec` (no channel noise)."""
    if spec.kind == IDENTITY:
        return np.asarray(x, dtype=float).copy()
    if spec.kind == QSGD:
        return qsgd(x, spec.s, rng)
    if spec.kind == TOP_K:
        return top_k(x, spec.k)
    return rand_k(x, spec.k, rng)


def bits_per_message(spec: CompressorSpec, d: int) -> int:
    """Exact transmitted bits for one d-dimensional message.

    qsgd: d (log2 s + 1) + 32 (sign+level string plus the float32 norm);
    top_k / rand_k: 64 k (float32 value + int32 index per kept coordinate);
    identity: 32 d (float32 per coordinate, the uncompressed convention).
    """
    if spec.kind == QSGD:
        return int(math.ceil(d * (math.log2(spec.s) + 1.0) + 32.0))
    if spec.kind in (TOP_K, RAND_K):
        return 64 * spec.k
    return 32 * d


def transmit(x: np.ndarray, comp: CompressorSpec, chan: ChannelSpec,
             rng: np.random.Generator,
             noise_rng: np.random.Generator | None = None) -> Message:
    """Compress x and push it through the noisy channel.

    Passing a dedicated noise_rng keeps the channel noise independent of
    the compressor's randomness; with sigma_xi = 0 no noise is drawn at all.
    """
    x = np.asarray(x, dtype=float)
    payload = compress(x, comp, rng)
    if chan.sigma_xi > 0.0:
        d = x.size
        std = chan.sigma_xi / math.sqrt(d) if chan.mode == PER_VECTOR else chan.sigma_xi
        source = rng if noise_rng is None else noise_rng
        payload = payload + std * source.standard_normal(d)
    return Message(payload=payload, bits=bits_per_message(comp, x.size))


@dataclass(frozen=True)
class ContractionEstimate:
    """Empirical worst-case ratio E||x - Q(x)/r||^2 / ||x||^2."""

    ratio: float
    stderr: float
    trials: int


def contraction_estimate(comp: CompressorSpec, d: int, trials: int,
                         rng: np.random.Generator) -> ContractionEstimate:
    """Measure the contraction ratio over Gaussian and constant-vector inputs.

    The reported ratio is the worse of the two input families' means; the
    constant vector is the adversarial input for sparsifiers (it attains
    1 - k/d exactly).
    """
    if trials < 100:
        raise InvalidConfigError(f"need >= 100 trials, got {trials}")
    families = {
        "gaussian": lambda: rng.standard_normal(d),
        "constant": lambda: np.ones(d),
    }
    worst = (0.0, 0.0)
    for draw in families.values():
        ratios = np.empty(trials)
        for t in range(trials):
            x = draw()
            err = x - compress(x, comp, rng) / comp.r
            ratios[t] = (err @ err) / (x @ x)
        mean = float(ratios.mean())
        if mean >= worst[0]:
            worst = (mean, float(ratios.std(ddof=1) / math.sqrt(trials)))
    return ContractionEstimate(ratio=worst[0], stderr=worst[1], trials=trials)
