"""Noisy communication links.

A channel applies a random transformation to each transmitted vector:

* ``exact``  - identity (noise-free baseline).
* ``awgn``   - additive Gaussian noise with fading gain h.  The receiver
  divides by its gain estimate, so the simulator works directly with the
  corrected estimate x + g/h, g ~ N(0, sigma_c^2) i.i.d. per coordinate.
* ``quant``  - probabilistic quantization to the 1/delta_p grid: each
  coordinate rounds down or up with probabilities proportional to its
  distance from the two grid neighbors, which is unbiased with per-scalar
  variance at most 1/(4 delta_p^2).

All variants have conditionally zero-mean noise with bounded variance.
``variance_bound`` is the per-coordinate bound; analysis-level formulas use
the per-vector total, see ``vector_variance_bound``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import substream

CHANNEL_KINDS = ("exact", "awgn", "quant")


@dataclass(frozen=True)
class ChannelModel:
    kind: str
    sigma_c: float = 0.0
    h: float = 1.0
    delta_p: int = 1
    seed: int = 0
    tag: str = "chan"

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "awgn":
            if self.sigma_c < 0:
                raise ValueError("awgn channel requires sigma_c >= 0")
            if self.h == 0:
                raise ValueError("awgn channel requires fading gain h != 0")
        if self.kind == "quant" and self.delta_p < 1:
            raise ValueError("quant channel requires integer grid density delta_p >= 1")

    def stream(self, k: int, *extra: int) -> np.random.Generator:
        """Substream for iteration k (plus optional sub-round); independent
        of all other iterations."""
        return substream(self.seed, self.tag, k, *extra)


def exact(seed: int = 0, tag: str = "chan") -> ChannelModel:
    return ChannelModel("exact", seed=seed, tag=tag)


def awgn(sigma_c: float, h: float = 1.0, seed: int = 0, tag: str = "chan") -> ChannelModel:
    return ChannelModel("awgn", sigma_c=sigma_c, h=h, seed=seed, tag=tag)


def prob_quant(delta_p: int, seed: int = 0, tag: str = "chan") -> ChannelModel:
    return ChannelModel("quant", delta_p=int(delta_p), seed=seed, tag=tag)


@dataclass(frozen=True)
class TransmitLog:
    """Realized per-sender noise for one iteration (rows are senders)."""

    k: int
    noise: np.ndarray  # (n, d), row i = received_i - sent_i


def transmit(channel: ChannelModel, x: np.ndarray, rng: np.random.Generator):
    """Send ``x`` through the channel; returns (received, noise).

    ``noise = received - x`` is what the receiver actually sees minus the
    truth; senders never observe it.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("transmit requires finite input")
    if channel.kind == "exact":
        return x.copy(), np.zeros_like(x)
    if channel.kind == "awgn":
        g = rng.normal(0.0, channel.sigma_c, size=x.shape)
        noise = g / channel.h
        return x + noise, noise
    u = rng.random(size=x.shape)
    received = _kernels.prob_quantize(x, channel.delta_p, u)
    return received, received - x


def transmit_block(channel: ChannelModel, X: np.ndarray, k: int, *extra: int):
    """Broadcast transmission of all rows of X at iteration k.

    One noise realization per sender per iteration (every neighbor of sender
    i receives the same corrupted copy), drawn from the iteration-k
    substream.  Returns (received, noise) with shape (n, d).
    """
    return transmit(channel, X, channel.stream(k, *extra))


def variance_bound(channel: ChannelModel) -> float:
    """Per-coordinate noise variance bound: 0, sigma_c^2/h^2, or 1/(4 delta_p^2)."""
    if channel.kind == "exact":
        return 0.0
    if channel.kind == "awgn":
        return channel.sigma_c**2 / channel.h**2
    return 1.0 / (4.0 * channel.delta_p**2)


def vector_variance_bound(channel: ChannelModel, d: int) -> float:
    """Bound on E||noise||^2 for a d-dimensional transmission.

    Analysis-level formulas treat the noise variance per transmitted vector;
    with independent per-coordinate noise this is d times the scalar bound.
    """
    return d * variance_bound(channel)


def empirical_moments(channel: ChannelModel, x: np.ndarray, trials: int, rng: np.random.Generator):
    """Sample mean and per-coordinate variance of the realized noise.

    Statistical validator for the zero-mean / bounded-variance contract.
    """
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials for stable moments, got {trials}")
    x = np.asarray(x, dtype=np.float64)
    tiled = np.broadcast_to(x, (trials,) + x.shape)
    _, noise = transmit(channel, tiled, rng)
    mean_error = noise.mean(axis=0)
    per_coord_variance = noise.var(axis=0, ddof=1)
    return mean_error, per_coord_variance
