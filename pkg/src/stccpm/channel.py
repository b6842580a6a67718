"""Frequency-flat Rayleigh block fading with complex AWGN.

Fading coefficients are i.i.d. circularly-symmetric complex Gaussian with
unit mean-square magnitude and stay constant over one code block.  White
noise of one-sided density N0 is discretised to a per-sample complex
variance of N0/dt (N0/(2*dt) per real dimension), which keeps matched-filter
SNR independent of the oversampling factor.

Receive rows are drawn row-major (antenna index outermost) so that adding a
receive antenna extends, rather than reshuffles, the draw sequence; paired
seeds then give genuinely paired 2x1 / 2x2 comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coding import SignalBlock


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading draw: alpha is Lr x Lt, N0 the noise density."""

    alpha: np.ndarray
    N0: float
    seed: Optional[int] = None


def draw_fading(lr: int, lt: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. CN(0, 1) fading matrix of shape (lr, lt)."""
    z = rng.standard_normal((lr, lt, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def draw_fading_blocks(
    lr: int, lt: int, shape, rng: np.random.Generator
) -> np.ndarray:
    """Independent CN(0,1) draws of shape (*shape, lr, lt), receive-row major."""
    shape = tuple(shape)
    z = rng.standard_normal((lr, *shape, lt, 2))
    a = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
    return np.moveaxis(a, 0, -2)


def noise_sigma(n0: float, dt: float) -> float:
    """Per-real-dimension standard deviation of one complex sample."""
    return float(np.sqrt(n0 / (2.0 * dt)))


def apply_channel(block: SignalBlock, ch: ChannelRealization, rng: np.random.Generator):
    """Received closed-grid streams y = alpha s + n, shape (lr, lt*os+1)."""
    s = block.closed()
    lr = ch.alpha.shape[0]
    y = ch.alpha @ s
    if ch.N0 > 0:
        sig = noise_sigma(ch.N0, block.dt)
        z = rng.standard_normal((lr, s.shape[1], 2))
        y = y + sig * (z[..., 0] + 1j * z[..., 1])
    return y


def apply_channel_stream(
    stream: np.ndarray,
    alpha: np.ndarray,
    n0: float,
    dt: float,
    lt: int,
    oversampling: int,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Block-fade whole streams into per-block received grids.

    ``stream`` is (B, lt, n_slots*os+1), ``alpha`` is (B, n_blocks, lr, lt).
    Returns (B, n_blocks, lr, lt*os+1).  Noise is sliced from one continuous
    stream per receive antenna, so the sample shared by adjacent block grids
    carries the same noise value.
    """
    B, _, n_samp = stream.shape
    blk = lt * oversampling
    n_blocks = (n_samp - 1) // blk
    lr = alpha.shape[2]
    idx = np.arange(blk + 1)[None, :] + blk * np.arange(n_blocks)[:, None]
    s_blocks = stream[:, :, idx]  # (B, lt, n_blocks, K)
    y = np.einsum("bjnm,bjmk->bjnk", alpha, np.moveaxis(s_blocks, 1, 2))
    if n0 > 0:
        if noise is None:
            z = rng.standard_normal((lr, B, n_samp, 2))
            noise = np.moveaxis((z[..., 0] + 1j * z[..., 1]), 0, 1)
        y = y + noise_sigma(n0, dt) * noise[:, :, idx].transpose(0, 2, 1, 3)
    return y


def ebn0_db_to_n0(ebn0_db: float, es: float, bits_per_symbol: int) -> float:
    """Noise density for a quoted Eb/N0, with Eb = Es / log2(M)."""
    eb = es / bits_per_symbol
    return eb / (10.0 ** (ebn0_db / 10.0))
