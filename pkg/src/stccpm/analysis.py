"""Monte Carlo BER curves, diversity slopes, Welch PSDs, and phase sweeps.

Every harness output is a pure function of (config, seed): per-point child
generators are derived from the master seed with counter-based spawn keys,
and receive rows are drawn antenna-major so paired seeds stay paired when a
receive antenna is added.  Bits ride on the symbol levels through a
binary-reflected Gray map over the sorted alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sp_signal

from .cpm import CpmParams
from .coding import encode_streams, single_antenna_reference
from .channel import apply_channel_stream, draw_fading_blocks, ebn0_db_to_n0
from .receiver import DecoderConfig, Trellis, build_trellis, decode_batch

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


# ---------------------------------------------------------------------------
# bit mapping and counting
# ---------------------------------------------------------------------------


def gray_codes(M: int) -> np.ndarray:
    """Gray label of each alphabet index (index k maps to level 2k-M+1)."""
    k = np.arange(M)
    return k ^ (k >> 1)


def symbols_from_bits(bits: np.ndarray, M: int) -> np.ndarray:
    """Pack Gray-labelled bit groups (…, n*b) into alphabet levels (…, n)."""
    b = M.bit_length() - 1
    groups = bits.reshape(*bits.shape[:-1], -1, b)
    labels = np.zeros(groups.shape[:-1], dtype=np.int64)
    for j in range(b):
        labels = (labels << 1) | groups[..., j]
    # invert the Gray map: index k has label k ^ (k >> 1)
    inverse = np.zeros(M, dtype=np.int64)
    inverse[gray_codes(M)] = np.arange(M)
    idx = inverse[labels]
    return (2 * idx - M + 1).astype(float)


def bit_errors(tx_symbols: np.ndarray, rx_symbols: np.ndarray, M: int) -> int:
    """Hamming distance between the Gray labels of two symbol streams."""
    gray = gray_codes(M)
    ti = np.round((np.asarray(tx_symbols) + M - 1) / 2).astype(np.int64)
    ri = np.round((np.asarray(rx_symbols) + M - 1) / 2).astype(np.int64)
    return int(_POPCOUNT[gray[ti] ^ gray[ri]].sum())


def wilson_interval(errors: int, n: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


# ---------------------------------------------------------------------------
# BER harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BerPoint:
    ebn0_db: float
    errors: int
    bits: int
    ber: float
    ci_lo: float
    ci_hi: float


@dataclass
class BerCurve:
    points: list
    config: dict
    seed: int

    def ebn0(self) -> np.ndarray:
        return np.array([p.ebn0_db for p in self.points])

    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])


def _simulate_point(
    trellis: Trellis,
    lr: int,
    ebn0_db: float,
    seed: int,
    point_idx: int,
    min_errors: int,
    max_bits: int,
    decoder: DecoderConfig,
    streams: int,
    blocks_per_stream: int,
    theta0: Optional[np.ndarray] = None,
    fading_coherence_blocks: int = 1,
):
    params = trellis.params
    code = trellis.code
    lt = trellis.lt
    bps = params.bits_per_symbol
    n_sym = blocks_per_stream * lt
    n0 = ebn0_db_to_n0(ebn0_db, params.Es, bps)
    coh = fading_coherence_blocks
    n_draws = -(-blocks_per_stream // coh)

    errors = 0
    bits = 0
    batch = 0
    while errors < min_errors and bits < max_bits:
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(point_idx, batch))
        )
        raw = rng.integers(0, 2, size=(streams, n_sym * bps))
        d = symbols_from_bits(raw, params.M)
        stream = encode_streams(code, params, d)
        alpha = draw_fading_blocks(lr, lt, (streams, n_draws), rng)
        alpha = np.repeat(alpha, coh, axis=1)[:, :blocks_per_stream]
        y = apply_channel_stream(
            stream, alpha, n0, params.dt, lt, params.oversampling, rng=rng
        )
        est, _ = decode_batch(trellis, y, alpha, config=decoder, theta0=theta0)
        errors += bit_errors(d, est, params.M)
        bits += d.size * bps
        batch += 1
    return errors, bits


def run_ber(
    code,
    params: CpmParams,
    lr: int,
    ebn0_db: Sequence[float],
    seed: int = 0,
    min_errors: int = 100,
    max_bits: int = 2_000_000,
    decoder: DecoderConfig = DecoderConfig(),
    streams: int = 64,
    blocks_per_stream: int = 50,
    fading_coherence_blocks: int = 1,
) -> BerCurve:
    """Monte Carlo BER over a Rayleigh block-fading channel.

    Each Eb/N0 point accumulates batches until ``min_errors`` bit errors or
    ``max_bits`` simulated bits, whichever comes first.  Identical
    (config, seed) reproduce bit-identical results.

    ``fading_coherence_blocks`` holds the fading constant over runs of
    consecutive code blocks.  The default (1) is the block-fading contract;
    the single-antenna baseline needs a coherence longer than its error
    events to behave as a genuine no-diversity reference, since per-slot
    fading would hand partial-response CPM spurious time diversity.
    """
    trellis = build_trellis(code, params)
    points = []
    for i, snr in enumerate(ebn0_db):
        errors, bits = _simulate_point(
            trellis, lr, float(snr), seed, i, min_errors, max_bits,
            decoder, streams, blocks_per_stream,
            fading_coherence_blocks=fading_coherence_blocks,
        )
        lo, hi = wilson_interval(errors, bits)
        points.append(BerPoint(float(snr), errors, bits, errors / bits, lo, hi))
    config = {
        "code": code.name_hint,
        "lt": code.lt,
        "lr": lr,
        "m0": params.m0,
        "p": params.p,
        "M": params.M,
        "gamma": params.gamma,
        "pulse": params.pulse.value,
        "oversampling": params.oversampling,
        "metric": decoder.metric.value,
        "truncation": decoder.truncation,
        "min_errors": min_errors,
        "max_bits": max_bits,
        "streams": streams,
        "blocks_per_stream": blocks_per_stream,
        "fading_coherence_blocks": fading_coherence_blocks,
        "theta0": list(code.theta0),
    }
    return BerCurve(points=points, config=config, seed=seed)


def reference_1x1_code(theta0: float = 0.0):
    """Conventional single-antenna CPM baseline accepted by the harness."""
    return single_antenna_reference(theta0)


def estimate_diversity_slope(
    curve: BerCurve, window_db: float = 6.0, min_errors: int = 100
) -> float:
    """Log-log BER slope (decades per decade of Eb/N0) in the top window.

    Uses only points within ``window_db`` of the largest simulated Eb/N0
    that collected at least ``min_errors`` errors; needs three such points.
    """
    pts = [p for p in curve.points if p.errors >= min_errors and p.ber > 0]
    if not pts:
        raise ValueError("no points with enough errors for a slope fit")
    top = max(p.ebn0_db for p in pts)
    window = [p for p in pts if p.ebn0_db >= top - window_db]
    if len(window) < 3:
        raise ValueError("need at least 3 qualifying points in the fit window")
    x = np.array([p.ebn0_db / 10.0 for p in window])  # log10 of linear Eb/N0
    yv = np.log10([p.ber for p in window])
    slope = np.polyfit(x, yv, 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# spectral estimation
# ---------------------------------------------------------------------------


@dataclass
class PsdEstimate:
    """Welch PSD on a normalized f*Td axis (Td = bit duration)."""

    f_td: np.ndarray
    power_db: np.ndarray
    nperseg: int
    noverlap: int
    window: str

    def linear(self) -> np.ndarray:
        return 10.0 ** (self.power_db / 10.0)

    @property
    def df_td(self) -> float:
        return float(self.f_td[1] - self.f_td[0])


def welch_psd(
    samples: np.ndarray,
    dt: float,
    bit_time: float,
    nperseg: int = 4096,
    overlap: float = 0.5,
    window: str = "hann",
) -> PsdEstimate:
    """Welch average of windowed periodograms of a complex baseband stream."""
    noverlap = int(nperseg * overlap)
    min_len = nperseg + 3 * (nperseg - noverlap)  # four segments
    if len(samples) < min_len:
        raise ValueError(f"stream too short: need >= {min_len} samples for 4 segments")
    f, p = sp_signal.welch(
        samples,
        fs=1.0 / dt,
        window=window,
        nperseg=nperseg,
        noverlap=noverlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    f = np.fft.fftshift(f)
    p = np.fft.fftshift(p)
    return PsdEstimate(
        f_td=f * bit_time,
        power_db=10.0 * np.log10(np.maximum(p, 1e-300)),
        nperseg=nperseg,
        noverlap=noverlap,
        window=window,
    )


def parseval_ratio(psd: PsdEstimate, samples: np.ndarray, bit_time: float) -> float:
    """Integrated PSD over mean signal power (1.0 when energy is conserved)."""
    df_hz = psd.df_td / bit_time
    return float(psd.linear().sum() * df_hz / np.mean(np.abs(samples) ** 2))


def spectral_shift(psd_a: PsdEstimate, psd_b: PsdEstimate,
                   max_shift_td: Optional[float] = None) -> float:
    """Frequency displacement of psd_b relative to psd_a, in f*Td.

    Minimises the L1 norm of the linear-power difference over integer-bin
    circular shifts, then refines with a parabolic fit through the minimum;
    positive means psd_b occupies higher frequencies.
    """
    if psd_a.f_td.shape != psd_b.f_td.shape or not np.allclose(
        psd_a.f_td, psd_b.f_td
    ):
        raise ValueError("PSDs must share a common frequency grid")
    pa, pb = psd_a.linear(), psd_b.linear()
    n = len(pa)
    kmax = n // 4 if max_shift_td is None else int(round(max_shift_td / psd_a.df_td))
    kmax = max(1, min(kmax, n // 2 - 1))
    shifts = np.arange(-kmax, kmax + 1)
    obj = np.array([np.abs(np.roll(pa, k) - pb).sum() for k in shifts])
    i = int(obj.argmin())
    k = shifts[i]
    delta = 0.0
    if 0 < i < len(shifts) - 1:
        a, b, c = obj[i - 1], obj[i], obj[i + 1]
        denom = a - 2 * b + c
        if denom > 0:
            delta = 0.5 * (a - c) / denom
    return float((k + delta) * psd_a.df_td)


# ---------------------------------------------------------------------------
# initial-phase sweep
# ---------------------------------------------------------------------------


@dataclass
class PhaseSweepGrid:
    """BER over a grid of initial phases (theta1, theta2), theta3 fixed at 0."""

    theta1: np.ndarray
    theta2: np.ndarray
    ber: np.ndarray
    errors: np.ndarray
    bits: np.ndarray
    ebn0_db: float
    seed: int

    @property
    def argmin_cell(self):
        i, j = np.unravel_index(np.argmin(self.ber), self.ber.shape)
        return int(i), int(j)

    @property
    def minmax_ratio(self) -> float:
        return float(self.ber.max() / max(self.ber.min(), 1e-300))


def sweep_initial_phases(
    code,
    params: CpmParams,
    ebn0_db: float,
    grid: int = 8,
    seed: int = 0,
    lr: int = 1,
    decoder: DecoderConfig = DecoderConfig(),
    blocks_per_stream: int = 40,
    min_cell_errors: int = 60,
    max_cell_bits: int = 120_000,
) -> PhaseSweepGrid:
    """BER on a (theta1, theta2) grid of initial phases for a 3-antenna code.

    All cells share common data, fading, and noise draws (the initial phases
    enter as per-antenna rotations), so cell-to-cell comparisons are paired.
    """
    if code.lt != 3:
        raise ValueError("the initial-phase sweep is defined for Lt=3 codes")
    code_zero = replace(code, theta0=(0.0, 0.0, 0.0))
    trellis = build_trellis(code, params)
    lt = 3
    bps = params.bits_per_symbol
    G = grid
    B = G * G
    th1 = np.arange(G) / G
    th2 = np.arange(G) / G
    theta0 = np.zeros((B, lt))
    theta0[:, 0] = np.repeat(th1, G)
    theta0[:, 1] = np.tile(th2, G)
    rot = np.exp(2j * np.pi * theta0)  # (B, lt)

    n_sym = blocks_per_stream * lt
    n0 = ebn0_db_to_n0(ebn0_db, params.Es, bps)
    errors = np.zeros(B, dtype=np.int64)
    bits = np.zeros(B, dtype=np.int64)

    batch = 0
    while errors.min() < min_cell_errors and bits.max() < max_cell_bits:
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(batch,))
        )
        raw = rng.integers(0, 2, size=(1, n_sym * bps))
        d = symbols_from_bits(raw, params.M)
        base = encode_streams(code_zero, params, d)
        stream = base * rot[:, :, None]
        alpha = np.broadcast_to(
            draw_fading_blocks(lr, lt, (1, blocks_per_stream), rng),
            (B, blocks_per_stream, lr, lt),
        )
        zn = rng.standard_normal((lr, 1, stream.shape[-1], 2))
        noise = np.broadcast_to(
            np.moveaxis(zn[..., 0] + 1j * zn[..., 1], 0, 1), (B, lr, stream.shape[-1])
        )
        y = apply_channel_stream(
            stream, alpha, n0, params.dt, lt, params.oversampling, noise=noise
        )
        est, _ = decode_batch(trellis, y, np.ascontiguousarray(alpha),
                              config=decoder, theta0=theta0)
        d_tiled = np.broadcast_to(d, (B, n_sym))
        for c in range(B):
            errors[c] += bit_errors(d_tiled[c], est[c], params.M)
        bits += n_sym * bps
        batch += 1

    ber = errors / np.maximum(bits, 1)
    return PhaseSweepGrid(
        theta1=th1,
        theta2=th2,
        ber=ber.reshape(G, G),
        errors=errors.reshape(G, G),
        bits=bits.reshape(G, G),
        ebn0_db=float(ebn0_db),
        seed=seed,
    )
