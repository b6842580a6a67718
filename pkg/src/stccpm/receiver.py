"""Coherent MLSE over the CPM trellis, with truncated Viterbi and an oracle.

Trellis state
-------------
All implemented codes share one data-driven phase accumulator: every
antenna's phase memory is ``theta_m(n) = theta_m(1) + Theta_d(n) +
(n-1)*drop_m`` where ``Theta_d`` advances by ``h/2`` times the retiring
symbol and ``drop_m`` is the antenna's fixed per-slot correction drop.  The
trellis therefore tracks only ``(Theta_d mod 1, last gamma-1 symbols)``:
``p * M^(gamma-1)`` states with M branches per state.  The deterministic
per-antenna offsets multiply the fading coefficients at metric time, so
correction families do not enlarge the state space.

Decoders
--------
* BLOCKWISE ("d2"): per-antenna decomposed distances.  For parallel-mapping
  codes the decomposition splits per slot, giving Lt*M branch metrics per
  state per block; crosswise codes are decoded block-wise with M^Lt joint
  branches (their slot waveforms depend on both fresh symbols).
* SYMBOLWISE ("d3"): literal per-slot distances against the summed
  multi-antenna hypothesis; parallel mapping only.
* NAIVE_JOINT ("d1"): literal block-wise joint decoding without the
  orthogonality split; the M^Lt reference for complexity comparisons.

Survivor truncation emits the symbols on the current best path at a delay of
``truncation`` code blocks; the remaining tail is flushed by a final
traceback at stream end.  Streams start from zero phase and history (symbol
indices <= 0 are zero padding), matching the encoder.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import Enum
from math import ceil, lcm
from typing import Optional

import numpy as np

from .cpm import CpmParams, phase_pulse, pulse_matrix, slot_times, trapezoid_weights
from .coding import (
    MappingScheme,
    amplitude,
    encode_streams,
    stream_to_blocks,
    wang_xia_coeffs,
)


class DecoderMetric(Enum):
    BLOCKWISE = "d2"
    SYMBOLWISE = "d3"
    NAIVE_JOINT = "d1"


@dataclass(frozen=True)
class DecoderConfig:
    metric: DecoderMetric = DecoderMetric.BLOCKWISE
    truncation: int = 10  # survivor depth in code blocks

    def __post_init__(self):
        if not isinstance(self.metric, DecoderMetric):
            object.__setattr__(self, "metric", DecoderMetric(self.metric))
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")


@dataclass
class DecodeStats:
    """Instrumentation counters, accumulated over one decode call."""

    branch_metric_evals: int = 0
    correlation_evals: int = 0
    n_blocks: int = 0
    n_streams: int = 0
    states: int = 0

    def per_state_per_block(self) -> float:
        denom = self.states * self.n_blocks * self.n_streams
        return self.branch_metric_evals / denom if denom else float("nan")


def phase_pulse_sum(tau, params: CpmParams, coeffs) -> np.ndarray:
    """sum_i coeffs[i] * q(tau + i*T), the ramp-stack correction phase."""
    i = np.arange(params.gamma)
    q = phase_pulse(np.asarray(tau)[..., None] + i * params.T, params)
    return q @ np.asarray(coeffs, dtype=float)


class Trellis:
    """Immutable decoding tables for one (code, params) pair."""

    def __init__(self, code, params: CpmParams):
        if code.mapping is MappingScheme.REPETITIVE:
            raise ValueError("decoding is wired only for parallel and crosswise codes")
        self.code = code
        self.params = params
        self.lt = code.lt
        self.M = M = params.M
        g = params.gamma
        self.alphabet = params.alphabet

        incs = [params.symbol_increment(int(v)) for v in self.alphabet]
        self.phase_den = P = lcm(*(f.denominator for f in incs))
        self.inc_int = np.array([int(f * P) % P for f in incs], dtype=np.int64)

        self.n_hist = H = M ** (g - 1)
        self.n_states = P * H

        # hist_digits decodes a history index (oldest symbol first)
        idx = np.arange(H)
        self.hist_digits = np.stack(
            [(idx // M ** (g - 2 - j)) % M for j in range(g - 1)], axis=1
        ) if g > 1 else np.zeros((H, 0), dtype=np.int64)

        self._build_transitions()
        self._build_banks()
        self._block_tables = None

    # -- structural tables ---------------------------------------------

    def _build_transitions(self):
        P, H, M, g = self.phase_den, self.n_hist, self.M, self.params.gamma
        S = self.n_states
        s = np.arange(S)
        phase = s // H
        hist = s % H
        k = np.arange(M)

        src_phase = (phase[:, None] - self.inc_int[None, :]) % P
        if g == 1:
            self.src_state = src_phase * H
            self.branch_input = np.broadcast_to(k[None, :], (S, M)).copy()
        else:
            # source of (phase', hist'): retiring symbol a=k, hist (a, hist'[:-1])
            src_hist = k[None, :] * (M ** (g - 2)) + (hist // M)[:, None]
            self.src_state = src_phase * H + src_hist
            last = (hist % M).astype(np.int64)
            self.branch_input = np.broadcast_to(last[:, None], (S, M)).copy()
        self.src_state = self.src_state.astype(np.int64)
        self.src_branch_flat = self.src_state * M + self.branch_input

    def _build_banks(self):
        params, code = self.params, self.code
        g, M, lt = params.gamma, self.M, self.lt
        self.Q = pulse_matrix(params)
        self.K = self.Q.shape[1]
        self.tau = slot_times(params)
        self.w_quad = trapezoid_weights(params)
        self.amp = amplitude(params, lt)
        W = M**g
        widx = np.arange(W)
        win_digits = np.stack(
            [(widx // M ** (g - 1 - j)) % M for j in range(g)], axis=1
        )
        self.window_syms = self.alphabet[win_digits].astype(float)  # (W, g)
        data_phase = params.h_float * (self.window_syms @ self.Q)

        if code.mapping is MappingScheme.PARALLEL:
            V = np.empty((lt, W, self.K), dtype=complex)
            for m in range(1, lt + 1):
                shape = code.correction.shape(m, lt, self.tau, params)
                V[m - 1] = self.amp * np.exp(2j * np.pi * (data_phase + shape[None, :]))
            self.V = V
            self.Vc = V.conj() * self.w_quad[None, None, :]
        else:  # crosswise: antenna 1 conventional, antenna 2 per block tuple
            self.V1 = self.amp * np.exp(2j * np.pi * data_phase)
            self.V1c = self.V1.conj() * self.w_quad[None, :]
            E = M ** (g + 1)
            eidx = np.arange(E)
            edig = np.stack(
                [(eidx // M ** (g - j)) % M for j in range(g + 1)], axis=1
            )
            esyms = self.alphabet[edig].astype(float)  # (E, g+1)
            coeffs = np.stack([wang_xia_coeffs(params, e) for e in esyms])
            corr = np.einsum("eg,gk->ek", coeffs, self.Q[::-1])
            V2 = np.empty((E, 2, self.K), dtype=complex)
            V2[:, 0] = self.amp * np.exp(
                2j * np.pi * (params.h_float * ((-esyms[:, 1:]) @ self.Q) + corr)
            )
            V2[:, 1] = self.amp * np.exp(
                2j * np.pi * (params.h_float * ((-esyms[:, :-1]) @ self.Q) + corr)
            )
            self.V2 = V2
            self.V2c = V2.conj() * self.w_quad[None, None, :]

        self.drift = np.array(
            [float(code.correction.xi_drop(m, lt, params)) for m in range(1, lt + 1)]
        )
        self.rot = np.exp(-2j * np.pi * np.arange(self.phase_den) / self.phase_den)

    def block_tables(self):
        """Joint block-branch tables (lazy): per-slot window/phase indices."""
        if self._block_tables is not None:
            return self._block_tables
        P, H, M, g, lt = self.phase_den, self.n_hist, self.M, self.params.gamma, self.lt
        S = self.n_states
        n_tup = M**lt
        win = np.zeros((S, n_tup, lt), dtype=np.int64)
        pha = np.zeros((S, n_tup, lt), dtype=np.int64)
        tgt = np.zeros((S, n_tup), dtype=np.int64)
        for s in range(S):
            phase0 = s // H
            hist0 = tuple(self.hist_digits[s % H]) if g > 1 else ()
            for t in range(n_tup):
                tup = tuple((t // M ** (lt - 1 - j)) % M for j in range(lt))
                phase, hist = phase0, hist0
                for j, d in enumerate(tup):
                    wdig = hist + (d,)
                    win[s, t, j] = sum(wdig[i] * M ** (g - 1 - i) for i in range(g))
                    pha[s, t, j] = phase
                    phase = (phase + int(self.inc_int[wdig[0]])) % P
                    hist = wdig[1:]
                hidx = sum(hist[i] * M ** (g - 2 - i) for i in range(g - 1)) if g > 1 else 0
                tgt[s, t] = phase * H + hidx
        # invert: every target state has exactly n_tup incoming block branches
        order = np.argsort(tgt.ravel(), kind="stable")
        self._block_tables = {
            "win": win,
            "phase": pha,
            "tgt": tgt,
            "src_state": (order // n_tup).reshape(S, n_tup).astype(np.int64),
            "src_tuple": (order % n_tup).reshape(S, n_tup).astype(np.int64),
        }
        return self._block_tables

    # -- candidate access -------------------------------------------------

    def branch_waveform(self, phase_idx: int, history, d, m: int = 1) -> np.ndarray:
        """Closed-grid candidate slot waveform of one branch.

        ``history`` holds gamma-1 symbol values, ``d`` the branch input.  The
        deterministic per-antenna rotations (theta0 and correction drift) are
        not included; they scale the hypothesis at metric time.
        """
        window = np.array(list(history) + [float(d)])
        base = phase_idx / self.phase_den
        shape = self.code.correction.shape(m, self.lt, self.tau, self.params)
        phi = base + self.params.h_float * (window @ self.Q) + shape
        return self.amp * np.exp(2j * np.pi * phi)


def build_trellis(code, params: CpmParams) -> Trellis:
    """Enumerate the (phase, history) trellis and its candidate banks."""
    return Trellis(code, params)


# ---------------------------------------------------------------------------
# literal metric forms (tests and oracle)
# ---------------------------------------------------------------------------


def metric_blockwise(y: np.ndarray, alpha: np.ndarray, candidates: np.ndarray,
                     dt: float) -> float:
    """Antenna-decomposed block distance: sum_n sum_m int |y_n - a_nm s_m|^2.

    ``y`` is (lr, K) on a closed block grid, ``candidates`` the (lt, K)
    hypothesis block.  Dropping the inter-antenna cross terms is exact (up
    to quadrature) only for L2-orthogonal candidate blocks.
    """
    w = np.full(y.shape[-1], dt)
    w[0] = w[-1] = dt / 2.0
    diff = y[:, None, :] - alpha[:, :, None] * candidates[None, :, :]
    return float(np.einsum("nmk,k->", np.abs(diff) ** 2, w))


def metric_symbolwise(y_slot: np.ndarray, alpha: np.ndarray,
                      candidates: np.ndarray, dt: float) -> float:
    """Joint per-slot distance: sum_n int |y_n - sum_m a_nm s_m|^2."""
    w = np.full(y_slot.shape[-1], dt)
    w[0] = w[-1] = dt / 2.0
    hyp = np.einsum("nm,mk->nk", alpha, candidates)
    return float(np.einsum("nk,k->", np.abs(y_slot - hyp) ** 2, w))


def sequence_distance(y: np.ndarray, alpha: np.ndarray, s: np.ndarray,
                      dt: float) -> float:
    """Full joint distance over blocks: y (nb, lr, K), s (nb, lt, K)."""
    w = np.full(y.shape[-1], dt)
    w[0] = w[-1] = dt / 2.0
    hyp = np.einsum("jnm,jmk->jnk", alpha, s)
    return float(np.einsum("jnk,k->", np.abs(y - hyp) ** 2, w))


# ---------------------------------------------------------------------------
# Viterbi decoding
# ---------------------------------------------------------------------------


def viterbi_decode(
    y: np.ndarray,
    alpha: np.ndarray,
    trellis: Trellis,
    config: DecoderConfig = DecoderConfig(),
    theta0=None,
    collect_stats: bool = False,
):
    """Truncated-survivor MLSE of one received stream.

    ``y`` holds closed per-block grids (n_blocks, lr, lt*oversampling+1) and
    ``alpha`` the matching block-fading draws (n_blocks, lr, lt).  Returns
    the estimated symbol values, plus counters when ``collect_stats``.
    """
    y = np.asarray(y)
    alpha = np.asarray(alpha)
    if y.ndim != 3 or y.shape[-1] != trellis.lt * trellis.params.oversampling + 1:
        raise ValueError("y must be (n_blocks, lr, lt*oversampling+1)")
    if alpha.shape != (y.shape[0], y.shape[1], trellis.lt):
        raise ValueError("alpha must be (n_blocks, lr, lt)")
    syms, stats = decode_batch(
        trellis, y[None], alpha[None], config=config,
        theta0=None if theta0 is None else np.asarray(theta0, float)[None],
    )
    return (syms[0], stats) if collect_stats else syms[0]


def decode_batch(
    trellis: Trellis,
    y: np.ndarray,
    alpha: np.ndarray,
    config: DecoderConfig = DecoderConfig(),
    theta0: Optional[np.ndarray] = None,
):
    """Decode a batch of independent streams (leading axis) in lockstep."""
    code = trellis.code
    if theta0 is None:
        theta0 = np.tile(np.asarray(code.theta0, float), (y.shape[0], 1))
    if code.mapping is MappingScheme.PARALLEL:
        if config.metric is DecoderMetric.NAIVE_JOINT:
            return _decode_block_rate(trellis, y, alpha, config, theta0)
        return _decode_slot_rate(trellis, y, alpha, config, theta0)
    if config.metric is DecoderMetric.SYMBOLWISE:
        raise ValueError("symbol-wise metric requires a parallel-mapping code")
    return _decode_block_rate(trellis, y, alpha, config, theta0)


def _alpha_tilde(trellis, alpha_blk, theta0, n):
    """Effective fading: alpha * exp(j*2*pi*(theta0_m + (n-1)*drop_m))."""
    rho = np.exp(2j * np.pi * (theta0 + (n - 1) * trellis.drift[None, :]))
    return alpha_blk * rho[:, None, :]


def _transient_windows(trellis: Trellis, t: int) -> np.ndarray:
    """Zero-padded slot-t windows for every length-t prefix (t < gamma)."""
    M, g = trellis.M, trellis.params.gamma
    idx = np.arange(M**t)
    win = np.zeros((M**t, g))
    for j in range(t):
        win[:, g - t + j] = trellis.alphabet[(idx // M ** (t - 1 - j)) % M]
    return win


def _decode_slot_rate(trellis, y, alpha, config, theta0):
    """Per-slot Viterbi for parallel codes (BLOCKWISE or SYMBOLWISE)."""
    params = trellis.params
    B, nb, lr, _ = y.shape
    lt, M, g = trellis.lt, trellis.M, params.gamma
    os = params.oversampling
    S, H, P = trellis.n_states, trellis.n_hist, trellis.phase_den
    N = nb * lt
    symbolwise = config.metric is DecoderMetric.SYMBOLWISE
    stats = DecodeStats(states=S, n_blocks=nb, n_streams=B)
    brange = np.arange(B)
    rot_pos = np.exp(2j * np.pi * np.arange(P) / P)

    def slot_view(t):  # closed grid and fading of global slot t (1-based)
        jb, r = divmod(t - 1, lt)
        return y[:, jb, :, r * os : (r + 1) * os + 1], alpha[:, jb]

    def reduced_bm(t, V_bank, Vc_bank, with_phase: bool):
        """Branch metrics against a candidate bank.

        Returns (B, n_cand) at zero phase, or (B, P, n_cand) with the phase
        grid applied (dense steps).
        """
        ys, ab = slot_view(t)
        at = _alpha_tilde(trellis, ab, theta0, t)
        n_cand = V_bank.shape[1]
        if not symbolwise:
            c = np.einsum("bnk,mwk->bnmw", ys, Vc_bank)
            stats.correlation_evals += B * lr * V_bank.shape[0] * n_cand
            z = np.einsum("bnm,bnmw->bw", at.conj(), c)
            if not with_phase:
                return -2.0 * np.real(z)
            return -2.0 * np.real(trellis.rot[None, :, None] * z[:, None, :])
        mix = np.einsum("bnm,mwk->bnwk", at, V_bank)
        stats.correlation_evals += B * lr * n_cand * (P if with_phase else 1)
        if not with_phase:
            diff = ys[:, :, None, :] - mix
            return np.einsum("bnwk,k->bw", np.abs(diff) ** 2, trellis.w_quad)
        diff = (
            ys[:, :, None, None, :]
            - rot_pos[None, None, :, None, None] * mix[:, :, None, :, :]
        )
        return np.einsum("bnpwk,k->bpw", np.abs(diff) ** 2, trellis.w_quad)

    # transient slots 1..gamma-1: prefix tuples grow without merging
    pre_metric = np.zeros((B, 1))
    for t in range(1, g):
        win = _transient_windows(trellis, t)
        data_phase = params.h_float * (win @ trellis.Q)
        Vt = np.empty((lt, len(win), trellis.K), dtype=complex)
        for m in range(1, lt + 1):
            shape = trellis.code.correction.shape(m, lt, trellis.tau, params)
            Vt[m - 1] = trellis.amp * np.exp(2j * np.pi * (data_phase + shape))
        bm = reduced_bm(t, Vt, Vt.conj() * trellis.w_quad, with_phase=False)
        stats.branch_metric_evals += bm.size
        pre_metric = np.repeat(pre_metric, M, axis=1) + bm

    metric = np.full((B, S), np.inf)
    metric[:, :H] = pre_metric  # phase index 0, history = prefix

    decisions = np.full((B, N), -1, dtype=np.int64)
    bp = {}

    def walk_back(state, t_hi, fill_lo, fill_hi):
        """Trace back from state-after-slot t_hi; fill slots (fill_lo, fill_hi]."""
        s = state.copy()
        for t in range(t_hi, max(fill_lo, g - 1), -1):
            k = bp[t][brange, s]
            if fill_lo < t <= fill_hi:
                decisions[:, t - 1] = trellis.branch_input[s, k]
            s = trellis.src_state[s, k]
        if fill_lo < g:  # prefix symbols live in the history digits
            hist = trellis.hist_digits[s % H]
            for t in range(1, g):
                if fill_lo < t <= fill_hi:
                    decisions[:, t - 1] = hist[:, t - 1]

    for jb in range(nb):
        for r in range(1, lt + 1):
            t = jb * lt + r
            if t < g:
                continue  # consumed by the transient stage
            bm = reduced_bm(t, trellis.V, trellis.Vc, with_phase=True).reshape(B, S * M)
            stats.branch_metric_evals += B * S * M
            cand = metric[:, trellis.src_state] + bm[:, trellis.src_branch_flat]
            bp[t] = cand.argmin(axis=2).astype(np.int64)
            metric = np.take_along_axis(cand, bp[t][:, :, None], axis=2)[:, :, 0]
        metric -= metric.min(axis=1, keepdims=True)
        if jb >= config.truncation - 1:
            e = jb - config.truncation + 1
            best = metric.argmin(axis=1)
            walk_back(best, (jb + 1) * lt, e * lt, (e + 1) * lt)
            for t in list(bp):
                if t <= e * lt:
                    del bp[t]

    emitted = max(0, nb - config.truncation + 1)
    best = metric.argmin(axis=1)
    walk_back(best, N, emitted * lt, N)
    assert decisions.min() >= 0
    return trellis.alphabet[decisions].astype(float), stats


def _block_candidates(trellis, hist_syms, fresh_syms, theta_d):
    """Slot waveforms of explicit joint block branches.

    hist_syms: (T, gamma-1) symbol values at block start (zeros allowed);
    fresh_syms: (T, lt); theta_d: (T,) data phase at block start, cycles.
    Returns candidates (T, lt_antenna, lt_slot, K).
    """
    params = trellis.params
    code = trellis.code
    lt, g = trellis.lt, params.gamma
    K = trellis.K
    T = len(fresh_syms)
    out = np.empty((T, lt, lt, K), dtype=complex)
    win = np.concatenate([hist_syms, fresh_syms], axis=1)  # (T, g-1+lt)
    crosswise = code.mapping is MappingScheme.CROSSWISE
    if crosswise:
        esyms = win[:, -(g + 1):]  # the gamma+1 symbols feeding antenna 2
        coeffs = np.stack([wang_xia_coeffs(params, e) for e in esyms])
        corr2 = np.einsum("tg,gk->tk", coeffs, trellis.Q[::-1])
    th = np.asarray(theta_d, dtype=float).copy()
    for r in range(lt):
        wr = win[:, r : r + g]
        for m in range(1, lt + 1):
            if crosswise and m == 2:
                w2 = -esyms[:, 1:] if r == 0 else -esyms[:, :-1]
                data = params.h_float * (w2 @ trellis.Q)
                corr = corr2
            else:
                data = params.h_float * (wr @ trellis.Q)
                corr = code.correction.shape(m, lt, trellis.tau, params)[None, :]
            out[:, m - 1, r] = trellis.amp * np.exp(
                2j * np.pi * (th[:, None] + data + corr)
            )
        th = th + params.h_float / 2.0 * wr[:, 0]
    return out


def _decode_block_rate(trellis, y, alpha, config, theta0):
    """Block-rate Viterbi: crosswise codes and the naive joint reference."""
    params = trellis.params
    code = trellis.code
    B, nb, lr, _ = y.shape
    lt, M, g = trellis.lt, trellis.M, params.gamma
    os = params.oversampling
    S, H, P = trellis.n_states, trellis.n_hist, trellis.phase_den
    n_tup = M**lt
    naive = config.metric is DecoderMetric.NAIVE_JOINT
    crosswise = code.mapping is MappingScheme.CROSSWISE
    stats = DecodeStats(states=S, n_blocks=nb, n_streams=B)
    tb = trellis.block_tables()
    brange = np.arange(B)
    wq = trellis.w_quad
    theta_vals = np.arange(P) / P

    t0_blocks = ceil((g - 1) / lt) if g > 1 else 0

    def slot_slice(jb, r):
        return y[:, jb, :, r * os : (r + 1) * os + 1]

    def literal_block_bm(jb, hist_syms, fresh_syms, theta_d):
        """Joint distances of explicit branches, shape (B, T)."""
        cand = _block_candidates(trellis, hist_syms, fresh_syms, theta_d)
        bm = np.zeros((B, len(fresh_syms)))
        for r in range(lt):
            t = jb * lt + r + 1
            at = _alpha_tilde(trellis, alpha[:, jb], theta0, t)
            hyp = np.einsum("bnm,tmk->bntk", at, cand[:, :, r])
            diff = slot_slice(jb, r)[:, :, None, :] - hyp
            bm += np.einsum("bntk,k->bt", np.abs(diff) ** 2, wq)
        stats.correlation_evals += B * lr * len(fresh_syms) * lt
        return bm

    def split_block_bm(jb):
        """Antenna-decomposed (reduced) distances for a crosswise block."""
        z1, z2 = [], []
        for r in range(lt):
            t = jb * lt + r + 1
            ys = slot_slice(jb, r)
            at = _alpha_tilde(trellis, alpha[:, jb], theta0, t)
            c1 = np.einsum("bnk,wk->bnw", ys, trellis.V1c)
            z1.append(np.einsum("bn,bnw->bw", at[:, :, 0].conj(), c1))
            c2 = np.einsum("bnk,ek->bne", ys, trellis.V2c[:, r])
            z2.append(np.einsum("bn,bne->be", at[:, :, 1].conj(), c2))
            stats.correlation_evals += B * lr * (
                trellis.V1c.shape[0] + trellis.V2c.shape[0]
            )
        win, pha = tb["win"], tb["phase"]
        hist = np.arange(S) % H
        e_idx = hist[:, None] * n_tup + np.arange(n_tup)[None, :]
        term = np.zeros((B, S, n_tup), dtype=complex)
        for r in range(lt):
            term += trellis.rot[pha[:, :, r]][None] * (
                z1[r][:, win[:, :, r]] + z2[r][:, e_idx]
            )
        return -2.0 * np.real(term)

    # transient blocks: enumerate prefixes until padding leaves the history
    metric = np.full((B, S), np.inf)
    best_prefix = np.zeros((B, S), dtype=np.int64)
    if t0_blocks == 0:
        metric[:, 0] = 0.0
    else:
        pre_metric = np.zeros((B, 1))
        for jb in range(t0_blocks):
            L = lt * (jb + 1)
            idx = np.arange(M**L)
            dig = np.stack([(idx // M ** (L - 1 - j)) % M for j in range(L)], axis=1)
            syms = trellis.alphabet[dig].astype(float)
            pad = np.zeros((M**L, max(g - 1 - lt * jb, 0)))
            hist_syms = np.concatenate([pad, syms[:, : lt * jb]], axis=1)[:, -(g - 1):]
            th = np.zeros(M**L)
            for n in range(1, lt * jb + 1):  # symbols retired before this block
                if n - g >= 0:
                    th += params.h_float / 2.0 * syms[:, n - g]
            bm = literal_block_bm(jb, hist_syms, syms[:, lt * jb :], th)
            stats.branch_metric_evals += bm.size
            pre_metric = np.repeat(pre_metric, n_tup, axis=1) + bm
        L = lt * t0_blocks
        dig = np.stack(
            [(np.arange(M**L) // M ** (L - 1 - j)) % M for j in range(L)], axis=1
        )
        final_state = np.zeros(M**L, dtype=np.int64)
        for n in range(1, L + 1):
            if n - g >= 0:
                final_state += np.asarray(
                    [int(trellis.inc_int[d]) for d in dig[:, n - g]]
                )
        final_state = (final_state % P) * H
        if g > 1:
            hidx = np.zeros(M**L, dtype=np.int64)
            for i in range(g - 1):
                hidx = hidx * M + dig[:, L - (g - 1) + i]
            final_state += hidx
        for t in range(M**L):
            s = final_state[t]
            better = pre_metric[:, t] < metric[:, s]
            metric[better, s] = pre_metric[better, t]
            best_prefix[better, s] = t

    decisions = np.full((B, nb * lt), -1, dtype=np.int64)
    bp = {}

    def walk_back(state, jb_hi, fill_lo_blk, fill_hi_blk):
        s = state.copy()
        for jb in range(jb_hi, max(fill_lo_blk, t0_blocks) - 1, -1):
            j = bp[jb][brange, s]
            tup = tb["src_tuple"][s, j]
            if fill_lo_blk <= jb <= fill_hi_blk:
                for r in range(lt):
                    decisions[:, jb * lt + r] = (tup // M ** (lt - 1 - r)) % M
            s = tb["src_state"][s, j]
        if fill_lo_blk < t0_blocks:
            tup = best_prefix[brange, s]
            for n in range(lt * t0_blocks):
                jb, r = divmod(n, lt)
                if fill_lo_blk <= jb <= fill_hi_blk:
                    decisions[:, n] = (tup // M ** (lt * t0_blocks - 1 - n)) % M

    hist_vals = (
        trellis.alphabet[trellis.hist_digits].astype(float)
        if g > 1
        else np.zeros((H, 0))
    )
    for jb in range(t0_blocks, nb):
        if naive:
            Sarr = np.arange(S)
            hs_full = np.repeat(hist_vals[Sarr % H], n_tup, axis=0)
            tup_dig = np.stack(
                [(np.arange(n_tup) // M ** (lt - 1 - j)) % M for j in range(lt)],
                axis=1,
            )
            fresh = np.tile(trellis.alphabet[tup_dig].astype(float), (S, 1))
            th = np.repeat(theta_vals[Sarr // H], n_tup)
            bm = literal_block_bm(jb, hs_full, fresh, th).reshape(B, S, n_tup)
        else:
            bm = split_block_bm(jb)
        stats.branch_metric_evals += bm.size
        bm_flat = bm.reshape(B, S * n_tup)
        flat_idx = tb["src_state"] * n_tup + tb["src_tuple"]
        cand = metric[:, tb["src_state"]] + bm_flat[:, flat_idx]
        bp[jb] = cand.argmin(axis=2).astype(np.int64)
        metric = np.take_along_axis(cand, bp[jb][:, :, None], axis=2)[:, :, 0]
        metric -= metric.min(axis=1, keepdims=True)
        if jb >= config.truncation - 1:
            e = jb - config.truncation + 1
            best = metric.argmin(axis=1)
            walk_back(best, jb, e, e)
            for key in list(bp):
                if key <= e:
                    del bp[key]

    emitted = max(0, nb - config.truncation + 1)
    best = metric.argmin(axis=1)
    walk_back(best, nb - 1, emitted, nb - 1)
    assert decisions.min() >= 0
    return trellis.alphabet[decisions].astype(float), stats


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------


def exhaustive_ml(
    y: np.ndarray,
    alpha: np.ndarray,
    code,
    params: CpmParams,
    n_symbols: int,
    theta0=None,
) -> np.ndarray:
    """Globally minimise the joint sequence distance by enumeration.

    Candidate signals come from the encoder itself, independent of the
    trellis tables.  Ties break toward the lexicographically smallest symbol
    sequence.  Cost is M^n_symbols, so n_symbols is capped at 6.
    """
    if n_symbols > 6:
        raise ValueError("exhaustive search is capped at 6 symbols")
    lt = code.lt
    if n_symbols % lt:
        raise ValueError("n_symbols must be a multiple of Lt")
    nb = n_symbols // lt
    y = np.asarray(y)
    if y.shape[0] != nb:
        raise ValueError("y must cover exactly n_symbols/Lt blocks")
    if theta0 is not None:
        code = replace(code, theta0=tuple(theta0))
    best = None
    best_seq = None
    for seq in itertools.product(params.alphabet.tolist(), repeat=n_symbols):
        d = np.asarray(seq, dtype=float)
        stream = encode_streams(code, params, d[None])
        s = np.moveaxis(stream_to_blocks(stream, lt, params.oversampling)[0], 0, 1)
        dist = sequence_distance(y, alpha, s, params.dt)
        if best is None or dist < best:
            best = dist
            best_seq = d
    return best_seq
