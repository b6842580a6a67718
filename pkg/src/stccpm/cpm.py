"""Constant-envelope CPM baseband waveform generation.

Phase convention: every phase in this package is measured in *cycles*; a
transmitted sample is ``A * exp(j*2*pi*phi)``.  With the modulation index
``h = 2*m0/p`` stored as an integer pair, all phase-memory increments are
exact rationals, so state grids and mod-1 phase conditions can be handled
without float drift.

Timing convention: symbol slot ``n`` (1-based) occupies ``[(n-1)*T, n*T]``.
The phase inside a slot is shaped by a *window* of ``gamma`` symbols, oldest
first; window entry ``j`` contributes ``h * d * q(tau + (gamma-1-j)*T)`` at
slot-relative time ``tau``.  Symbols with stream index <= 0 are zero padding
(a zero symbol contributes nothing to the phase).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from math import gcd
from typing import Callable, Optional

import numpy as np


class PulseShape(Enum):
    """Phase-smoothing response: linear ramp or raised-cosine ramp."""

    LREC = "lrec"
    LRC = "lrc"


@dataclass(frozen=True)
class CpmParams:
    """All CPM constants.

    The modulation index is ``h = 2*m0/p`` with gcd(m0, p) = 1, kept as the
    integer pair so that per-symbol phase increments ``h*d/2 = m0*d/p`` stay
    exact.  ``oversampling`` is the number of sample intervals per symbol
    duration ``T``.
    """

    m0: int
    p: int
    M: int
    gamma: int
    pulse: PulseShape = PulseShape.LREC
    Es: float = 1.0
    T: float = 1.0
    oversampling: int = 64

    def __post_init__(self):
        if self.m0 < 1 or self.p < 1:
            raise ValueError("m0 and p must be positive integers")
        if gcd(self.m0, self.p) != 1:
            raise ValueError("m0 and p must be relatively prime")
        if self.M < 2 or (self.M & (self.M - 1)) != 0:
            raise ValueError("M must be a power of 2")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.oversampling < 8:
            raise ValueError("oversampling must be >= 8")
        if self.Es <= 0 or self.T <= 0:
            raise ValueError("Es and T must be positive")
        if not isinstance(self.pulse, PulseShape):
            object.__setattr__(self, "pulse", PulseShape(self.pulse))

    @classmethod
    def with_h(cls, h, **kwargs) -> "CpmParams":
        """Build params from a rational modulation index like "1/2"."""
        frac = Fraction(h) if not isinstance(h, Fraction) else h
        if frac <= 0:
            raise ValueError("h must be positive")
        half = frac / 2  # m0/p
        return cls(m0=half.numerator, p=half.denominator, **kwargs)

    @property
    def h(self) -> Fraction:
        return Fraction(2 * self.m0, self.p)

    @property
    def h_float(self) -> float:
        return 2.0 * self.m0 / self.p

    @property
    def dt(self) -> float:
        return self.T / self.oversampling

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def alphabet(self) -> np.ndarray:
        """Signal levels {-M+1, -M+3, ..., M-1}, ascending."""
        return np.arange(-self.M + 1, self.M, 2)

    def symbol_increment(self, d) -> Fraction:
        """Exact phase-memory increment h*d/2 contributed by a retiring symbol."""
        return Fraction(self.m0 * int(d), self.p)


@dataclass(frozen=True)
class PhaseState:
    """Phase memory (cycles, reduced mod 1) plus the gamma-1 trailing symbols."""

    theta: float
    history: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % 1.0)
        object.__setattr__(self, "history", tuple(self.history))


@dataclass(frozen=True)
class Waveform:
    """Sampled complex baseband segment on a uniform grid."""

    samples: np.ndarray
    dt: float
    start_time: float = 0.0

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt


def phase_pulse(t, params: CpmParams) -> np.ndarray:
    """Phase smoothing function q(t), in cycles.

    q(t) = 0 for t <= 0, q(t) = 1/2 for t >= gamma*T, continuous and
    nondecreasing in between (linear for LREC, raised-cosine for LRC).
    """
    span = params.gamma * params.T
    u = np.clip(np.asarray(t, dtype=float), 0.0, span)
    if params.pulse is PulseShape.LREC:
        return u / (2.0 * span)
    # LRC
    x = u / span
    return 0.5 * (x - np.sin(2.0 * np.pi * x) / (2.0 * np.pi))


def pulse_matrix(params: CpmParams) -> np.ndarray:
    """q evaluated on the closed slot grid for each window position.

    Returns Q with shape (gamma, oversampling+1); row j (j=0 oldest) holds
    q(tau_k + (gamma-1-j)*T) for tau_k = k*dt, k = 0..oversampling.
    """
    tau = np.arange(params.oversampling + 1) * params.dt
    offsets = (params.gamma - 1 - np.arange(params.gamma)) * params.T
    return phase_pulse(tau[None, :] + offsets[:, None], params)


def slot_times(params: CpmParams) -> np.ndarray:
    """Closed slot-relative sample grid tau_k = k*dt, k = 0..oversampling."""
    return np.arange(params.oversampling + 1) * params.dt


def symbol_phase(params: CpmParams, state: PhaseState, window, correction, t):
    """CPM phase (cycles) at slot-relative time t for the given window.

    ``window`` holds gamma symbols, oldest first (current symbol last);
    ``correction`` is a callable tau -> cycles, or None for plain CPM.
    """
    window = np.asarray(window, dtype=float)
    if window.shape != (params.gamma,):
        raise ValueError(f"window must hold gamma={params.gamma} symbols")
    tau = np.asarray(t, dtype=float)
    if np.any(tau < -1e-12) or np.any(tau > params.T + 1e-12):
        raise ValueError("t outside the symbol slot")
    offsets = (params.gamma - 1 - np.arange(params.gamma)) * params.T
    q = phase_pulse(tau[..., None] + offsets, params)
    phi = state.theta + params.h_float * (q @ window)
    if correction is not None:
        phi = phi + correction(tau)
    return phi


def modulate_symbol(
    params: CpmParams,
    state: PhaseState,
    symbol,
    correction=None,
    xi=None,
    alphabet: Optional[np.ndarray] = None,
):
    """Emit one symbol slot and advance the phase memory.

    Returns (Waveform, PhaseState).  The waveform holds ``oversampling``
    samples on the left-closed grid [0, T).  ``xi`` is the phase-memory
    increment applied at the slot end; by default it is the conventional-CPM
    value h/2 times the retiring (oldest) window symbol.  ``alphabet``
    overrides the validation set, e.g. for offset alphabets.
    """
    levels = params.alphabet if alphabet is None else np.asarray(alphabet)
    if not np.any(np.isclose(levels, symbol)):
        raise ValueError(f"symbol {symbol!r} not in the modulation alphabet")
    if len(state.history) != params.gamma - 1:
        raise ValueError("history length must be gamma-1")

    window = np.array(list(state.history) + [symbol], dtype=float)
    tau = np.arange(params.oversampling) * params.dt
    phi = symbol_phase(params, state, window, correction, tau)
    amp = np.sqrt(params.Es / params.T)
    wave = Waveform(samples=amp * np.exp(2j * np.pi * phi), dt=params.dt)

    if xi is None:
        xi = params.h_float / 2.0 * window[0]
    next_state = PhaseState(
        theta=(state.theta + float(xi)) % 1.0,
        history=tuple(window[1:].tolist()) if params.gamma > 1 else (),
    )
    return wave, next_state


def trapezoid_weights(params: CpmParams) -> np.ndarray:
    """Quadrature weights for one closed slot grid (trapezoidal rule)."""
    w = np.full(params.oversampling + 1, params.dt)
    w[0] = w[-1] = params.dt / 2.0
    return w
