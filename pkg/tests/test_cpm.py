"""Waveform-level CPM tests: pulse shapes, phases, envelopes, continuity."""

import numpy as np
import pytest

from stccpm.cpm import (
    CpmParams,
    PhaseState,
    PulseShape,
    modulate_symbol,
    phase_pulse,
    symbol_phase,
)


def make_params(**kw):
    defaults = dict(M=4, gamma=2, oversampling=64)
    defaults.update(kw)
    return CpmParams.with_h(kw.pop("h", "1/2") if "h" in kw else "1/2", **defaults)


def test_params_validation():
    with pytest.raises(ValueError):
        CpmParams(m0=2, p=4, M=4, gamma=1)  # not coprime
    with pytest.raises(ValueError):
        CpmParams(m0=1, p=4, M=3, gamma=1)  # not a power of 2
    with pytest.raises(ValueError):
        CpmParams(m0=1, p=4, M=4, gamma=0)
    with pytest.raises(ValueError):
        CpmParams(m0=1, p=4, M=4, gamma=1, oversampling=4)


def test_h_stored_exactly():
    p = CpmParams.with_h("1/2", M=4, gamma=2)
    assert (p.m0, p.p) == (1, 4)
    assert float(p.h) == 0.5
    p = CpmParams.with_h("2/3", M=2, gamma=1)
    assert (p.m0, p.p) == (1, 3)


def test_alphabet():
    p = make_params(M=8)
    assert p.alphabet.tolist() == [-7, -5, -3, -1, 1, 3, 5, 7]


def test_phase_pulse_endpoints():
    for pulse in PulseShape:
        p = make_params(gamma=3, pulse=pulse)
        assert phase_pulse(0.0, p) == 0.0
        assert phase_pulse(-2.0, p) == 0.0
        assert phase_pulse(3.0 * p.T, p) == pytest.approx(0.5, abs=1e-12)
        assert phase_pulse(10.0, p) == pytest.approx(0.5, abs=1e-12)


def test_phase_pulse_lrec_midpoint():
    # gamma=2, T=1: linear ramp crosses 0.25 at t=1
    p = make_params(gamma=2, pulse=PulseShape.LREC)
    assert phase_pulse(1.0, p) == pytest.approx(0.25, abs=1e-15)


def test_phase_pulse_monotone():
    p = make_params(gamma=2, pulse=PulseShape.LRC)
    t = np.linspace(-1, 3, 400)
    q = phase_pulse(t, p)
    assert np.all(np.diff(q) >= -1e-15)


def test_symbol_phase_zero_input():
    p = make_params(gamma=2)
    st = PhaseState(theta=0.0, history=(0.0,))
    for t in (0.0, 0.3, 1.0):
        assert symbol_phase(p, st, [0.0, 0.0], None, t) == pytest.approx(0.0)


def test_symbol_phase_full_response_end():
    # gamma=1, d=1, h=1/2: phase at slot end = h*d*q(T) = 0.5*0.5 = 0.25
    p = make_params(gamma=1)
    st = PhaseState(theta=0.0, history=())
    assert symbol_phase(p, st, [1.0], None, 1.0) == pytest.approx(0.25)


def test_symbol_phase_partial_response_end():
    # gamma=2, h=1/2, current=3, previous=1, LREC:
    # 0.5*(3*q(T) + 1*q(2T)) = 0.5*(3*0.25 + 1*0.5) = 0.625
    p = make_params(gamma=2)
    st = PhaseState(theta=0.0, history=(1.0,))
    assert symbol_phase(p, st, [1.0, 3.0], None, 1.0) == pytest.approx(0.625)


def test_symbol_phase_rejects_outside_slot():
    p = make_params(gamma=1)
    st = PhaseState(theta=0.0, history=())
    with pytest.raises(ValueError):
        symbol_phase(p, st, [1.0], None, 1.5)


def test_modulate_symbol_rejects_bad_symbol():
    p = make_params(M=4, gamma=1)
    st = PhaseState(theta=0.0, history=())
    with pytest.raises(ValueError):
        modulate_symbol(p, st, 2)  # even levels are not in the alphabet


def test_modulate_zero_symbol_keeps_theta():
    # conventional xi = h/2 * retiring symbol; a zero symbol leaves theta alone
    p = make_params(M=4, gamma=1)
    st = PhaseState(theta=0.37, history=())
    _, nxt = modulate_symbol(p, st, 0.0, alphabet=[0.0])
    assert nxt.theta == pytest.approx(0.37)


def test_modulate_repeated_symbol_advances_quarter():
    # h=1/2, gamma=1, d=1: xi = h*d/2 = 0.25 per symbol
    p = make_params(M=2, gamma=1)
    st = PhaseState(theta=0.0, history=())
    for k in range(1, 5):
        _, st = modulate_symbol(p, st, 1)
        assert st.theta == pytest.approx((0.25 * k) % 1.0)


def test_constant_envelope_and_energy():
    p = make_params(M=4, gamma=2, oversampling=64)
    st = PhaseState(theta=0.1, history=(3.0,))
    wave, _ = modulate_symbol(p, st, -1)
    amp = np.sqrt(p.Es / p.T)
    assert np.max(np.abs(np.abs(wave.samples) - amp)) < 1e-12 * amp
    # energy over one slot: riemann sum of |s|^2 dt = Es
    energy = np.sum(np.abs(wave.samples) ** 2) * wave.dt
    assert energy == pytest.approx(p.Es, rel=1e-6)


def test_slot_chain_continuity():
    # end-of-slot phase equals next start phase for random data, any pulse
    rng = np.random.default_rng(0)
    for pulse in PulseShape:
        p = make_params(M=4, gamma=2, pulse=pulse)
        st = PhaseState(theta=0.2, history=(0.0,))
        prev_end = None
        for _ in range(40):
            d = float(rng.choice(p.alphabet))
            window = np.array(list(st.history) + [d])
            start = symbol_phase(p, st, window, None, 0.0)
            end = symbol_phase(p, st, window, None, p.T)
            if prev_end is not None:
                jump = abs(start - prev_end)
                assert min(jump % 1.0, 1.0 - jump % 1.0) < 1e-10
            _, st = modulate_symbol(p, st, d)
            prev_end = end


def test_conventional_reduction_matches_stream_encoder():
    # single-antenna modulate_symbol chain == the vectorised stream encoder
    from stccpm.coding import encode_streams, single_antenna_reference

    rng = np.random.default_rng(1)
    p = make_params(M=4, gamma=2, oversampling=16)
    d = rng.choice(p.alphabet, size=30).astype(float)
    stream = encode_streams(single_antenna_reference(), p, d[None])[0, 0]

    st = PhaseState(theta=0.0, history=(0.0,))
    chain = []
    for sym in d:
        wave, st = modulate_symbol(p, st, sym)
        chain.append(wave.samples)
    chain = np.concatenate(chain)
    assert np.max(np.abs(chain - stream[: len(chain)])) < 1e-12
