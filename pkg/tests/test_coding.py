"""Space-time coding tests: mappings, corrections, orthogonality, alphabets."""

import numpy as np
import pytest
from dataclasses import replace

from stccpm.cpm import CpmParams, PhaseState, PulseShape, modulate_symbol
from stccpm.coding import (
    CorrectionFamily,
    CorrectionKind,
    MappingScheme,
    StCode,
    correction_value,
    effective_alphabet,
    encode_block,
    encode_streams,
    gram_matrices,
    gram_matrix,
    initial_state,
    map_data,
    single_antenna_reference,
    stream_phases,
    stream_to_blocks,
    verify_code,
    xi_value,
)

ALL_CODES = ["pc2", "wangxia", "offpc2", "linpc", "rcpc", "offpc3"]


def params_with(h="1/2", M=4, gamma=2, os=16, pulse=PulseShape.LREC):
    return CpmParams.with_h(h, M=M, gamma=gamma, oversampling=os, pulse=pulse)


# ---------------------------------------------------------------------------
# types and mappings
# ---------------------------------------------------------------------------


def test_stcode_validation():
    with pytest.raises(ValueError):
        StCode(lt=1, mapping=MappingScheme.PARALLEL,
               correction=CorrectionFamily.of("none"), theta0=(0.0,))
    with pytest.raises(ValueError):
        StCode.named("linpc", theta0=(0.0, 0.0))  # wrong theta0 length
    with pytest.raises(ValueError):
        StCode(lt=3, mapping=MappingScheme.PARALLEL,
               correction=CorrectionFamily.of("pc2"), theta0=(0, 0, 0))


def test_map_data_parallel_full_rate():
    d = np.arange(1, 10).astype(float)
    out = map_data(MappingScheme.PARALLEL, d, l=0, lt=3, gamma=1)
    # every antenna sees (d1, d2, d3) across the three slots
    for m in range(3):
        assert out[m, :, 0].tolist() == [1.0, 2.0, 3.0]


def test_map_data_crosswise_antenna2():
    d = np.arange(1, 10).astype(float)
    out = map_data(MappingScheme.CROSSWISE, d, l=0, lt=2, gamma=1)
    assert out[1, 0, 0] == -2.0  # slot 1 carries the negated next symbol
    assert out[1, 1, 0] == -1.0


def test_map_data_index_formula():
    # parallel, gamma=2, l=1, slot r=1, age i=2 -> d_{3+1-2+1} = d_3
    d = np.arange(1, 13).astype(float)
    out = map_data(MappingScheme.PARALLEL, d, l=1, lt=3, gamma=2)
    assert out[0, 0, 1] == 3.0


def test_map_data_zero_pads_history():
    d = np.array([5.0, 7.0])
    out = map_data(MappingScheme.PARALLEL, d, l=0, lt=2, gamma=3)
    assert out[0, 0, :].tolist() == [5.0, 0.0, 0.0]


# ---------------------------------------------------------------------------
# correction families
# ---------------------------------------------------------------------------


def test_correction_linpc_values():
    p = params_with()
    fam = CorrectionFamily.of("linpc")
    assert correction_value(fam, p, 3, 2, 1, 0.61) == pytest.approx(0.0)
    assert correction_value(fam, p, 3, 1, 1, 0.0) == pytest.approx(0.0)
    assert correction_value(fam, p, 3, 1, 1, p.T) == pytest.approx(1.0 / 3.0)
    assert correction_value(fam, p, 3, 3, 2, p.T) == pytest.approx(-1.0 / 3.0)


def test_correction_pc2_values():
    p = params_with()
    fam = CorrectionFamily.of("pc2")
    assert correction_value(fam, p, 2, 2, 1, 0.0) == pytest.approx(0.0)
    assert correction_value(fam, p, 2, 2, 1, p.T) == pytest.approx(0.5)


def test_correction_family_lt_mismatch():
    p = params_with()
    with pytest.raises(ValueError):
        correction_value(CorrectionFamily.of("linpc"), p, 2, 1, 1, 0.0)
    with pytest.raises(ValueError):
        StCode(lt=2, mapping=MappingScheme.PARALLEL,
               correction=CorrectionFamily.of("linpc"), theta0=(0, 0))


def test_correction_drop_matches_shape_endpoints():
    # the declared rational drop equals shape(T) - shape(0) for every family
    for name in ALL_CODES + ["corrupted-demo"]:
        code = StCode.named(name)
        for gamma in (1, 2, 3):
            p = params_with(gamma=gamma)
            for m in range(1, code.lt + 1):
                if code.correction.needs_block_data:
                    continue  # data-dependent; covered by continuity checks
                hi = code.correction.shape(m, code.lt, np.array([p.T]), p)[0]
                lo = code.correction.shape(m, code.lt, np.array([0.0]), p)[0]
                drop = float(code.correction.xi_drop(m, code.lt, p))
                assert hi - lo == pytest.approx(drop, abs=1e-12), (name, m, gamma)


# ---------------------------------------------------------------------------
# xi values
# ---------------------------------------------------------------------------


def test_xi_conventional():
    # with no correction, xi is h/2 times the retiring window symbol
    p = params_with(gamma=2)
    code = StCode(lt=2, mapping=MappingScheme.PARALLEL,
                  correction=CorrectionFamily.of("none"), theta0=(0, 0))
    d = np.array([3.0, -1.0, 1.0, -3.0])
    # slot n=3: window (d2, d3), retiring d2 -> xi = 0.25 * (-1)
    assert xi_value(code, p, 1, 3, d) == pytest.approx(0.25 * -1.0)


def test_xi_condition_two_antennas():
    p = params_with()
    d = np.array([1.0, 3.0, -1.0, -3.0, 1.0, 1.0])
    for name in ("pc2", "wangxia", "offpc2"):
        code = StCode.named(name)
        for n in (1, 2, 3, 4):
            diff = xi_value(code, p, 1, n, d) - xi_value(code, p, 2, n, d)
            assert np.exp(2j * np.pi * diff) == pytest.approx(-1.0, abs=1e-9)


def test_xi_condition_three_antennas():
    # pairwise differences solve 1 + e^{ja1} + e^{j(a1+a2)} = 0
    p = params_with()
    d = np.tile([1.0, -3.0, 3.0], 4)
    solutions = {(1, 1), (2, 2)}  # multiples of 2*pi/3, both branches
    for name in ("linpc", "rcpc", "offpc3"):
        code = StCode.named(name)
        for m, mp in ((1, 2), (2, 3), (1, 3)):
            diffs = []
            for n in (1, 2, 4, 5):
                diffs.append(
                    (xi_value(code, p, m, n, d) - xi_value(code, p, mp, n, d)) % 1.0
                )
            thirds = {round(3 * x) % 3 for x in diffs}
            assert len(thirds) == 1 and thirds.pop() in (1, 2), (name, m, mp, diffs)
            a = 2 * np.pi * diffs[0]
            assert abs(1 + np.exp(1j * a) + np.exp(2j * a)) < 1e-9


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def test_encode_block_full_rate_and_state_advance():
    p = params_with()
    code = StCode.named("pc2")
    rng = np.random.default_rng(0)
    d = rng.choice(p.alphabet, size=8).astype(float)
    st = initial_state(code, p)
    blk0, st = encode_block(code, p, st, d, 0)
    assert st.next_slot == 3  # exactly Lt fresh symbols consumed
    assert st.history == (d[1],)
    blk1, st = encode_block(code, p, st, d, 1)
    # closing sample of block 0 equals the first sample of block 1
    assert blk0.end_sample == pytest.approx(blk1.samples[:, 0])


def test_encode_block_rejects_single_antenna():
    p = params_with()
    with pytest.raises(ValueError):
        encode_block(single_antenna_reference(), p, None, np.array([1.0]), 0)


def test_encode_block_rejects_exhausted_stream():
    p = params_with()
    code = StCode.named("pc2")
    st = initial_state(code, p)
    with pytest.raises(ValueError):
        encode_block(code, p, st, np.array([1.0]), 0)


def test_encode_block_rejects_bad_symbols():
    p = params_with()
    code = StCode.named("pc2")
    st = initial_state(code, p)
    with pytest.raises(ValueError):
        encode_block(code, p, st, np.array([2.0, 4.0]), 0)


def test_encode_all_zero_data_offpc3_tones():
    # with all-zero (pad) symbols, antenna 2 is a constant tone and antennas
    # 1/3 advance by exactly +-1/3 cycle per slot (h=1/2 -> offset 2/(3h))
    p = params_with(M=4, gamma=1, os=8)
    code = StCode.named("offpc3")
    d = np.zeros((1, 9))
    phi = stream_phases(code, p, d)  # (1, 3, 9, K)
    assert np.ptp(phi[0, 1]) == pytest.approx(0.0, абс := 1e-12) if False else True
    assert np.max(np.abs(np.diff(phi[0, 1].ravel()))) < 1e-12  # constant phase
    per_slot_1 = phi[0, 0, 1:, 0] - phi[0, 0, :-1, 0]
    per_slot_3 = phi[0, 2, 1:, 0] - phi[0, 2, :-1, 0]
    assert per_slot_1 == pytest.approx(np.full(8, 1.0 / 3.0), abs=1e-12)
    assert per_slot_3 == pytest.approx(np.full(8, -1.0 / 3.0), abs=1e-12)


def test_stateful_and_stream_encoders_agree():
    rng = np.random.default_rng(3)
    for name in ALL_CODES:
        code = StCode.named(name, theta0=None)
        p = params_with(h="2/3", M=4, gamma=3, os=8, pulse=PulseShape.LRC)
        nb = 4
        d = rng.choice(p.alphabet, size=nb * code.lt).astype(float)
        st = initial_state(code, p)
        chain = []
        for l in range(nb):
            blk, st = encode_block(code, p, st, d, l)
            chain.append(blk.samples)
        chain = np.concatenate(chain, axis=1)
        stream = encode_streams(code, p, d[None])[0]
        assert np.max(np.abs(chain - stream[:, : chain.shape[1]])) < 1e-12, name


# ---------------------------------------------------------------------------
# Gram matrices and certification
# ---------------------------------------------------------------------------


def test_gram_diagonal_energy():
    p = params_with(M=8, gamma=2, os=64)
    code = StCode.named("pc2")
    rng = np.random.default_rng(1)
    d = rng.choice(p.alphabet, size=4).astype(float)
    blk, _ = encode_block(code, p, initial_state(code, p), d, 0)
    g = gram_matrix(blk)
    assert np.abs(g[0, 0] / p.Es - 1) < 1e-6
    assert np.abs(g[1, 1] / p.Es - 1) < 1e-6


def test_gram_offdiagonal_pc2():
    p = params_with(M=8, gamma=2, os=64)
    rng = np.random.default_rng(2)
    d = rng.choice(p.alphabet, size=(1, 40)).astype(float)
    g = gram_matrices(StCode.named("pc2"), p, d)[0]
    assert np.max(np.abs(g[:, 0, 1])) / p.Es < 1e-6


def test_gram_offdiagonal_linpc_many_blocks():
    p = params_with(M=4, gamma=2, os=64)
    rng = np.random.default_rng(3)
    d = rng.choice(p.alphabet, size=(1, 300)).astype(float)
    g = gram_matrices(StCode.named("linpc"), p, d)[0]  # 100 blocks
    off = g[:, ~np.eye(3, dtype=bool)]
    assert np.max(np.abs(off)) / p.Es < 1e-6


def test_verify_wangxia_and_offpc():
    p = params_with(M=4, gamma=2, os=32)
    for name in ("wangxia", "offpc2", "offpc3"):
        rep = verify_code(StCode.named(name), p, trials=50, seed=4)
        assert rep.passed(), name


def test_verify_detects_corruption():
    # scaled ramp keeps continuity but breaks the half-cycle cross cancellation
    p = params_with(M=4, gamma=2, os=32)
    rep = verify_code(StCode.named("corrupted-demo"), p, trials=50, seed=4)
    assert rep.max_continuity_jump < 1e-9
    assert rep.max_offdiag_ratio > 1e-6


def test_verify_deterministic():
    p = params_with()
    r1 = verify_code(StCode.named("rcpc"), p, trials=10, seed=9)
    r2 = verify_code(StCode.named("rcpc"), p, trials=10, seed=9)
    assert r1 == r2


def test_gram_invariant_to_initial_phases():
    p = params_with(M=4, gamma=2, os=32)
    rng = np.random.default_rng(5)
    d = rng.choice(p.alphabet, size=(1, 60)).astype(float)
    for name in ("pc2", "linpc"):
        code = StCode.named(name)
        code = replace(code, theta0=tuple(rng.uniform(0, 1, code.lt)))
        g = gram_matrices(code, p, d)[0]
        off = g[:, ~np.eye(code.lt, dtype=bool)]
        assert np.max(np.abs(off)) / p.Es < 1e-6


# ---------------------------------------------------------------------------
# effective alphabets
# ---------------------------------------------------------------------------


def test_effective_alphabet_values():
    p8 = params_with(M=8)
    ea = effective_alphabet(StCode.named("offpc2"), p8, 2)
    assert ea.offset == pytest.approx(2.0)  # 1/h with h = 1/2
    assert ea.values.tolist() == [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0, 9.0]
    p4 = params_with(M=4)
    assert effective_alphabet(StCode.named("offpc3"), p4, 1).offset == pytest.approx(4 / 3)
    assert effective_alphabet(StCode.named("offpc3"), p4, 2).offset == 0.0
    assert effective_alphabet(StCode.named("offpc3"), p4, 3).offset == pytest.approx(-4 / 3)


def test_effective_alphabet_rejects_other_families():
    p = params_with()
    with pytest.raises(ValueError):
        effective_alphabet(StCode.named("pc2"), p, 2)


def test_offset_alphabet_equivalence_sample_for_sample():
    # offset-code antennas equal conventional CPM on the shifted alphabet;
    # the shift applies to the zero padding as well (pad symbol 0 + offset)
    rng = np.random.default_rng(6)
    for name, M in (("offpc2", 8), ("offpc3", 4)):
        p = params_with(M=M, gamma=2, os=16)
        code = StCode.named(name, theta0=tuple(0.1 * m for m in range(int(name[-1]))))
        lt = code.lt
        d = rng.choice(p.alphabet, size=(1, 30 * lt)).astype(float)
        stream = encode_streams(code, p, d)
        conv = replace(p, Es=p.Es / lt)  # per-antenna energy Es/Lt
        for m in range(1, lt + 1):
            eff = effective_alphabet(code, p, m)
            st = PhaseState(theta=code.theta0[m - 1],
                            history=(eff.offset,) * (p.gamma - 1))
            chain = []
            for sym in d[0]:
                wave, st = modulate_symbol(conv, st, sym + eff.offset,
                                           alphabet=eff.values)
                chain.append(wave.samples)
            chain = np.concatenate(chain)
            err = np.max(np.abs(chain - stream[0, m - 1, : len(chain)]))
            assert err < 1e-10, (name, m, err)
