"""Simulation laboratory for L2-orthogonal space-time coded CPM."""

from .cpm import (
    CpmParams,
    PhaseState,
    PulseShape,
    Waveform,
    modulate_symbol,
    phase_pulse,
    symbol_phase,
)
from .coding import (
    CorrectionFamily,
    CorrectionKind,
    EffectiveAlphabet,
    EncoderState,
    MappingScheme,
    SignalBlock,
    StCode,
    VerifyReport,
    correction_value,
    effective_alphabet,
    encode_block,
    encode_streams,
    gram_matrix,
    initial_state,
    map_data,
    single_antenna_reference,
    verify_code,
    xi_value,
)
from .channel import (
    ChannelRealization,
    apply_channel,
    draw_fading,
    ebn0_db_to_n0,
)
from .receiver import (
    DecoderConfig,
    DecoderMetric,
    Trellis,
    build_trellis,
    exhaustive_ml,
    metric_blockwise,
    metric_symbolwise,
    viterbi_decode,
)
from .analysis import (
    BerCurve,
    PhaseSweepGrid,
    PsdEstimate,
    estimate_diversity_slope,
    run_ber,
    spectral_shift,
    sweep_initial_phases,
    welch_psd,
)

__version__ = "0.1.0"
