"""Command-line front end: verify / encode / decode / ber / psd / sweep.

Every run writes a ``manifest.json`` (full config, seeds, tool version) next
to its outputs, data files are written atomically (temp file + rename), and
the report path renders matplotlib figures alongside the delimited output
unless ``--no-figures`` is given.  Exit codes: 0 pass, 1 check failed,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cpm import CpmParams, PulseShape
from .coding import (
    StCode,
    encode_streams,
    single_antenna_reference,
    stream_to_blocks,
    verify_code,
)
from .channel import apply_channel_stream, draw_fading_blocks, ebn0_db_to_n0
from .receiver import DecoderConfig, build_trellis, decode_batch
from .analysis import (
    bit_errors,
    run_ber,
    estimate_diversity_slope,
    spectral_shift,
    sweep_initial_phases,
    symbols_from_bits,
    welch_psd,
)

CODE_NAMES = ["pc2", "wangxia", "offpc2", "linpc", "rcpc", "offpc3", "corrupted-demo"]
GRAM_TOL = 1e-6
CONTINUITY_TOL = 1e-9


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


def _fail_usage(err: ConfigError) -> int:
    sys.stderr.write(json.dumps({"error": {"field": err.field, "message": err.message}}) + "\n")
    return 2


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def _parse_h(text: str) -> Fraction:
    try:
        if "/" in text:
            num, den = text.split("/")
            return Fraction(int(num), int(den))
        return Fraction(int(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError("h", f"h must be a rational like 1/2, got {text!r}")


def _parse_ebn0(text: str):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("ebn0", "range must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("ebn0", "range step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(p) for p in text.split(",") if p]


def _parse_theta0(text: str, lt: int):
    vals = [float(p) for p in text.split(",") if p != ""]
    if len(vals) != lt:
        raise ConfigError("theta0", f"theta0 needs {lt} comma-separated values")
    return tuple(vals)


def build_config(args) -> dict:
    """Merge config-file defaults with flag overrides (flags win)."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key, val in vars(args).items():
        if key in ("func", "config") or val is None:
            continue
        cfg[key] = val
    return cfg


def make_params(cfg) -> CpmParams:
    h = _parse_h(str(cfg.get("h", "1/2")))
    M = int(cfg.get("M", 4))
    if M < 2 or (M & (M - 1)) != 0:
        raise ConfigError("M", "M must be a power of 2")
    gamma = int(cfg.get("gamma", 2))
    if gamma < 1:
        raise ConfigError("gamma", "gamma must be >= 1")
    pulse = str(cfg.get("pulse", "lrec")).lower()
    if pulse not in ("lrec", "lrc"):
        raise ConfigError("pulse", "pulse must be lrec or lrc")
    os_ = int(cfg.get("oversampling", 8))
    if os_ < 8:
        raise ConfigError("oversampling", "oversampling must be >= 8")
    try:
        return CpmParams.with_h(
            h, M=M, gamma=gamma, pulse=PulseShape(pulse), oversampling=os_,
            Es=float(cfg.get("es", 1.0)), T=float(cfg.get("t", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError("params", str(exc))


def make_code(cfg, params: CpmParams):
    name = str(cfg.get("code", "pc2"))
    if name == "cpm1":
        theta = cfg.get("theta0")
        return single_antenna_reference(float(theta.split(",")[0]) if theta else 0.0)
    if name not in CODE_NAMES:
        raise ConfigError("code", f"unknown code {name!r}; choose from {CODE_NAMES + ['cpm1']}")
    code = StCode.named(name)
    if cfg.get("theta0"):
        code = replace(code, theta0=_parse_theta0(str(cfg["theta0"]), code.lt))
    return code


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue().encode())


def write_json(path: Path, obj):
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def write_manifest(out: Path, command: str, cfg: dict):
    manifest = {
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items())},
        "version": __version__,
        "numpy": np.__version__,
    }
    write_json(out / "manifest.json", manifest)


def _figure_backend():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    cfg = build_config(args)
    params = make_params(cfg)
    code = make_code(cfg, params)
    if code.lt < 2:
        raise ConfigError("code", "verify needs a space-time code (Lt >= 2)")
    out = Path(cfg.get("out", "out"))
    report = verify_code(code, params, trials=int(cfg.get("trials", 50)),
                         seed=int(cfg.get("seed", 0)))
    ok = report.passed(GRAM_TOL, CONTINUITY_TOL)
    write_manifest(out, "verify", cfg)
    write_json(out / "verify_report.json", {
        "code": cfg.get("code", "pc2"),
        "max_offdiag_ratio": report.max_offdiag_ratio,
        "max_diag_error": report.max_diag_error,
        "max_continuity_jump": report.max_continuity_jump,
        "trials": report.trials,
        "gram_tolerance": GRAM_TOL,
        "continuity_tolerance": CONTINUITY_TOL,
        "passed": ok,
    })
    print(f"verify {cfg.get('code', 'pc2')}: "
          f"offdiag {report.max_offdiag_ratio:.3e}, "
          f"diag {report.max_diag_error:.3e}, "
          f"jump {report.max_continuity_jump:.3e} -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _encode_payload(cfg, params, code, rng):
    blocks = int(cfg.get("blocks", 100))
    bps = params.bits_per_symbol
    n_sym = blocks * code.lt
    raw = rng.integers(0, 2, size=(1, n_sym * bps))
    d = symbols_from_bits(raw, params.M)
    stream = encode_streams(code, params, d)
    return d, stream


def cmd_encode(args) -> int:
    cfg = build_config(args)
    params = make_params(cfg)
    code = make_code(cfg, params)
    out = Path(cfg.get("out", "out"))
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    d, stream = _encode_payload(cfg, params, code, rng)
    lt, n_samp = stream.shape[1], stream.shape[2]

    # interleaved float64 I/Q, antennas concatenated in order
    iq = np.empty((lt, n_samp, 2))
    iq[:, :, 0] = stream[0].real
    iq[:, :, 1] = stream[0].imag
    _atomic_write(out / "signal.iq", iq.astype("<f8").tobytes())
    write_csv(out / "symbols.csv", ["index", "symbol"],
              [(i + 1, int(v)) for i, v in enumerate(d[0])])
    sidecar = {
        "format": "interleaved little-endian float64 I/Q",
        "layout": "antenna-major: antenna m occupies samples [m*n_samples, (m+1)*n_samples)",
        "antennas": lt,
        "n_samples": n_samp,
        "dt": params.dt,
        "Es": params.Es,
        "T": params.T,
        "oversampling": params.oversampling,
        "code": cfg.get("code", "pc2"),
        "h": f"{params.h.numerator}/{params.h.denominator}",
        "M": params.M,
        "gamma": params.gamma,
        "pulse": params.pulse.value,
        "theta0": list(code.theta0),
        "n_blocks": int(cfg.get("blocks", 100)),
        "symbols_file": "symbols.csv",
    }
    write_json(out / "signal.json", sidecar)
    write_manifest(out, "encode", cfg)
    print(f"encoded {cfg.get('blocks', 100)} blocks -> {out / 'signal.iq'}")
    return 0


def read_iq(path: Path, sidecar: dict) -> np.ndarray:
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    lt, n = sidecar["antennas"], sidecar["n_samples"]
    iq = raw.reshape(lt, n, 2)
    return iq[:, :, 0] + 1j * iq[:, :, 1]


def cmd_decode(args) -> int:
    cfg = build_config(args)
    in_dir = Path(cfg.get("in_dir", "out"))
    out = Path(cfg.get("out", "out"))
    with open(in_dir / "signal.json") as fh:
        sidecar = json.load(fh)
    cfg_sig = {
        "code": sidecar["code"], "h": sidecar["h"], "M": sidecar["M"],
        "gamma": sidecar["gamma"], "pulse": sidecar["pulse"],
        "oversampling": sidecar["oversampling"],
        "theta0": ",".join(str(t) for t in sidecar["theta0"]),
    }
    params = make_params(cfg_sig)
    code = make_code(cfg_sig, params)
    stream = read_iq(in_dir / "signal.iq", sidecar)[None]
    lt = code.lt
    nb = sidecar["n_blocks"]
    lr = int(cfg.get("lr", 1))
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    ebn0 = cfg.get("ebn0_db")
    if ebn0 is None:
        alpha = np.ones((1, nb, 1, lt), dtype=complex) if lt > 1 else np.ones((1, nb, 1, 1), dtype=complex)
        alpha = alpha / 1.0
        n0 = 0.0
        lr = 1
    else:
        alpha = draw_fading_blocks(lr, lt, (1, nb), rng)
        n0 = ebn0_db_to_n0(float(ebn0), params.Es, params.bits_per_symbol)
    y = apply_channel_stream(stream, alpha, n0, params.dt, lt,
                             params.oversampling, rng=rng)
    trellis = build_trellis(code, params)
    config = DecoderConfig(metric=str(cfg.get("metric", "d2")),
                           truncation=int(cfg.get("truncation", 10)))
    est, _ = decode_batch(trellis, y, alpha, config=config)
    write_csv(out / "decoded.csv", ["index", "symbol"],
              [(i + 1, int(v)) for i, v in enumerate(est[0])])
    report = {"n_symbols": int(est.shape[1]), "ebn0_db": ebn0, "lr": lr, "seed": seed}
    symfile = in_dir / sidecar.get("symbols_file", "symbols.csv")
    if symfile.exists():
        truth = np.array([int(row[1]) for row in _read_csv_rows(symfile)])
        errs = int(np.sum(truth != est[0].astype(int)))
        report["symbol_errors"] = errs
        report["bit_errors"] = bit_errors(truth.astype(float), est[0], params.M)
        report["ser"] = errs / len(truth)
    write_json(out / "decode_report.json", report)
    write_manifest(out, "decode", cfg)
    print(f"decoded {est.shape[1]} symbols -> {out / 'decoded.csv'}"
          + (f" (SER {report['ser']:.3g})" if "ser" in report else ""))
    return 0


def _read_csv_rows(path: Path):
    with open(path) as fh:
        reader = csv.reader(fh)
        next(reader)
        return list(reader)


def cmd_ber(args) -> int:
    cfg = build_config(args)
    params = make_params(cfg)
    code = make_code(cfg, params)
    out = Path(cfg.get("out", "out"))
    ebn0 = _parse_ebn0(str(cfg.get("ebn0", "0:2:12")))
    decoder = DecoderConfig(metric=str(cfg.get("metric", "d2")),
                            truncation=int(cfg.get("truncation", 10)))
    jobs = int(cfg.get("jobs", 1))
    seed = int(cfg.get("seed", 0))
    kwargs = dict(
        lr=int(cfg.get("lr", 1)),
        seed=seed,
        min_errors=int(cfg.get("min_errors", 100)),
        max_bits=int(cfg.get("max_bits", 2_000_000)),
        decoder=decoder,
        streams=int(cfg.get("streams", 64)),
        blocks_per_stream=int(cfg.get("blocks_per_stream", 50)),
    )
    if jobs > 1:
        # points are independent and carry their own counter-derived seeds,
        # so the result is identical for any parallelism degree
        from multiprocessing import get_context

        with get_context("spawn").Pool(jobs) as pool:
            results = pool.starmap(
                _ber_point_task,
                [(code, params, list(ebn0), i, kwargs) for i in range(len(ebn0))],
            )
        curve = run_ber(code, params, ebn0_db=[], **kwargs)
        curve.points = results
    else:
        curve = run_ber(code, params, ebn0_db=ebn0, **kwargs)
    rows = [
        (p.ebn0_db, p.errors, p.bits, f"{p.ber:.8e}", f"{p.ci_lo:.8e}", f"{p.ci_hi:.8e}")
        for p in curve.points
    ]
    write_csv(out / "ber_curve.csv", ["ebn0_db", "errors", "bits", "ber", "ci_lo", "ci_hi"], rows)
    write_manifest(out, "ber", cfg)
    if not cfg.get("no_figures"):
        plt = _figure_backend()
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ber = np.array([max(p.ber, 1e-12) for p in curve.points])
        yerr = np.array([
            [max(p.ber - p.ci_lo, 0) for p in curve.points],
            [max(p.ci_hi - p.ber, 0) for p in curve.points],
        ])
        ax.errorbar(curve.ebn0(), ber, yerr=yerr, marker="o", capsize=3)
        ax.set_yscale("log")
        ax.set_xlabel("Eb/N0 (dB)")
        ax.set_ylabel("BER")
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "ber_curve.png", dpi=150)
        plt.close(fig)
    print(f"ber: {len(curve.points)} points -> {out / 'ber_curve.csv'}")
    return 0


def _ber_point_task(code, params, ebn0_list, idx, kwargs):
    # single point, seeded by its position in the full list so that the
    # result matches the sequential run exactly
    from .analysis import BerPoint, _simulate_point, wilson_interval

    trellis = build_trellis(code, params)
    errors, bits = _simulate_point(
        trellis, kwargs["lr"], float(ebn0_list[idx]), kwargs["seed"], idx,
        kwargs["min_errors"], kwargs["max_bits"], kwargs["decoder"],
        kwargs["streams"], kwargs["blocks_per_stream"],
    )
    lo, hi = wilson_interval(errors, bits)
    return BerPoint(float(ebn0_list[idx]), errors, bits, errors / bits, lo, hi)


def cmd_psd(args) -> int:
    cfg = build_config(args)
    params = make_params(cfg)
    code = make_code(cfg, params)
    out = Path(cfg.get("out", "out"))
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    cfg.setdefault("blocks", 2048)
    _, stream = _encode_payload(cfg, params, code, rng)
    bit_time = params.T / params.bits_per_symbol
    nperseg = int(cfg.get("nperseg", 4096))
    antennas = cfg.get("antenna", "all")
    if antennas == "all":
        ants = list(range(1, code.lt + 1))
    else:
        ants = [int(antennas)]
        if not all(1 <= a <= code.lt for a in ants):
            raise ConfigError("antenna", f"antenna must be in 1..{code.lt}")
    psds = {m: welch_psd(stream[0, m - 1], params.dt, bit_time, nperseg=nperseg)
            for m in ants}
    first = psds[ants[0]]
    header = ["f_td"] + [f"power_db_antenna{m}" for m in ants]
    rows = zip(first.f_td, *[psds[m].power_db for m in ants])
    write_csv(out / "psd.csv", header, [tuple(f"{v:.8e}" for v in row) for row in rows])
    shifts = {}
    if len(ants) > 1:
        ref = ants[0]
        for m in ants[1:]:
            shifts[f"{ref}->{m}"] = spectral_shift(psds[ref], psds[m])
        write_json(out / "shifts.json", shifts)
    write_manifest(out, "psd", cfg)
    if not cfg.get("no_figures"):
        plt = _figure_backend()
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for m in ants:
            ax.plot(psds[m].f_td, psds[m].power_db, label=f"antenna {m}", lw=0.9)
        ax.set_xlabel("f * Td")
        ax.set_ylabel("PSD (dB/Hz)")
        ax.set_xlim(-3, 3)
        ax.legend()
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / "psd.png", dpi=150)
        plt.close(fig)
    print(f"psd: antennas {ants} -> {out / 'psd.csv'}"
          + (f", shifts {shifts}" if shifts else ""))
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    params = make_params(cfg)
    code = make_code(cfg, params)
    if code.lt != 3:
        raise ConfigError("code", "sweep needs a three-antenna code")
    out = Path(cfg.get("out", "out"))
    grid = sweep_initial_phases(
        code, params,
        ebn0_db=float(cfg.get("ebn0_db", 13.0)),
        grid=int(cfg.get("grid", 8)),
        seed=int(cfg.get("seed", 0)),
        lr=int(cfg.get("lr", 1)),
        min_cell_errors=int(cfg.get("min_cell_errors", 60)),
        max_cell_bits=int(cfg.get("max_cell_bits", 120_000)),
    )
    rows = []
    for i, t1 in enumerate(grid.theta1):
        for j, t2 in enumerate(grid.theta2):
            rows.append((f"{t1:.6f}", f"{t2:.6f}", f"{grid.ber[i, j]:.8e}"))
    write_csv(out / "sweep.csv", ["theta1", "theta2", "ber"], rows)
    write_json(out / "sweep_report.json", {
        "argmin_cell": list(grid.argmin_cell),
        "argmin_theta": [float(grid.theta1[grid.argmin_cell[0]]),
                         float(grid.theta2[grid.argmin_cell[1]])],
        "minmax_ratio": grid.minmax_ratio,
        "ebn0_db": grid.ebn0_db,
    })
    write_manifest(out, "sweep", cfg)
    if not cfg.get("no_figures"):
        plt = _figure_backend()
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        im = ax.imshow(np.log10(np.maximum(grid.ber, 1e-12)), origin="lower",
                       extent=(0, 1, 0, 1), aspect="auto", cmap="viridis")
        fig.colorbar(im, ax=ax, label="log10 BER")
        ax.set_xlabel("theta2 (cycles)")
        ax.set_ylabel("theta1 (cycles)")
        fig.tight_layout()
        fig.savefig(out / "sweep.png", dpi=150)
        plt.close(fig)
    print(f"sweep: {grid.ber.size} cells, argmin {grid.argmin_cell}, "
          f"max/min {grid.minmax_ratio:.2f} -> {out / 'sweep.csv'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, default_code="pc2"):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--code", default=None, help=f"code family ({', '.join(CODE_NAMES + ['cpm1'])})")
    p.add_argument("--h", default=None, help='modulation index, e.g. "1/2"')
    p.add_argument("--M", type=int, default=None, help="alphabet size (power of 2)")
    p.add_argument("--gamma", type=int, default=None, help="memory length")
    p.add_argument("--pulse", default=None, choices=["lrec", "lrc"])
    p.add_argument("--oversampling", type=int, default=None)
    p.add_argument("--theta0", default=None, help="initial phases, comma separated cycles")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: out)")
    p.add_argument("--no-figures", dest="no_figures", action="store_true", default=None)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stccpm",
                                 description="L2-orthogonal space-time CPM laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="certify orthogonality and continuity")
    _add_common(p)
    p.add_argument("--trials", type=int, default=None, help="random blocks to test")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("encode", help="encode random data to an I/Q file")
    _add_common(p)
    p.add_argument("--blocks", type=int, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an encoded I/Q file")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", default=None, help="directory with signal.iq/signal.json")
    p.add_argument("--ebn0-db", dest="ebn0_db", type=float, default=None,
                   help="apply Rayleigh fading and noise at this Eb/N0")
    p.add_argument("--lr", type=int, default=None)
    p.add_argument("--metric", default=None, choices=["d1", "d2", "d3"])
    p.add_argument("--truncation", type=int, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("ber", help="Monte Carlo BER curve")
    _add_common(p)
    p.add_argument("--ebn0", default=None, help='points, "0:2:16" or "4,8,12"')
    p.add_argument("--lr", type=int, default=None)
    p.add_argument("--metric", default=None, choices=["d1", "d2", "d3"])
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("--min-errors", dest="min_errors", type=int, default=None)
    p.add_argument("--max-bits", dest="max_bits", type=int, default=None)
    p.add_argument("--streams", type=int, default=None)
    p.add_argument("--blocks-per-stream", dest="blocks_per_stream", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes over points")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("psd", help="Welch PSD per antenna")
    _add_common(p)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--antenna", default=None, help='antenna index or "all"')
    p.add_argument("--nperseg", type=int, default=None)
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("sweep", help="BER over initial-phase grid (Lt=3)")
    _add_common(p)
    p.add_argument("--ebn0-db", dest="ebn0_db", type=float, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--lr", type=int, default=None)
    p.add_argument("--min-cell-errors", dest="min_cell_errors", type=int, default=None)
    p.add_argument("--max-cell-bits", dest="max_cell_bits", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        return _fail_usage(err)


if __name__ == "__main__":
    sys.exit(main())
