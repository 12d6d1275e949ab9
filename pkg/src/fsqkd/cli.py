"""Command-line entry point.

Exit codes: 0 success, 1 configuration or input error, 2 runtime failure
(including reconciliation that did not converge; its report is still
written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import BeamsplitterAttackConfig, eve_knowledge_fraction, run_attacked_session
from .bitstrings import format_bits, read_bits
from .config import ConfigError, build, load_document, resolve_config_path, validate_config
from .devices import estimate_mean_photons_from_dualfire, MIN_DUALFIRE_GATES
from .linkbudget import format_table, link_budget
from .protocol import (
    B92_EFFICIENCY,
    SessionResult,
    expected_bit_rate,
    run_session,
    theoretical_detection_probability,
)
from .reconciliation import reconcile_2d
from .streams import spawn_seeds
from .vernam import KeyExhaustedError, KeyReuseError, OneTimePad

COMMANDS = ("session", "attack", "reconcile", "linkbudget", "otp")


class UsageError(Exception):
    pass


def _clean(obj):
    """Make a report JSON-safe: NaN becomes null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(Path(out), text)
    else:
        sys.stdout.write(text)


def _load(kind: str, path: str | None, seed: int | None) -> dict:
    doc = load_document(resolve_config_path(path)) if path else {}
    if seed is not None:
        if not isinstance(doc, dict):
            raise ConfigError(["<root>: expected an object"])
        doc = dict(doc)
        doc["shuffle_seed" if kind == "reconcile" else "seed"] = seed
    return validate_config(doc, kind)


def session_summary(result: SessionResult) -> dict:
    cfg = result.config
    p_b = theoretical_detection_probability(cfg.mean_photon_number, cfg.channel.coupling_efficiency,
                                            cfg.detector.efficiency, B92_EFFICIENCY)
    summary = {
        "sifted_rate_hz": result.sifted_rate_hz,
        "ber": result.ber,
        "dual_fire_count": result.dual_fire_count,
        "dual_fire_rate_hz": result.dual_fire_rate_hz,
        "counts": {
            "pulses": cfg.pulse_count,
            "clicks": result.click_count,
            "sifted": result.sifted_count,
            "errors": result.error_count,
            "dual_fires": result.dual_fire_count,
            "background_sifted": result.background_click_count,
            "dark_sifted": result.dark_click_count,
        },
        "duration_s": cfg.duration_s,
        "detection_frequency": result.detection_frequency,
        "predicted": {
            "detection_probability": p_b,
            "bit_rate_hz": expected_bit_rate(cfg.pulse_rate_hz, p_b),
        },
    }
    if cfg.pulse_count >= MIN_DUALFIRE_GATES and not cfg.force_single_photon:
        try:
            est = estimate_mean_photons_from_dualfire(result.dual_fire_count, cfg.pulse_count,
                                                      cfg.channel, cfg.detector)
            summary["dual_fire_mean_photon_estimate"] = asdict(est)
        except ValueError:
            summary["dual_fire_mean_photon_estimate"] = None
    return summary


def _session_job(args):
    cfg, seed = args
    config = replace(build("session", cfg), seed=seed)
    return seed, session_summary(run_session(config))


def _trace_csv(result: SessionResult) -> str:
    t = result.trace
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "timestamp_s", "alice_bit", "photons_sent", "photons_arriving",
                "outcome", "bob_bit", "cause"])
    kinds = ("no_click", "conclusive", "dual_fire")
    causes = ("", "signal", "background", "dark")
    for i in range(t.bits.size):
        k = int(t.kind[i])
        w.writerow([i, repr(i / t.pulse_rate_hz), int(t.bits[i]), int(t.photons[i]), int(t.arriving[i]),
                    kinds[k], int(t.bob_bit[i]) if k == 1 else "", causes[int(t.cause[i])]])
    return buf.getvalue()


def cmd_session(args) -> int:
    cfg = _load("session", args.config, args.seed)
    if args.format == "csv":
        if args.runs != 1:
            raise UsageError("--format csv traces a single run")
        result = run_session(build("session", cfg), record_slots=True)
        _emit(_trace_csv(result), args.out)
        return 0
    if args.format != "json":
        raise UsageError("session supports --format json or csv")
    report = {"command": "session", "version": __version__, "config": cfg}
    if args.runs == 1:
        report["result"] = session_summary(run_session(build("session", cfg)))
    else:
        jobs = [(cfg, s) for s in spawn_seeds(cfg["seed"], args.runs)]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                runs = list(pool.map(_session_job, jobs))
        else:
            runs = [_session_job(j) for j in jobs]
        report["runs"] = [{"seed": s, "result": r} for s, r in runs]
    _emit(dumps(report), args.out)
    return 0


def _z(a: int, b: int) -> float:
    # Difference of two Poisson counts in units of its standard error.
    return (a - b) / math.sqrt(a + b) if a + b else 0.0


def cmd_attack(args) -> int:
    if args.format != "json":
        raise UsageError("attack supports --format json only")
    cfg = _load("attack", args.config, args.seed)
    session, attack = build("attack", cfg)
    baseline = run_session(session)
    attacked = run_attacked_session(session, attack)
    bob = attacked.bob_session
    section = {
        "strategy": cfg["attack"]["type"] if cfg["attack"]["type"] == "beamsplitter" else cfg["attack"]["resend"],
        "type": cfg["attack"]["type"],
        "R": getattr(attack, "reflectivity", None),
        "eta_E": attack.eve_efficiency,
        "knowledge_fraction": attacked.knowledge_fraction,
        "eve_conclusive_count": int(attacked.eve_conclusive_indices.size),
        "shared_with_bob": attacked.shared_with_bob,
        "baseline_deltas": {
            "sifted_rate_hz": bob.sifted_rate_hz - baseline.sifted_rate_hz,
            "sifted_z": _z(bob.sifted_count, baseline.sifted_count),
            "dual_fire_rate_hz": bob.dual_fire_rate_hz - baseline.dual_fire_rate_hz,
            "dual_fire_z": _z(bob.dual_fire_count, baseline.dual_fire_count),
            "ber": bob.ber - baseline.ber,
        },
    }
    if isinstance(attack, BeamsplitterAttackConfig) and attack.transmissivity > 0 and session.mean_photon_number > 0:
        eta_b = session.channel.coupling_efficiency * session.detector.efficiency * B92_EFFICIENCY
        if eta_b > 0:
            section["predicted_knowledge_fraction"] = eve_knowledge_fraction(
                session.mean_photon_number, attack.eve_efficiency, eta_b, attack.reflectivity)
    report = {
        "command": "attack",
        "version": __version__,
        "config": cfg,
        "baseline": session_summary(baseline),
        "result": session_summary(bob),
        "attack": section,
    }
    _emit(dumps(report), args.out)
    return 0


def cmd_reconcile(args) -> int:
    if not (args.alice and args.bob):
        raise UsageError("reconcile needs --alice and --bob")
    if args.format != "json":
        raise UsageError("reconcile supports --format json only")
    cfg = _load("reconcile", args.config, args.seed)
    alice = read_bits(args.alice)
    bob = read_bits(args.bob)
    if alice.size != bob.size:
        raise ConfigError([f"key length mismatch: alice {alice.size} bits, bob {bob.size} bits"])
    if alice.size < cfg["rows"] * cfg["cols"]:
        raise ConfigError([f"key of {alice.size} bits is shorter than one {cfg['rows']}x{cfg['cols']} block"])
    result = reconcile_2d(alice, bob, build("reconcile", cfg))
    report = {
        "command": "reconcile",
        "version": __version__,
        "config": cfg,
        "result": {
            "input_bits": int(alice.size),
            "input_ber": float(np.count_nonzero(alice != bob)) / alice.size,
            "corrections": result.corrections,
            "disclosed_bit_equivalents": result.disclosed_bit_equivalents,
            "retained_bits": int(result.corrected_key.size),
            "residual_error_estimate": result.residual_error_estimate,
            "converged": result.converged,
            "corrected_key": format_bits(result.corrected_key),
        },
    }
    if args.key_out:
        write_atomic(Path(args.key_out), format_bits(result.corrected_key, 50) + "\n")
    _emit(dumps(report), args.out)
    return 0 if result.converged else 2


def cmd_linkbudget(args) -> int:
    cfg = _load("linkbudget", args.config, None)
    scenario, backgrounds = build("linkbudget", cfg)
    reports = [link_budget(scenario, bg) for bg in backgrounds]
    if args.format == "text":
        _emit(format_table(reports), args.out)
    elif args.format == "json":
        _emit(dumps({"command": "linkbudget", "version": __version__, "config": cfg,
                     "reports": [asdict(r) for r in reports]}), args.out)
    else:
        raise UsageError("linkbudget supports --format json or text")
    return 0


def cmd_otp(args) -> int:
    if not (args.key and args.message):
        raise UsageError("otp needs --key and --message")
    key = read_bits(args.key)
    data = read_bits(args.message)
    pad = OneTimePad(key)
    offset = args.offset or 0
    try:
        if args.decrypt:
            start, out = offset, pad.decrypt(data, offset)
        else:
            start, out = pad.encrypt(data, offset)
    except (KeyExhaustedError, KeyReuseError) as exc:
        raise ConfigError([str(exc)]) from None
    report = {
        "command": "otp",
        "version": __version__,
        "mode": "decrypt" if args.decrypt else "encrypt",
        "offset": start,
        "next_offset": pad.offset,
        "key_bits_remaining": pad.remaining,
        "plaintext" if args.decrypt else "ciphertext": format_bits(out),
    }
    _emit(dumps(report), args.out)
    return 0


HANDLERS = {
    "session": cmd_session,
    "attack": cmd_attack,
    "reconcile": cmd_reconcile,
    "linkbudget": cmd_linkbudget,
    "otp": cmd_otp,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsqkd", description="Free-space B92 QKD simulator and link budget.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file or bundled preset name")
        s.add_argument("--seed", type=int, help="overrides the seed in the config")
        s.add_argument("--out", help="report path (default: stdout)")
        s.add_argument("--format", default="json", choices=("json", "csv", "text"))
        s.add_argument("--jobs", type=int, default=1, help="parallel workers for --runs")
        if name == "session":
            s.add_argument("--runs", type=int, default=1, help="independent seeds derived from --seed")
        if name == "reconcile":
            s.add_argument("--alice", help="Alice's bit-string file")
            s.add_argument("--bob", help="Bob's bit-string file")
            s.add_argument("--key-out", help="write the corrected key here")
        if name == "otp":
            s.add_argument("--key", help="pad bit-string file")
            s.add_argument("--message", help="message or ciphertext bit-string file")
            s.add_argument("--offset", type=int, help="pad offset to start from")
            s.add_argument("--decrypt", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "runs", 1) < 1 or args.jobs < 1:
        print("error: --runs and --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        return HANDLERS[args.command](args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return 1
    except (UsageError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # bad bit strings and model preconditions surface here
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
