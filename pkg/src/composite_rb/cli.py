"""Command-line front end.

Exit codes: 0 success, 1 failed Clifford audit, 2 invalid input or
configuration, 3 fit failure. Errors are reported on stderr as a single
JSON object so scripts can parse them.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .clifford import audit_table, clifford_table, inversion_gate, sample_sequence
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .fitstats import FitError, InsufficientDataError, aggregate, dumps_report, fit_decay, fit_report
from .pulses import Pulse, Scheme, UnsupportedTargetError, expand, total_angle
from .rbengine import (
    Measurement,
    epsilon_sweep,
    records_from_csv,
    records_from_json,
    records_to_csv,
    records_to_json,
    run_experiment,
)
from .su2 import DomainError

OUT_DIR_ENV = "COMPOSITE_RB_OUT_DIR"
DEFAULT_OUT_DIR = "rb_output"
FIT_CURVE_POINTS = 201
SWEEP_COLUMNS = ("epsilon", "scheme", "repeat", "avg_error", "stderr", "flagged", "message")

EXIT_OK, EXIT_AUDIT, EXIT_INPUT, EXIT_FIT = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **details):
        super().__init__(message)
        self.code, self.kind, self.details = code, kind, details

    def report(self) -> dict:
        return {"error": self.kind, "message": str(self), **self.details, "version": __version__}


# --- angle expressions -----------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def parse_angle(text: str) -> float:
    """Evaluate ``"pi/2"``, ``"-3*pi/4"``, ``"1.5708"`` and similar, in radians."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in ("pi", "π"):
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported angle expression {text!r}")

    try:
        value = ev(ast.parse(text.strip().replace("π", "pi"), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse angle {text!r}: {exc}") from None
    if not math.isfinite(value):
        raise ValueError(f"angle {text!r} is not finite")
    return value


# --- helpers ----------------------------------------------------------------


def _load(args) -> ExperimentConfig:
    try:
        cfg = load_config(getattr(args, "config", None))
        if getattr(args, "seed", None) is not None:
            cfg = cfg.updated("experiment", seed=args.seed)
        if getattr(args, "exact", False):
            cfg = cfg.updated("experiment", measurement=Measurement.EXACT.value)
        if getattr(args, "repeats", None) is not None:
            cfg = cfg.updated("sweep", repeats=args.repeats)
        if getattr(args, "workers", None) is not None:
            cfg = cfg.updated("output", workers=args.workers)
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, "config", str(exc), errors=exc.errors) from None
    except OSError as exc:
        raise CliError(EXIT_INPUT, "config", f"cannot read config: {exc}") from None
    return cfg


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    chosen = (
        getattr(args, "out_dir", None)
        or (cfg.output.out_dir if cfg is not None else None)
        or os.environ.get(OUT_DIR_ENV)
        or DEFAULT_OUT_DIR
    )
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> str:
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return str(path)


def _fmt(x) -> str:
    return repr(float(x))


def _fit(aggs, spam):
    try:
        return fit_decay(aggs, spam)
    except FitError as exc:
        raise CliError(EXIT_FIT, "fit", str(exc), diagnostics=exc.diagnostics) from None
    except InsufficientDataError as exc:
        raise CliError(EXIT_FIT, "fit", str(exc)) from None


def _decay_files(out: Path, aggs, fit) -> dict:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "mean_survival", "variance_bound", "fit"])
    for a, f in zip(aggs, fit.predict([a.L for a in aggs])):
        w.writerow([a.L, _fmt(a.mean_survival), _fmt(a.variance_bound), _fmt(f)])
    decay = _write(out / "decay_curve.csv", buf.getvalue())

    L = np.linspace(0.0, float(max(a.L for a in aggs)), FIT_CURVE_POINTS)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "fit"])
    for x, f in zip(L, fit.predict(L)):
        w.writerow([_fmt(x), _fmt(f)])
    curve = _write(out / "fit_curve.csv", buf.getvalue())
    return {"decay_curve": decay, "fit_curve": curve}


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, allow_nan=True))
    else:
        print(text)


# --- commands -----------------------------------------------------------------


def cmd_rb_run(args) -> int:
    cfg = _load(args)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    exp = cfg.rb_experiment()
    out = _out_dir(args, cfg)
    records = run_experiment(exp, workers=cfg.output.workers)
    files = {
        "config": _write(out / "config.yaml", dump_config(cfg, include_output=False)),
        "records_csv": _write(out / "records.csv", records_to_csv(records)),
        "records_json": _write(out / "records.json", records_to_json(records)),
    }
    aggs = aggregate(records)
    fit = _fit(aggs, cfg.spam_init)
    report = fit_report(fit, __version__)
    files["fit"] = _write(out / "fit.json", dumps_report(report))
    files.update(_decay_files(out, aggs, fit))
    summary = {
        "scheme": exp.scheme.value,
        "avg_error": fit.avg_error,
        "stderr": fit.stderr_avg_error,
        "flagged": fit.flagged,
        "message": fit.message,
        "files": files,
        "version": __version__,
    }
    flag = f"  [flagged: {fit.message}]" if fit.flagged else ""
    _emit(args, summary, f"{exp.scheme.value}: avg error per Clifford {fit.avg_error:.4e} +- {fit.stderr_avg_error:.1e} (1 sigma){flag}\nwrote {out}")
    return EXIT_OK


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.epsilon), r.scheme, r.repeat, _fmt(r.avg_error), _fmt(r.stderr), int(r.flagged), r.message])
    return buf.getvalue()


def cmd_rb_sweep(args) -> int:
    cfg = _load(args)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    out = _out_dir(args, cfg)
    try:
        rows = epsilon_sweep(
            cfg.rb_experiment(),
            cfg.sweep.epsilons,
            cfg.sweep.schemes,
            repeats=cfg.sweep.repeats,
            workers=cfg.output.workers,
            spam_init=cfg.spam_init,
        )
    except InsufficientDataError as exc:
        raise CliError(EXIT_FIT, "fit", str(exc)) from None
    files = {
        "config": _write(out / "config.yaml", dump_config(cfg, include_output=False)),
        "sweep": _write(out / "sweep.csv", sweep_csv(rows)),
    }
    n_flagged = sum(r.flagged for r in rows)
    summary = {"rows": len(rows), "flagged": n_flagged, "files": files, "version": __version__}
    _emit(args, summary, f"{len(rows)} sweep rows ({n_flagged} flagged)\nwrote {files['sweep']}")
    return EXIT_OK


def cmd_expand(args) -> int:
    try:
        theta, phi = parse_angle(args.theta), parse_angle(args.phi)
        scheme = Scheme(args.scheme.lower())
    except ValueError as exc:
        raise CliError(EXIT_INPUT, "input", str(exc)) from None
    try:
        seq = expand(Pulse(theta, phi), scheme)
    except (UnsupportedTargetError, DomainError) as exc:
        raise CliError(EXIT_INPUT, "unsupported", str(exc)) from None
    total = total_angle(seq)
    payload = {
        "target": {"theta": theta, "phi": phi},
        "scheme": scheme.value,
        "pulses": [{"theta": p.theta, "phi": p.phi, "kind": p.kind.value} for p in seq],
        "total_angle": total,
        "version": __version__,
    }
    lines = [f"{'#':>3}  {'theta':>10}  {'theta/pi':>8}  {'phi':>10}  kind"]
    for i, p in enumerate(seq, 1):
        lines.append(f"{i:>3}  {p.theta:>10.6f}  {p.theta / math.pi:>8.4f}  {p.phi:>10.6f}  {p.kind.value}")
    lines.append(f"total angle {total:.6f} ({total / math.pi:.4f} pi)")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_clifford_check(args, gates=None) -> int:
    """Audit a Clifford table; ``gates`` replaces the stock table (for testing)."""
    gates = clifford_table(args.z_as_drive) if gates is None else gates
    results = audit_table(gates)
    rng = np.random.default_rng(args.seed)
    inversion_failures = 0
    for _ in range(args.sequences):
        seq = sample_sequence(int(rng.integers(1, 33)), rng, args.z_as_drive)
        target = int(rng.integers(0, 2))
        inv = inversion_gate(seq, target, args.z_as_drive)
        amp = (inv.ideal @ _product(seq))[target, 0]
        if abs(abs(amp) ** 2 - 1) > 1e-10:
            inversion_failures += 1
    failing = [r.index for r in results if not r.passed]
    ok = not failing and inversion_failures == 0
    payload = {
        "passed": ok,
        "gates": [r.as_dict() for r in results],
        "inversion": {"sequences": args.sequences, "failures": inversion_failures},
        "version": __version__,
    }
    lines = [f"gate {r.index:>2}  {r.label:<12} {'ok' if r.passed else 'FAIL: ' + '; '.join(r.failures)}" for r in results]
    lines.append(f"inversion gate exact on {args.sequences - inversion_failures}/{args.sequences} random sequences")
    lines.append(f"{len(results) - len(failing)}/{len(results)} gates pass")
    _emit(args, payload, "\n".join(lines))
    if failing:
        print(f"failing gates: {', '.join(str(i) for i in failing)}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_AUDIT


def _product(seq):
    U = np.eye(2, dtype=np.complex128)
    for g in seq:
        U = g.ideal @ U
    return U


def cmd_fit(args) -> int:
    cfg = _load(args)
    path = Path(args.records)
    try:
        text = path.read_text()
        records = records_from_json(text) if path.suffix.lower() == ".json" else records_from_csv(text)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_INPUT, "input", f"cannot read records from {path}: {exc}") from None
    if not records:
        raise CliError(EXIT_INPUT, "input", f"{path} contains no records")
    out = _out_dir(args, cfg)
    try:
        aggs = aggregate(records)
    except InsufficientDataError as exc:
        raise CliError(EXIT_FIT, "fit", str(exc)) from None
    fit = _fit(aggs, cfg.spam_init)
    files = {"fit": _write(out / "fit.json", dumps_report(fit_report(fit, __version__)))}
    files.update(_decay_files(out, aggs, fit))
    summary = {
        "avg_error": fit.avg_error,
        "stderr": fit.stderr_avg_error,
        "A0": fit.A0,
        "B0": fit.B0,
        "p": fit.p,
        "flagged": fit.flagged,
        "message": fit.message,
        "files": files,
        "version": __version__,
    }
    _emit(args, summary, f"avg error per Clifford {fit.avg_error:.4e} +- {fit.stderr_avg_error:.1e} (1 sigma)\nwrote {out}")
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="composite-rb",
        description="Composite-pulse gate errors and randomized benchmarking.",
        epilog=f"Default output directory: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR}.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep=False):
        p.add_argument("--config", help="YAML experiment configuration")
        p.add_argument("--seed", type=int, help="override experiment.seed")
        p.add_argument("--out-dir", help="directory for output files")
        p.add_argument("--exact", action="store_true", help="use exact survival probabilities instead of sampled shots")
        p.add_argument("--workers", type=int, help="worker processes (results do not depend on this)")
        p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
        p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
        if sweep:
            p.add_argument("--repeats", type=int, help="override sweep.repeats")

    rb = sub.add_parser("rb", help="randomized-benchmarking runs").add_subparsers(dest="rb_command", required=True)
    run = rb.add_parser("run", help="simulate one experiment and fit its decay")
    common(run)
    run.set_defaults(func=cmd_rb_run)
    sweep = rb.add_parser("sweep", help="fitted error over an epsilon grid for several schemes")
    common(sweep, sweep=True)
    sweep.set_defaults(func=cmd_rb_sweep)

    ex = sub.add_parser("expand", help="list the pulses of a composite sequence")
    ex.add_argument("theta", help="target angle, e.g. pi or pi/2")
    ex.add_argument("phi", help="target phase, e.g. 0 or pi/2")
    ex.add_argument("scheme", help="primitive, b2 or pd6")
    ex.add_argument("--json", action="store_true")
    ex.set_defaults(func=cmd_expand)

    cl = sub.add_parser("clifford", help="Clifford-table tools").add_subparsers(dest="clifford_command", required=True)
    chk = cl.add_parser("check", help="audit the 24-gate table")
    chk.add_argument("--json", action="store_true")
    chk.add_argument("--z-as-drive", action="store_true", help="realize Z rotations with drive pulses")
    chk.add_argument("--sequences", type=int, default=1000, help="random sequences for the inversion check")
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(func=cmd_clifford_check)

    fit = sub.add_parser("fit", help="fit an existing records file (CSV or JSON)")
    fit.add_argument("records")
    fit.add_argument("--config", help="configuration supplying fit.a0_init and fit.b0_init")
    fit.add_argument("--out-dir")
    fit.add_argument("--json", action="store_true")
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps(exc.report(), allow_nan=True), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
