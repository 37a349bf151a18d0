"""Operator command line: check, compile, transform, ecl synth, play, serve.

Diagnostics go to standard error, data to files or standard output, so
every subcommand scripts cleanly.  Exit codes: 0 success, 1 the input has
error diagnostics, 2 usage or I/O trouble.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import shutil
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .notation import Diagnostic, ParseFailure, Severity, lint, parse, print_score
from .platform import (
    PlatformError,
    ecl_synthesize,
    load_ecl,
    load_platform,
)
from .score import (
    Axis,
    Score,
    Span,
    extent_shift,
    level_shift,
    mirror,
    repeat,
    retrograde,
    scale_durations,
)
from .synth import CompileError, compile_score, flatten, trajectory_to_dict

OK, HAS_ERRORS, USAGE = 0, 1, 2

FIXTURES = Path(__file__).parent / "fixtures"


class UserError(Exception):
    """Operator-facing failure: one line on stderr, exit 2, no stack trace."""


def _color_enabled() -> bool:
    mode = os.environ.get("CHOREO_COLOR", "auto")
    if mode == "never":
        return False
    return sys.stderr.isatty()


_STYLES = {"error": "\033[31m", "warning": "\033[33m"}


def emit_diagnostics(diags, source_name: str, as_json: bool) -> None:
    if not diags:
        return
    if as_json:
        sys.stderr.write(
            json.dumps(
                [
                    {
                        "file": source_name,
                        "severity": d.severity.value,
                        "message": d.message,
                        "line": d.span.line,
                        "column": d.span.column,
                        "length": d.span.length,
                    }
                    for d in diags
                ],
                indent=None,
            )
            + "\n"
        )
        return
    color = _color_enabled()
    for d in diags:
        sev = d.severity.value
        if color:
            sev = f"{_STYLES[sev]}{sev}\033[0m"
        sys.stderr.write(
            f"{source_name}:{d.span.line}:{d.span.column}: {sev}: {d.message}\n"
        )


def read_score(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise UserError(f"cannot read {path}: {e.strerror or e}") from None
    except UnicodeDecodeError:
        raise UserError(f"{path} is not valid UTF-8") from None


def write_bytes(path: Path, data: bytes) -> None:
    try:
        path.write_bytes(data)
    except OSError as e:
        raise UserError(f"cannot write {path}: {e.strerror or e}") from None


def dump_json(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def load_stage(args) -> tuple:
    if getattr(args, "rate", 1.0) <= 0:
        raise UserError("--rate must be positive")
    spec = load_platform(args.platform)
    ecl = load_ecl(args.ecl, spec)
    return spec, ecl


# ---------------------------------------------------------------------------
# Subcommands


def cmd_check(args) -> int:
    text = read_score(args.file)
    try:
        score = parse(text)
    except ParseFailure as f:
        emit_diagnostics(f.diagnostics, str(args.file), args.format == "json")
        if args.format == "json":
            print(json.dumps({"ok": False}))
        return HAS_ERRORS
    warnings = lint(score)
    emit_diagnostics(warnings, str(args.file), args.format == "json")
    if args.format == "json":
        trace = flatten(score)
        print(
            json.dumps(
                {
                    "ok": True,
                    "tempo": str(score.tempo),
                    "beats": str(trace.beats),
                    "duration_s": float(trace.beats) * 60.0 / float(score.tempo),
                    "phrases": len(score.phrases),
                    "trace_entries": len(trace.entries),
                    "loop": trace.loop,
                    "warnings": len(warnings),
                },
                sort_keys=True,
            )
        )
    return OK


def cmd_compile(args) -> int:
    text = read_score(args.file)
    try:
        score = parse(text)
    except ParseFailure as f:
        emit_diagnostics(f.diagnostics, str(args.file), args.format == "json")
        return HAS_ERRORS
    spec, ecl = load_stage(args)
    try:
        compiled = compile_score(score, spec, ecl, rate=args.rate)
    except CompileError as e:
        trace = flatten(score)
        diags = [
            Diagnostic(Severity.ERROR, str(err), trace.entries[i].span or Span(1, 1))
            for i, err in e.missing
        ]
        emit_diagnostics(diags, str(args.file), args.format == "json")
        return HAS_ERRORS
    out = args.output or args.file.with_suffix(".traj.json")
    write_bytes(out, dump_json(trajectory_to_dict(compiled, spec)))
    for note in compiled.unapplied:
        sys.stderr.write(
            f"note: weight bias {note.bias:+g} on trace entry "
            f"{note.entry_index} not realized: {note.reason}\n"
        )
    if args.plot:
        from .report import save_trajectory_figures

        for path in save_trajectory_figures(compiled, spec, out):
            sys.stderr.write(f"figure: {path}\n")
    return OK


_AXES = {a.value: a for a in Axis}


def cmd_transform(args) -> int:
    text = read_score(args.file)
    try:
        score = parse(text)
    except ParseFailure as f:
        emit_diagnostics(f.diagnostics, str(args.file), args.format == "json")
        return HAS_ERRORS

    op = args.op
    arg = args.args
    notes = []

    def apply(phrase):
        if op == "retrograde":
            return retrograde(phrase)
        if op == "mirror":
            if arg not in _AXES:
                raise UserError("mirror needs --args x|y|z")
            return mirror(phrase, _AXES[arg])
        if op == "scale":
            try:
                k = Fraction(arg)
            except (TypeError, ValueError, ZeroDivisionError):
                raise UserError("scale needs --args <positive rational>, e.g. 3/2")
            if k <= 0:
                raise UserError("scale factor must be positive")
            return scale_durations(phrase, k)
        if op in ("level_shift", "extent_shift"):
            try:
                steps = int(arg)
            except (TypeError, ValueError):
                raise UserError(f"{op} needs --args <integer steps>")
            fn = level_shift if op == "level_shift" else extent_shift
            out, shift_notes = fn(phrase, steps)
            notes.extend((phrase.name, n) for n in shift_notes)
            return out
        if op == "repeat":
            try:
                n = int(arg)
            except (TypeError, ValueError):
                raise UserError("repeat needs --args <count>")
            if n < 1:
                raise UserError("repeat count must be >= 1")
            return repeat(phrase, n)
        raise UserError(f"unknown transform {op!r}")

    transformed = Score(
        score.tempo,
        score.platform_ref,
        tuple(apply(p) for p in score.phrases),
        score.playlist,
    )
    for name, note in notes:
        sys.stderr.write(f"warning: {name}[{note.index}]: {note.message}\n")
    output = print_score(transformed)
    if args.output:
        write_bytes(args.output, output.encode("utf-8"))
    else:
        sys.stdout.write(output)
    return OK


def cmd_ecl_synth(args) -> int:
    spec = load_platform(args.platform)
    ecl, report = ecl_synthesize(spec)
    out = args.output or Path(f"{spec.name}.ecl.json")
    write_bytes(out, dump_json(ecl.to_dict()))
    if args.format == "json":
        sys.stderr.write(
            json.dumps(
                {
                    "platform": report.platform,
                    "requested": report.requested,
                    "solved": report.solved,
                    "missing": [
                        {
                            "label": label,
                            "direction": d.name,
                            "reach": r.value,
                            "reason": reason,
                        }
                        for (label, d, r), reason in report.missing
                    ],
                },
                sort_keys=True,
            )
            + "\n"
        )
    else:
        sys.stderr.write(report.summary() + "\n")
    if args.plot:
        from .report import save_coverage_figure

        sys.stderr.write(f"figure: {save_coverage_figure(report, spec, out)}\n")
    return OK


def cmd_ecl_check(args) -> int:
    spec = load_platform(args.platform)
    load_ecl(args.file, spec)
    return OK


def cmd_platform_check(args) -> int:
    load_platform(args.file)
    return OK


def cmd_play(args) -> int:
    text = read_score(args.file)
    try:
        score = parse(text)
    except ParseFailure as f:
        emit_diagnostics(f.diagnostics, str(args.file), args.format == "json")
        return HAS_ERRORS
    spec, ecl = load_stage(args)
    try:
        compiled = compile_score(score, spec, ecl, rate=args.rate)
    except CompileError as e:
        for _, err in e.missing:
            sys.stderr.write(f"error: {err}\n")
        return HAS_ERRORS
    from .platform import fk_full

    traj = compiled.trajectory
    started = time.monotonic()
    for k, (t, q) in enumerate(zip(traj.frames_t, traj.frames_q)):
        if not args.fast:
            lag = started + float(t) - time.monotonic()
            if lag > 0:
                time.sleep(lag)
        endpoints = fk_full(spec, q).endpoints
        sys.stdout.write(
            json.dumps(
                {
                    "type": "frame",
                    "trajectory_id": 1,
                    "t": round(float(t), 6),
                    "q": [round(float(x), 9) for x in q],
                    "endpoints": [[round(float(c), 9) for c in p] for p in endpoints],
                    "trace_index": int(traj.trace_index[k]),
                },
                separators=(",", ":"),
            )
            + "\n"
        )
    sys.stdout.flush()
    return OK


def cmd_serve(args) -> int:
    from .runtime import Daemon

    if args.rate <= 0:
        raise UserError("--rate must be positive")
    ui_dir = args.ui
    if ui_dir is not None and not Path(ui_dir).is_dir():
        raise UserError(f"ui directory {ui_dir} does not exist")
    try:
        daemon = Daemon(
            args.file,
            args.platform,
            args.ecl,
            port=args.port,
            rate=args.rate,
            ui_dir=ui_dir,
            host=args.host,
        )
    except FileNotFoundError as e:
        raise UserError(str(e)) from None

    async def main():
        task = asyncio.ensure_future(daemon.run())
        await daemon.ready.wait()
        sys.stderr.write(
            f"choreo: serving {args.file} on {args.host}:{daemon.bound_port} "
            f"at {args.rate:g} Hz\n"
        )
        await task

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        sys.stderr.write("choreo: stopped\n")
    return OK


def cmd_fixtures(args) -> int:
    target = args.dir
    target.mkdir(parents=True, exist_ok=True)
    for name in sorted(os.listdir(FIXTURES)):
        shutil.copy(FIXTURES / name, target / name)
        sys.stderr.write(f"wrote {target / name}\n")
    return OK


# ---------------------------------------------------------------------------
# Argument wiring


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--format",
        choices=("text", "json"),
        default="text",
        help="diagnostic output format",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choreo",
        description="Compile and stream choreographic movement scores.",
    )
    parser.add_argument("--version", action="version", version=f"choreo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and lint a score")
    p.add_argument("file", type=Path)
    _add_format(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compile", help="compile a score to a trajectory file")
    p.add_argument("file", type=Path)
    p.add_argument("--platform", type=Path, required=True)
    p.add_argument("--ecl", type=Path, required=True)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--plot", action="store_true", help="render figures next to the output")
    _add_format(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("transform", help="rewrite a score through a transform")
    p.add_argument("file", type=Path)
    p.add_argument("--op", required=True,
                   choices=("retrograde", "mirror", "scale", "level_shift",
                            "extent_shift", "repeat"))
    p.add_argument("--args", help="transform argument (axis, factor, steps, count)")
    p.add_argument("-o", "--output", type=Path)
    _add_format(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("ecl", help="pose library tools")
    ecl_sub = p.add_subparsers(dest="ecl_command", required=True)
    q = ecl_sub.add_parser("synth", help="synthesize a pose library for a platform")
    q.add_argument("--platform", type=Path, required=True)
    q.add_argument("-o", "--output", type=Path)
    q.add_argument("--plot", action="store_true", help="render a coverage figure")
    _add_format(q)
    q.set_defaults(func=cmd_ecl_synth)
    q = ecl_sub.add_parser("check", help="validate a pose library against a platform")
    q.add_argument("file", type=Path)
    q.add_argument("--platform", type=Path, required=True)
    _add_format(q)
    q.set_defaults(func=cmd_ecl_check)

    p = sub.add_parser("platform", help="platform description tools")
    plat_sub = p.add_subparsers(dest="platform_command", required=True)
    q = plat_sub.add_parser("check", help="validate a platform description")
    q.add_argument("file", type=Path)
    _add_format(q)
    q.set_defaults(func=cmd_platform_check)

    p = sub.add_parser("play", help="compile and stream frames to stdout")
    p.add_argument("file", type=Path)
    p.add_argument("--platform", type=Path, required=True)
    p.add_argument("--ecl", type=Path, required=True)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--fast", action="store_true", help="do not pace to the wall clock")
    _add_format(p)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("serve", help="run the live-coding daemon")
    p.add_argument("file", type=Path)
    p.add_argument("--platform", type=Path, required=True)
    p.add_argument("--ecl", type=Path, required=True)
    p.add_argument("--port", type=int, default=7770)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--ui", type=Path, help="serve studio assets from this directory")
    _add_format(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fixtures", help="fixture utilities")
    fix_sub = p.add_subparsers(dest="fixtures_command", required=True)
    q = fix_sub.add_parser("export", help="copy the bundled demo files somewhere")
    q.add_argument("dir", type=Path)
    q.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UserError as e:
        sys.stderr.write(f"choreo: {e}\n")
        return USAGE
    except PlatformError as e:
        sys.stderr.write(f"choreo: {e}\n")
        return HAS_ERRORS
    except OSError as e:
        sys.stderr.write(f"choreo: {e}\n")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
