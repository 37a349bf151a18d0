"""Textual score language: parser, canonical printer, and lint.

The language is line-oriented so that live edits diff cleanly:

    tempo 120
    platform "arm3.eurdf.json"

    phrase sweep {
      right_hand -> fwd_mid far for 2 [time: sudden]
      hold for 1
      do other
      theme [weight: light] from 1 to 2
    }

    play sweep
    play retrograde(sweep)
    loop mirror(sweep, x)

Durations are integers or exact rationals (`3/2`); decimals are rejected
so the transform algebra stays exact.  `#` starts a comment.  The parser
recovers at statement boundaries so one typo does not suppress later
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from .score import (
    RESERVED_WORDS,
    Axis,
    Call,
    Direction,
    EffortQuality,
    Hold,
    Move,
    Phrase,
    PhraseExpr,
    PhraseRef,
    PlaylistEntry,
    Reach,
    Ref,
    Score,
    Span,
    Theme,
    TransformOp,
    validate_score,
)


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    message: str
    span: Span

    def __str__(self) -> str:
        return f"{self.span.line}:{self.span.column}: {self.severity.value}: {self.message}"


class ParseFailure(Exception):
    """Raised by parse() when the input has errors."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


KEYWORDS = RESERVED_WORDS

# Past this many errors the rest of the input is noise, not feedback.
MAX_DIAGNOSTICS = 100

_TRANSFORMS = {op.value: op for op in TransformOp}
_REACHES = {r.value: r for r in Reach}
_DIRECTION_NAMES = {}
for _h in ("place", "fwd", "back", "left", "right",
           "fwd_left", "fwd_right", "back_left", "back_right"):
    for _l in ("high", "mid", "low"):
        _DIRECTION_NAMES[f"{_h}_{_l}"] = (_h, _l)


# ---------------------------------------------------------------------------
# Lexer

_PUNCT = {"{", "}", "(", ")", "[", "]", ":", ",", "->"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | punct | newline | eof
    text: str
    span: Span
    value: object = None


_DIGITS = set("0123456789")


def _ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


class Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.diagnostics: list[Diagnostic] = []

    def _span(self, length: int = 1) -> Span:
        return Span(self.line, self.col, max(1, length))

    def error(self, message: str, span: Span) -> None:
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append(Diagnostic(Severity.ERROR, message, span))

    def _known_char(self, c: str) -> bool:
        return (
            c in " \t\r\n#{}()[]:,\"" or c in _DIGITS or c == "-"
            or _ident_start(c)
        )

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            if c == "\n":
                out.append(Token("newline", "\n", self._span()))
                self._advance()
            elif c in " \t\r":
                self._advance()
            elif c == "#":
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
            elif text.startswith("->", self.pos):
                out.append(Token("punct", "->", self._span(2)))
                self._advance(2)
            elif c in "{}()[]:,":
                out.append(Token("punct", c, self._span()))
                self._advance()
            elif c == '"':
                out.append(self._string())
            elif c in _DIGITS:
                out.append(self._number())
            elif c == "-" and self.pos + 1 < len(text) and text[self.pos + 1] in _DIGITS:
                out.append(self._number())
            elif _ident_start(c):
                start, span = self.pos, self._span()
                while self.pos < len(text) and _ident_char(text[self.pos]):
                    self._advance()
                word = text[start:self.pos]
                out.append(Token("ident", word, Span(span.line, span.column, len(word))))
            else:
                # One diagnostic per run of junk, not per character.
                span = self._span()
                self._advance()
                run = 1
                while (self.pos < len(text)
                       and not self._known_char(text[self.pos])):
                    self._advance()
                    run += 1
                self.error(
                    f"unexpected character {c!r}"
                    + (f" (and {run - 1} more)" if run > 1 else ""),
                    Span(span.line, span.column, run),
                )
        out.append(Token("eof", "", self._span()))
        return out

    def _string(self) -> Token:
        span = self._span()
        self._advance()  # opening quote
        chars = []
        raw_len = 1
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == '"':
                self._advance()
                raw_len += 1
                return Token(
                    "string", "".join(chars),
                    Span(span.line, span.column, raw_len), "".join(chars),
                )
            if c == "\n":
                break
            if c == "\\" and self.pos + 1 < len(self.text):
                esc = self.text[self.pos + 1]
                decoded = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc)
                if decoded is None:
                    self.error(f"unknown escape \\{esc}", self._span(2))
                    decoded = esc
                chars.append(decoded)
                self._advance(2)
                raw_len += 2
            else:
                chars.append(c)
                self._advance()
                raw_len += 1
        self.error("unterminated string", Span(span.line, span.column, max(1, raw_len)))
        return Token("string", "".join(chars), Span(span.line, span.column, max(1, raw_len)), "".join(chars))

    def _number(self) -> Token:
        span = self._span()
        start = self.pos
        if self.text[self.pos] == "-":
            self._advance()
        while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
            self._advance()
        if self.pos < len(self.text) and self.text[self.pos] == ".":
            # Decimals are rejected to keep the algebra exact.
            self._advance()
            while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
                self._advance()
            raw = self.text[start:self.pos]
            self.error(
                f"decimal {raw!r} not allowed; write an exact rational like 3/2",
                Span(span.line, span.column, len(raw)),
            )
            return Token("number", raw, Span(span.line, span.column, len(raw)), None)
        if self.pos < len(self.text) and self.text[self.pos] == "/":
            self._advance()
            dstart = self.pos
            while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
                self._advance()
            raw = self.text[start:self.pos]
            sp = Span(span.line, span.column, len(raw))
            if dstart == self.pos or int(self.text[dstart:self.pos]) == 0:
                self.error(f"bad rational {raw!r}", sp)
                return Token("number", raw, sp, None)
            num, den = raw.split("/")
            return Token("number", raw, sp, Fraction(int(num), int(den)))
        raw = self.text[start:self.pos]
        sp = Span(span.line, span.column, len(raw))
        return Token("number", raw, sp, Fraction(int(raw)))


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[Token], diagnostics: list[Diagnostic]):
        self.toks = tokens
        self.i = 0
        self.diagnostics = diagnostics

    # -- token plumbing

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def bump(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        return self.cur.kind == kind and (text is None or self.cur.text == text)

    def at_word(self, word: str) -> bool:
        return self.at("ident", word)

    def skip_newlines(self) -> None:
        while self.at("newline"):
            self.bump()

    def error(self, message: str, span: Optional[Span] = None) -> None:
        if len(self.diagnostics) < MAX_DIAGNOSTICS:
            self.diagnostics.append(
                Diagnostic(Severity.ERROR, message, span or self.cur.span)
            )

    def expect(self, kind: str, text: Optional[str] = None, what: str = "") -> Optional[Token]:
        if self.at(kind, text):
            return self.bump()
        want = what or (text if text else kind)
        self.error(f"expected {want}, found {self.cur.text or self.cur.kind!r}")
        return None

    def sync_to_line_end(self) -> None:
        while not self.at("newline") and not self.at("eof"):
            self.bump()

    def end_statement(self) -> None:
        if self.at("eof"):
            return
        if not self.at("newline"):
            self.error(f"unexpected {self.cur.text!r} after statement")
            self.sync_to_line_end()
        self.skip_newlines()

    # -- grammar

    def score(self) -> Score:
        tempo: Optional[Fraction] = None
        platform_ref: Optional[str] = None
        phrases: list[Phrase] = []
        playlist: list[PlaylistEntry] = []
        seen: set[str] = set()

        self.skip_newlines()
        while not self.at("eof"):
            if self.at_word("tempo"):
                self.bump()
                t = self.expect("number", what="a tempo in beats per minute")
                if t is not None and t.value is not None:
                    if t.value <= 0:
                        self.error("tempo must be positive", t.span)
                    elif tempo is not None:
                        self.error("tempo already set", t.span)
                    else:
                        tempo = t.value
                self.end_statement()
            elif self.at_word("platform"):
                self.bump()
                t = self.expect("string", what='a quoted path like "arm3.eurdf.json"')
                if t is not None:
                    platform_ref = t.value
                self.end_statement()
            elif self.at_word("phrase"):
                p = self.phrase_def(seen)
                if p is not None:
                    phrases.append(p)
            elif self.at_word("play") or self.at_word("loop"):
                is_loop = self.cur.text == "loop"
                span = self.bump().span
                expr = self.phrase_expr()
                if expr is not None:
                    playlist.append(PlaylistEntry(expr, is_loop, span))
                self.end_statement()
            else:
                self.error(
                    f"expected a statement (tempo, platform, phrase, play, loop), "
                    f"found {self.cur.text!r}"
                )
                self.sync_to_line_end()
                self.skip_newlines()

        return Score(
            tempo=tempo if tempo is not None else Fraction(120),
            platform_ref=platform_ref,
            phrases=tuple(phrases),
            playlist=tuple(playlist),
        )

    def phrase_def(self, seen: set[str]) -> Optional[Phrase]:
        self.bump()  # 'phrase'
        name_tok = self.cur if self.at("ident") else None
        if name_tok is None:
            self.error("expected a phrase name")
            self.sync_to_line_end()
            self.skip_newlines()
            return None
        self.bump()
        name = name_tok.text
        if name in KEYWORDS:
            self.error(f"{name!r} is a reserved word", name_tok.span)
        if name in seen:
            self.error(f"duplicate phrase {name!r}", name_tok.span)
        seen.add(name)

        if self.expect("punct", "{") is None:
            self.sync_to_line_end()
            self.skip_newlines()
            return None
        self.skip_newlines()

        actions: list = []
        themes: list[Theme] = []
        while not self.at("punct", "}"):
            if self.at("eof"):
                self.error(f"unterminated phrase {name!r} (missing '}}')")
                return Phrase(name, tuple(actions), tuple(themes))
            ok = self.phrase_item(actions, themes)
            if not ok:
                self.sync_to_line_end()
            self.skip_newlines()
        self.bump()  # '}'
        self.end_statement()
        return Phrase(name, tuple(actions), tuple(themes))

    def phrase_item(self, actions: list, themes: list[Theme]) -> bool:
        if self.at_word("hold"):
            span = self.bump().span
            beats = self.duration()
            if beats is None:
                return False
            actions.append(Hold(beats, span))
            return True
        if self.at_word("do"):
            self.bump()
            t = self.expect("ident", what="a phrase name")
            if t is None:
                return False
            actions.append(PhraseRef(t.text, t.span))
            return True
        if self.at_word("theme"):
            span = self.bump().span
            q = self.quality()
            if q is None:
                return False
            if self.expect("ident", "from") is None:
                return False
            start = self.index_number()
            if start is None:
                return False
            if self.expect("ident", "to") is None:
                return False
            end = self.index_number()
            if end is None:
                return False
            if start > end:
                self.error(f"theme range {start}..{end} is reversed", span)
                return False
            themes.append(Theme(q, start, end, span))
            return True
        if self.at("ident") and self.cur.text not in KEYWORDS:
            return self.move(actions)
        self.error(
            f"expected an action (label -> ..., hold, do, theme), "
            f"found {self.cur.text or self.cur.kind!r}"
        )
        return False

    def move(self, actions: list) -> bool:
        label_tok = self.bump()
        if self.expect("punct", "->") is None:
            return False
        d = self.direction()
        if d is None:
            return False
        if self.at("ident") and self.cur.text in _REACHES:
            reach = _REACHES[self.bump().text]
        else:
            self.error("expected a reach (near, mid, far)")
            return False
        beats = self.duration()
        if beats is None:
            return False
        qualities = []
        while self.at("punct", "["):
            q = self.quality()
            if q is None:
                return False
            if any(prev.factor == q.factor for prev in qualities):
                self.error(f"more than one {q.factor.value} quality on one action")
                return False
            qualities.append(q)
        actions.append(
            Move(label_tok.text, d, reach, beats, frozenset(qualities), label_tok.span)
        )
        return True

    def direction(self) -> Optional[Direction]:
        if not self.at("ident"):
            self.error("expected a direction like fwd_high or place_low")
            return None
        t = self.bump()
        if t.text == "place_mid":
            self.error("place_mid is the kinesphere center, not a direction", t.span)
            return None
        if t.text not in _DIRECTION_NAMES:
            self.error(f"unknown direction {t.text!r}", t.span)
            return None
        return Direction.from_name(t.text)

    def duration(self) -> Optional[Fraction]:
        if not self.at_word("for"):
            self.error("expected 'for <beats>'")
            return None
        self.bump()
        t = self.expect("number", what="a duration in beats")
        if t is None or t.value is None:
            return None
        if t.value <= 0:
            self.error("duration must be positive", t.span)
            return None
        return t.value

    def index_number(self) -> Optional[int]:
        t = self.expect("number", what="an action index")
        if t is None or t.value is None:
            return None
        if t.value.denominator != 1 or t.value < 1:
            self.error("action indices are positive integers", t.span)
            return None
        return int(t.value)

    def quality(self) -> Optional[EffortQuality]:
        if self.expect("punct", "[") is None:
            return None
        factor = self.expect("ident", what="an effort factor (weight, time, space, flow)")
        if factor is None:
            return None
        if self.expect("punct", ":") is None:
            return None
        pole = self.expect("ident", what="a pole for the factor")
        if pole is None:
            return None
        if self.expect("punct", "]") is None:
            return None
        try:
            return EffortQuality.from_pair(factor.text, pole.text)
        except ValueError:
            self.error(
                f"unknown quality [{factor.text}: {pole.text}]",
                Span(factor.span.line, factor.span.column,
                     pole.span.column + pole.span.length - factor.span.column),
            )
            return None

    def phrase_expr(self) -> Optional[PhraseExpr]:
        if not self.at("ident"):
            self.error("expected a phrase name or transform call")
            return None
        t = self.bump()
        if t.text in _TRANSFORMS:
            return self.call(_TRANSFORMS[t.text], t.span)
        if t.text in KEYWORDS:
            self.error(f"{t.text!r} is a reserved word", t.span)
            return None
        return Ref(t.text, t.span)

    def call(self, op: TransformOp, span: Span) -> Optional[Call]:
        if self.expect("punct", "(") is None:
            return None
        first = self.phrase_expr()
        if first is None:
            return None
        args: list = [first]
        while self.at("punct", ","):
            self.bump()
            arg = self.call_arg(op)
            if arg is None:
                return None
            args.append(arg)
        if self.expect("punct", ")") is None:
            return None
        return self.check_call(op, args, span)

    def call_arg(self, op: TransformOp):
        if op is TransformOp.CONCAT:
            return self.phrase_expr()
        if op is TransformOp.MIRROR:
            t = self.expect("ident", what="an axis (x, y, z)")
            if t is None:
                return None
            try:
                return Axis(t.text)
            except ValueError:
                self.error(f"unknown axis {t.text!r}", t.span)
                return None
        t = self.expect("number", what="a numeric argument")
        if t is None or t.value is None:
            return None
        return t.value

    def check_call(self, op: TransformOp, args: list, span: Span) -> Optional[Call]:
        def fail(msg: str) -> None:
            self.error(msg, span)

        n = len(args)
        if op is TransformOp.RETROGRADE:
            if n != 1:
                fail("retrograde takes exactly one phrase")
                return None
        elif op is TransformOp.MIRROR:
            if n != 2 or not isinstance(args[1], Axis):
                fail("mirror takes a phrase and an axis, e.g. mirror(p, x)")
                return None
        elif op is TransformOp.SCALE:
            if n != 2 or not isinstance(args[1], Fraction) or args[1] <= 0:
                fail("scale takes a phrase and a positive factor, e.g. scale(p, 3/2)")
                return None
        elif op in (TransformOp.LEVEL_SHIFT, TransformOp.EXTENT_SHIFT):
            if n != 2 or not isinstance(args[1], Fraction) or args[1].denominator != 1:
                fail(f"{op.value} takes a phrase and an integer step count")
                return None
            args[1] = int(args[1])
        elif op is TransformOp.REPEAT:
            if (n != 2 or not isinstance(args[1], Fraction)
                    or args[1].denominator != 1 or args[1] < 1):
                fail("repeat takes a phrase and a count >= 1")
                return None
            args[1] = int(args[1])
        elif op is TransformOp.CONCAT:
            if n != 2 or not isinstance(args[1], (Ref, Call)):
                fail("concat takes two phrases")
                return None
        return Call(op, tuple(args), span)


def parse(text: str) -> Score:
    """Parse score text; raises ParseFailure carrying all diagnostics.

    A returned Score always satisfies validate_score(score) == [].
    """
    lexer = Lexer(text)
    tokens = lexer.tokens()
    diagnostics = list(lexer.diagnostics)
    score = _Parser(tokens, diagnostics).score()
    for d in validate_score(score):
        diagnostics.append(
            Diagnostic(Severity.ERROR, d.message, d.span or Span(1, 1))
        )
    errors = [d for d in diagnostics if d.severity is Severity.ERROR]
    if errors:
        raise ParseFailure(sorted(errors, key=lambda d: (d.span.line, d.span.column)))
    return score


# ---------------------------------------------------------------------------
# Printer


def _fmt_number(x: Union[Fraction, int]) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _fmt_string(s: str) -> str:
    body = s.replace("\\", "\\\\").replace('"', '\\"')
    body = body.replace("\n", "\\n").replace("\t", "\\t")
    return f'"{body}"'


_FACTOR_ORDER = {"weight": 0, "time": 1, "space": 2, "flow": 3}


def _fmt_quality(q: EffortQuality) -> str:
    return f"[{q.factor.value}: {q.pole}]"


def _fmt_qualities(qs: frozenset) -> str:
    ordered = sorted(qs, key=lambda q: _FACTOR_ORDER[q.factor.value])
    return "".join(" " + _fmt_quality(q) for q in ordered)


def _fmt_expr(e) -> str:
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Axis):
        return e.value
    if isinstance(e, (Fraction, int)):
        return _fmt_number(e)
    args = ", ".join(_fmt_expr(a) for a in e.args)
    return f"{e.op.value}({args})"


def print_score(s: Score) -> str:
    """Canonical text for a score; parse(print_score(s)) == s."""
    blocks: list[str] = []
    header = [f"tempo {_fmt_number(s.tempo)}"]
    if s.platform_ref is not None:
        header.append(f"platform {_fmt_string(s.platform_ref)}")
    blocks.append("\n".join(header))

    for p in s.phrases:
        lines = [f"phrase {p.name} {{"]
        for a in p.actions:
            if isinstance(a, Move):
                lines.append(
                    f"  {a.label} -> {a.direction.name} {a.reach.value} "
                    f"for {_fmt_number(a.beats)}{_fmt_qualities(a.qualities)}"
                )
            elif isinstance(a, Hold):
                lines.append(f"  hold for {_fmt_number(a.beats)}")
            else:
                lines.append(f"  do {a.name}")
        for t in p.themes:
            lines.append(f"  theme {_fmt_quality(t.quality)} from {t.start} to {t.end}")
        lines.append("}")
        blocks.append("\n".join(lines))

    if s.playlist:
        blocks.append(
            "\n".join(
                ("loop " if e.loop else "play ") + _fmt_expr(e.expr)
                for e in s.playlist
            )
        )
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# Lint


def _reachable_phrases(s: Score) -> set[str]:
    from .score import _expr_refs  # reuse the expression walker

    roots = {r.name for e in s.playlist for r in _expr_refs(e.expr)}
    graph = {
        p.name: [a.name for a in p.actions if isinstance(a, PhraseRef)]
        for p in s.phrases
    }
    seen: set[str] = set()
    stack = [r for r in roots if r in graph]
    while stack:
        name = stack.pop()
        if name in seen:
            continue
        seen.add(name)
        stack.extend(n for n in graph.get(name, ()) if n not in seen)
    return seen


def shared_quality(p: Phrase) -> Optional[EffortQuality]:
    """The quality carried by every Move of the phrase, if any.

    Holds and phrase refs cannot carry qualities and are ignored; a phrase
    with no Moves shares nothing.
    """
    moves = [a for a in p.actions if isinstance(a, Move)]
    if not moves:
        return None
    common = frozenset(moves[0].qualities)
    for m in moves[1:]:
        common &= m.qualities
    if not common:
        return None
    return sorted(common, key=lambda q: _FACTOR_ORDER[q.factor.value])[0]


def lint(s: Score) -> list[Diagnostic]:
    """Style warnings for a valid score; never errors."""
    out: list[Diagnostic] = []
    here = Span(1, 1)
    reachable = _reachable_phrases(s)
    for p in s.phrases:
        if p.name not in reachable:
            out.append(
                Diagnostic(Severity.WARNING, f"unused phrase {p.name!r}", here)
            )
        if not p.actions:
            out.append(
                Diagnostic(Severity.WARNING, f"empty phrase {p.name!r}", here)
            )
        q = shared_quality(p)
        if q is not None:
            out.append(
                Diagnostic(
                    Severity.WARNING,
                    f"every action in {p.name!r} carries {_fmt_quality(q)}; "
                    f"consider a theme",
                    here,
                )
            )
    for i, e in enumerate(s.playlist):
        if e.loop and i + 1 < len(s.playlist):
            n = len(s.playlist) - i - 1
            out.append(
                Diagnostic(
                    Severity.WARNING,
                    f"{n} playlist entr{'y' if n == 1 else 'ies'} after 'loop' "
                    f"will never play",
                    e.span or here,
                )
            )
            break
    return out
