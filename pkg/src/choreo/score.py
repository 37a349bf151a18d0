"""Movement-score data model and the choreographic transform algebra.

A score is a set of named phrases plus a playlist of phrase expressions.
Phrases are sequences of spatial actions: a body label is sent toward one
of 26 kinesphere directions at a reach extent for a number of beats,
optionally tagged with effort qualities.  All types are immutable and all
transforms are pure functions, so values can be shared freely across
threads.

Durations are exact rational beats (`fractions.Fraction`); they become
seconds only at synthesis time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Union


class Horizontal(Enum):
    """The nine horizontal cells of the direction cube."""

    PLACE = "place"
    FWD = "fwd"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"
    FWD_LEFT = "fwd_left"
    FWD_RIGHT = "fwd_right"
    BACK_LEFT = "back_left"
    BACK_RIGHT = "back_right"


class Level(Enum):
    HIGH = "high"
    MID = "mid"
    LOW = "low"


# Horizontal cell -> (x, y) cube offset; x grows to the right, y forward.
_HORIZONTAL_XY = {
    Horizontal.PLACE: (0, 0),
    Horizontal.FWD: (0, 1),
    Horizontal.BACK: (0, -1),
    Horizontal.LEFT: (-1, 0),
    Horizontal.RIGHT: (1, 0),
    Horizontal.FWD_LEFT: (-1, 1),
    Horizontal.FWD_RIGHT: (1, 1),
    Horizontal.BACK_LEFT: (-1, -1),
    Horizontal.BACK_RIGHT: (1, -1),
}

_LEVEL_Z = {Level.HIGH: 1, Level.MID: 0, Level.LOW: -1}

# Clockwise sweep seen from above, starting at place.
_CLOCKWISE = (
    Horizontal.PLACE,
    Horizontal.FWD,
    Horizontal.FWD_RIGHT,
    Horizontal.RIGHT,
    Horizontal.BACK_RIGHT,
    Horizontal.BACK,
    Horizontal.BACK_LEFT,
    Horizontal.LEFT,
    Horizontal.FWD_LEFT,
)

_LEVEL_ORDER = (Level.HIGH, Level.MID, Level.LOW)
# Shift arithmetic counts upward: low=0, mid=1, high=2.
_LEVEL_RANK = {Level.LOW: 0, Level.MID: 1, Level.HIGH: 2}
_RANK_LEVEL = {v: k for k, v in _LEVEL_RANK.items()}


@dataclass(frozen=True)
class Direction:
    """One of the 26 kinesphere directions.

    (place, mid) is the kinesphere center, not a direction; constructing
    it raises ValueError.
    """

    horizontal: Horizontal
    level: Level

    def __post_init__(self) -> None:
        if self.horizontal is Horizontal.PLACE and self.level is Level.MID:
            raise ValueError("(place, mid) is the kinesphere center, not a direction")

    @property
    def cube(self) -> tuple[int, int, int]:
        """Raw (x, y, z) cube-cell offset, each component in {-1, 0, 1}."""
        x, y = _HORIZONTAL_XY[self.horizontal]
        return (x, y, _LEVEL_Z[self.level])

    @property
    def name(self) -> str:
        return f"{self.horizontal.value}_{self.level.value}"

    @classmethod
    def from_name(cls, name: str) -> "Direction":
        head, _, tail = name.rpartition("_")
        try:
            return cls(Horizontal(head), Level(tail))
        except ValueError:
            raise ValueError(f"unknown direction {name!r}") from None

    def __repr__(self) -> str:
        return f"Direction({self.name})"


def enumerate_directions() -> list[Direction]:
    """All 26 directions in canonical order.

    Level-major: the high row first, then mid, then low; within a row the
    horizontal sweeps clockwise starting at place.  (place, mid) is skipped.
    """
    out = []
    for level in _LEVEL_ORDER:
        for horizontal in _CLOCKWISE:
            if horizontal is Horizontal.PLACE and level is Level.MID:
                continue
            out.append(Direction(horizontal, level))
    return out


def direction_vector(d: Direction) -> tuple[float, float, float]:
    """Unit 3-vector for a direction (x=right, y=forward, z=up)."""
    x, y, z = d.cube
    n = math.sqrt(x * x + y * y + z * z)
    return (x / n, y / n, z / n)


class Reach(Enum):
    """Reach-space zone of the kinesphere (near / mid / far)."""

    NEAR = "near"
    MID = "mid"
    FAR = "far"

    @property
    def scale(self) -> float:
        """Default fraction of kinesphere radius; platforms may override."""
        return DEFAULT_REACH_SCALES[self]


DEFAULT_REACH_SCALES = {Reach.NEAR: 0.33, Reach.MID: 0.66, Reach.FAR: 1.0}
_REACH_ORDER = (Reach.NEAR, Reach.MID, Reach.FAR)
_REACH_RANK = {Reach.NEAR: 0, Reach.MID: 1, Reach.FAR: 2}


class Factor(Enum):
    WEIGHT = "weight"
    TIME = "time"
    SPACE = "space"
    FLOW = "flow"


class EffortQuality(Enum):
    """A single effort quality: one pole of one factor."""

    LIGHT = ("weight", "light")
    STRONG = ("weight", "strong")
    SUSTAINED = ("time", "sustained")
    SUDDEN = ("time", "sudden")
    INDIRECT = ("space", "indirect")
    DIRECT = ("space", "direct")
    FREE = ("flow", "free")
    BOUND = ("flow", "bound")

    @property
    def factor(self) -> Factor:
        return Factor(self.value[0])

    @property
    def pole(self) -> str:
        return self.value[1]

    @classmethod
    def from_pair(cls, factor: str, pole: str) -> "EffortQuality":
        for q in cls:
            if q.value == (factor, pole):
                return q
        raise ValueError(f"unknown quality [{factor}: {pole}]")

    def __repr__(self) -> str:
        return f"EffortQuality[{self.value[0]}: {self.value[1]}]"


def _check_qualities(qualities: frozenset) -> None:
    factors = [q.factor for q in qualities]
    if len(set(factors)) != len(factors):
        raise ValueError("at most one quality per effort factor")


def _check_beats(beats: Fraction) -> None:
    if not isinstance(beats, Fraction):
        raise TypeError(f"beats must be a Fraction, got {type(beats).__name__}")
    if beats <= 0:
        raise ValueError("duration must be strictly positive")


@dataclass(frozen=True)
class Span:
    """1-based source location of a token or statement."""

    line: int
    column: int
    length: int = 1


@dataclass(frozen=True)
class Move:
    label: str
    direction: Direction
    reach: Reach
    beats: Fraction
    qualities: frozenset = frozenset()
    span: Optional[Span] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        _check_beats(self.beats)
        _check_qualities(self.qualities)


@dataclass(frozen=True)
class Hold:
    beats: Fraction
    span: Optional[Span] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        _check_beats(self.beats)


@dataclass(frozen=True)
class PhraseRef:
    name: str
    span: Optional[Span] = field(default=None, compare=False)


Action = Union[Move, Hold, PhraseRef]


@dataclass(frozen=True)
class Theme:
    """A quality distributed over a 1-based inclusive range of actions."""

    quality: EffortQuality
    start: int
    end: int
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Phrase:
    name: str
    actions: tuple = ()
    themes: tuple = ()


class Axis(Enum):
    X = "x"
    Y = "y"
    Z = "z"


class TransformOp(Enum):
    RETROGRADE = "retrograde"
    MIRROR = "mirror"
    SCALE = "scale"
    LEVEL_SHIFT = "level_shift"
    EXTENT_SHIFT = "extent_shift"
    REPEAT = "repeat"
    CONCAT = "concat"


@dataclass(frozen=True)
class Ref:
    """Playlist expression: a bare phrase name."""

    name: str
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    """Playlist expression: a transform applied to sub-expressions."""

    op: TransformOp
    args: tuple = ()
    span: Optional[Span] = field(default=None, compare=False)


PhraseExpr = Union[Ref, Call]


@dataclass(frozen=True)
class PlaylistEntry:
    expr: PhraseExpr
    loop: bool = False
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Score:
    tempo: Fraction = Fraction(120)
    platform_ref: Optional[str] = None
    phrases: tuple = ()
    playlist: tuple = ()

    def phrase(self, name: str) -> Optional[Phrase]:
        for p in self.phrases:
            if p.name == name:
                return p
        return None


# ---------------------------------------------------------------------------
# Transforms


def retrograde(p: Phrase) -> Phrase:
    """Reverse the action order; theme ranges follow their actions."""
    n = len(p.actions)
    themes = tuple(
        replace(t, start=n + 1 - t.end, end=n + 1 - t.start) for t in p.themes
    )
    return Phrase(p.name, tuple(reversed(p.actions)), themes)


_MIRROR_SWAP = {"left": "right", "right": "left"}


def _mirror_label(label: str) -> str:
    return "_".join(_MIRROR_SWAP.get(part, part) for part in label.split("_"))


def _horizontal_from_xy(x: int, y: int) -> Horizontal:
    for h, xy in _HORIZONTAL_XY.items():
        if xy == (x, y):
            return h
    raise AssertionError("unreachable")


def mirror(p: Phrase, axis: Axis) -> Phrase:
    """Negate one cube axis of every Move's direction.

    Mirroring on x also swaps left/right designations in body labels.
    Holds and phrase references are unchanged.
    """
    out = []
    for a in p.actions:
        if not isinstance(a, Move):
            out.append(a)
            continue
        x, y, z = a.direction.cube
        if axis is Axis.X:
            x = -x
        elif axis is Axis.Y:
            y = -y
        else:
            z = -z
        d = Direction(_horizontal_from_xy(x, y), _RANK_LEVEL[z + 1])
        label = _mirror_label(a.label) if axis is Axis.X else a.label
        out.append(replace(a, label=label, direction=d))
    return Phrase(p.name, tuple(out), p.themes)


def scale_durations(p: Phrase, k) -> Phrase:
    """Multiply every duration by k (positive, finite)."""
    if isinstance(k, float) and not math.isfinite(k):
        raise ValueError("scale factor must be finite")
    k = Fraction(k)
    if k <= 0:
        raise ValueError("scale factor must be positive")
    out = []
    for a in p.actions:
        if isinstance(a, (Move, Hold)):
            out.append(replace(a, beats=a.beats * k))
        else:
            out.append(a)
    return Phrase(p.name, tuple(out), p.themes)


@dataclass(frozen=True)
class ShiftNote:
    """Diagnostic emitted when a level/extent shift loses intent."""

    index: int
    message: str
    span: Optional[Span] = field(default=None, compare=False)


def shift_level(d: Direction, steps: int) -> tuple[Direction, Optional[str]]:
    """Shift one direction's level, clamping and dodging (place, mid)."""
    rank = _LEVEL_RANK[d.level] + steps
    note = None
    if rank < 0 or rank > 2:
        rank = min(2, max(0, rank))
        note = f"level clamped at {_RANK_LEVEL[rank].value}"
    if d.horizontal is Horizontal.PLACE and rank == 1:
        # Landing on the center: back off one step toward where we came from.
        rank = rank - 1 if steps > 0 else rank + 1
        note = f"(place, mid) is not a direction; kept {_RANK_LEVEL[rank].value}"
    return Direction(d.horizontal, _RANK_LEVEL[rank]), note


def level_shift(p: Phrase, steps: int) -> tuple[Phrase, list[ShiftNote]]:
    """Shift every Move's level by `steps` (low < mid < high), clamped."""
    out, notes = [], []
    for i, a in enumerate(p.actions):
        if not isinstance(a, Move):
            out.append(a)
            continue
        d, note = shift_level(a.direction, steps)
        if note:
            notes.append(ShiftNote(i + 1, note, a.span))
        out.append(replace(a, direction=d))
    return Phrase(p.name, tuple(out), p.themes), notes


def extent_shift(p: Phrase, steps: int) -> tuple[Phrase, list[ShiftNote]]:
    """Shift every Move's reach zone by `steps` (near < mid < far), clamped."""
    out, notes = [], []
    for i, a in enumerate(p.actions):
        if not isinstance(a, Move):
            out.append(a)
            continue
        rank = _REACH_RANK[a.reach] + steps
        if rank < 0 or rank > 2:
            rank = min(2, max(0, rank))
            notes.append(
                ShiftNote(i + 1, f"reach clamped at {_REACH_ORDER[rank].value}", a.span)
            )
        out.append(replace(a, reach=_REACH_ORDER[rank]))
    return Phrase(p.name, tuple(out), p.themes), notes


def repeat(p: Phrase, n: int) -> Phrase:
    """Tile the action list n times (n >= 1); themes repeat per tile."""
    if n < 1:
        raise ValueError("repeat count must be >= 1")
    size = len(p.actions)
    themes = tuple(
        replace(t, start=t.start + i * size, end=t.end + i * size)
        for i in range(n)
        for t in p.themes
    )
    return Phrase(p.name, p.actions * n, themes)


def concat(a: Phrase, b: Phrase) -> Phrase:
    offset = len(a.actions)
    themes = a.themes + tuple(
        replace(t, start=t.start + offset, end=t.end + offset) for t in b.themes
    )
    return Phrase(a.name, a.actions + b.actions, themes)


def phrase_beats(p: Phrase) -> Fraction:
    """Total beats of a phrase's own actions (phrase refs count as zero)."""
    return sum(
        (a.beats for a in p.actions if isinstance(a, (Move, Hold))), Fraction(0)
    )


def total_duration(p: Phrase, tempo) -> float:
    """Seconds a phrase takes at the given tempo (beats per minute)."""
    tempo = Fraction(tempo)
    if tempo <= 0:
        raise ValueError("tempo must be positive")
    return float(phrase_beats(p) * 60 / tempo)


# ---------------------------------------------------------------------------
# Validation

# Words with grammatical meaning in the notation; they cannot name phrases
# or body labels, or printed scores would not re-parse.
RESERVED_WORDS = frozenset({
    "tempo", "platform", "phrase", "play", "loop", "hold", "do", "for",
    "theme", "from", "to", "near", "mid", "far",
    "retrograde", "mirror", "scale", "level_shift", "extent_shift",
    "repeat", "concat",
})


def valid_name(name: str) -> bool:
    return (
        bool(name)
        and (name[0].isalpha() or name[0] == "_")
        and all(c.isalnum() or c == "_" for c in name)
        and name not in RESERVED_WORDS
    )


@dataclass(frozen=True)
class ScoreDiagnostic:
    message: str
    span: Optional[Span] = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.message


def _expr_refs(expr: PhraseExpr) -> Iterable[Ref]:
    if isinstance(expr, Ref):
        yield expr
    else:
        for arg in expr.args:
            if isinstance(arg, (Ref, Call)):
                yield from _expr_refs(arg)


def validate_score(s: Score) -> list[ScoreDiagnostic]:
    """Check every Score/Phrase/Action invariant; empty list means valid."""
    diags: list[ScoreDiagnostic] = []
    if not (s.tempo > 0):
        diags.append(ScoreDiagnostic(f"tempo must be positive, got {s.tempo}"))

    names = [p.name for p in s.phrases]
    for name in sorted({n for n in names if names.count(n) > 1}):
        diags.append(ScoreDiagnostic(f"duplicate phrase {name!r}"))
    defined = set(names)

    for p in s.phrases:
        if not valid_name(p.name):
            diags.append(ScoreDiagnostic(f"illegal phrase name {p.name!r}"))
        for a in p.actions:
            if isinstance(a, PhraseRef) and a.name not in defined:
                diags.append(
                    ScoreDiagnostic(f"unresolved phrase {a.name!r}", a.span)
                )
            if isinstance(a, Move) and not valid_name(a.label):
                diags.append(
                    ScoreDiagnostic(f"illegal body label {a.label!r}", a.span)
                )
        n = len(p.actions)
        for t in p.themes:
            if not (1 <= t.start <= t.end <= n):
                diags.append(
                    ScoreDiagnostic(
                        f"theme range {t.start}..{t.end} outside phrase "
                        f"{p.name!r} ({n} actions)",
                        t.span,
                    )
                )

    for entry in s.playlist:
        for ref in _expr_refs(entry.expr):
            if ref.name not in defined:
                diags.append(
                    ScoreDiagnostic(f"unresolved phrase {ref.name!r}", ref.span)
                )

    diags.extend(_find_cycles(s))
    return diags


def _find_cycles(s: Score) -> list[ScoreDiagnostic]:
    graph = {
        p.name: [a.name for a in p.actions if isinstance(a, PhraseRef)]
        for p in s.phrases
    }
    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    out = []

    def visit(name: str, trail: list[str]) -> None:
        if state.get(name) == 2 or name not in graph:
            return
        if state.get(name) == 1:
            cycle = trail[trail.index(name):] + [name]
            out.append(
                ScoreDiagnostic("recursive phrase " + " -> ".join(cycle))
            )
            return
        state[name] = 1
        for dep in graph[name]:
            visit(dep, trail + [name])
        state[name] = 2

    for name in graph:
        visit(name, [])
    return out
