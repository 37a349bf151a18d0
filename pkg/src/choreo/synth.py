"""Trajectory synthesis: score + platform + pose library -> timed frames.

The pipeline is deliberately two-stage.  `flatten` evaluates the playlist
into a platform-independent symbolic trace (the artifact of the notation);
`compile_score` grounds that trace on one platform by looking up each
symbol's pose and interpolating between poses in joint space.  The same
score therefore always produces the same trace on every platform, while
trajectories differ per platform.

Effort qualities shape the motion: the Time factor picks the easing curve,
the Weight factor biases the pose vertically.  Space and Flow are carried
in the trace but not yet given a motion mapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .platform import (
    ECL,
    IKError,
    MissingPoseError,
    PlatformSpec,
    _label_chain,
    ecl_lookup,
    fk_full,
    ik_solve,
    kinesphere,
    within_limits,
)
from .score import (
    Axis,
    Call,
    Direction,
    EffortQuality,
    Factor,
    Hold,
    Move,
    Phrase,
    PhraseRef,
    Reach,
    Ref,
    Score,
    Span,
    TransformOp,
    concat,
    extent_shift,
    level_shift,
    mirror,
    repeat,
    retrograde,
    scale_durations,
    shift_level,
    validate_score,
)

DEFAULT_FRAME_RATE = 50.0


@dataclass(frozen=True)
class TraceMove:
    label: str
    direction: Direction
    reach: Reach
    beats: Fraction
    qualities: frozenset = frozenset()
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class TraceHold:
    beats: Fraction
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class SymbolicTrace:
    """Platform-independent intermediate form of one playlist pass."""

    entries: tuple = ()
    loop: bool = False

    @property
    def beats(self) -> Fraction:
        return sum((e.beats for e in self.entries), Fraction(0))

    def to_jsonable(self) -> list:
        out = []
        for e in self.entries:
            if isinstance(e, TraceMove):
                out.append({
                    "kind": "move",
                    "label": e.label,
                    "direction": e.direction.name,
                    "reach": e.reach.value,
                    "beats": str(e.beats),
                    "qualities": sorted(
                        f"{q.factor.value}:{q.pole}" for q in e.qualities
                    ),
                })
            else:
                out.append({"kind": "hold", "beats": str(e.beats)})
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True, separators=(",", ":"))


def _apply_themes(phrase: Phrase, entries: list) -> list:
    """Distribute theme qualities onto entries; inner-most wins per factor.

    An action's own quality is the innermost of all, so themes only fill
    factors the entry does not already carry.  Among a phrase's themes the
    narrowest range is applied first (wider ranges cannot overwrite it).
    """
    spans = [len(e) for e in entries]  # trace entries per action
    offsets = [0]
    for n in spans:
        offsets.append(offsets[-1] + n)
    flat = [e for group in entries for e in group]
    themes = sorted(
        enumerate(phrase.themes),
        key=lambda it: (it[1].end - it[1].start, it[0]),
    )
    for _, theme in themes:
        lo = offsets[theme.start - 1]
        hi = offsets[theme.end]
        for i in range(lo, hi):
            e = flat[i]
            if not isinstance(e, TraceMove):
                continue
            if any(q.factor == theme.quality.factor for q in e.qualities):
                continue
            flat[i] = replace(e, qualities=e.qualities | {theme.quality})
    return flat


def _expand_phrase(score: Score, phrase: Phrase) -> list:
    groups = []
    for action in phrase.actions:
        if isinstance(action, Move):
            groups.append([
                TraceMove(action.label, action.direction, action.reach,
                          action.beats, action.qualities, action.span)
            ])
        elif isinstance(action, Hold):
            groups.append([TraceHold(action.beats, action.span)])
        else:
            inner = score.phrase(action.name)
            groups.append(_expand_phrase(score, inner))
    return _apply_themes(phrase, groups)


def _eval_expr(score: Score, expr) -> Phrase:
    if isinstance(expr, Ref):
        return score.phrase(expr.name)
    assert isinstance(expr, Call)
    op = expr.op
    first = _eval_expr(score, expr.args[0])
    if op is TransformOp.RETROGRADE:
        return retrograde(first)
    if op is TransformOp.MIRROR:
        return mirror(first, expr.args[1])
    if op is TransformOp.SCALE:
        return scale_durations(first, expr.args[1])
    if op is TransformOp.LEVEL_SHIFT:
        return level_shift(first, expr.args[1])[0]
    if op is TransformOp.EXTENT_SHIFT:
        return extent_shift(first, expr.args[1])[0]
    if op is TransformOp.REPEAT:
        return repeat(first, expr.args[1])
    if op is TransformOp.CONCAT:
        return concat(first, _eval_expr(score, expr.args[1]))
    raise AssertionError(op)


def flatten(score: Score) -> SymbolicTrace:
    """Evaluate the playlist into a symbolic trace.

    Requires a valid score.  Playback stops at the first `loop` entry
    (which repeats forever), so entries after it are not part of the trace.
    """
    bad = validate_score(score)
    if bad:
        raise ValueError(f"score is not valid: {bad[0]}")
    entries: list = []
    loop = False
    for item in score.playlist:
        phrase = _eval_expr(score, item.expr)
        entries.extend(_expand_phrase(score, phrase))
        if item.loop:
            loop = True
            break
    return SymbolicTrace(tuple(entries), loop)


# ---------------------------------------------------------------------------
# Quality mappings


SUDDEN_EXPONENT = 1.0 / 3.0
WEIGHT_BIAS_FRACTION = 0.1


def easing(qualities) -> Callable[[float], float]:
    """Unit time-warp for an action's Time quality.

    Sustained gives a smooth cosine ease (zero slope at both ends); Sudden
    front-loads motion with a cube-root curve; otherwise linear.  Always
    monotone with u(0)=0 and u(1)=1.
    """
    time_quality = next((q for q in qualities if q.factor is Factor.TIME), None)
    if time_quality is EffortQuality.SUSTAINED:
        return lambda s: (1.0 - math.cos(math.pi * s)) / 2.0
    if time_quality is EffortQuality.SUDDEN:
        return lambda s: s ** SUDDEN_EXPONENT
    return lambda s: s


def weight_bias(qualities) -> float:
    """Vertical offset, as a fraction of kinesphere radius, for the Weight
    quality: Light lifts, Strong sinks."""
    weight = next((q for q in qualities if q.factor is Factor.WEIGHT), None)
    if weight is EffortQuality.LIGHT:
        return WEIGHT_BIAS_FRACTION
    if weight is EffortQuality.STRONG:
        return -WEIGHT_BIAS_FRACTION
    return 0.0


# ---------------------------------------------------------------------------
# Hover and breath profiles


class HoverKind:
    BOUNCE = "bounce"
    DRAG = "drag"


@dataclass(frozen=True)
class HoverProfile:
    kind: str  # HoverKind
    amplitude: float  # meters
    cadence: float  # rad/s

    def __post_init__(self) -> None:
        if self.kind not in (HoverKind.BOUNCE, HoverKind.DRAG):
            raise ValueError(f"unknown hover kind {self.kind!r}")
        if self.amplitude <= 0 or self.cadence <= 0:
            raise ValueError("amplitude and cadence must be positive")


# Bounce rides higher, bigger, and quicker than drag.
DEFAULT_BOUNCE = HoverProfile(HoverKind.BOUNCE, amplitude=0.30, cadence=2.0)
DEFAULT_DRAG = HoverProfile(HoverKind.DRAG, amplitude=0.15, cadence=0.8)


def hover_offset(profile: HoverProfile, t: float) -> float:
    """Vertical offset in meters at time t (t >= 0)."""
    s = abs(math.sin(profile.cadence * t))
    if profile.kind == HoverKind.BOUNCE:
        return profile.amplitude * s
    return profile.amplitude * (1.0 - s)


@dataclass(frozen=True)
class BreathProfile:
    """Per-axis sinusoidal breath offsets.

    Defaults keep the sagittal (y) amplitude dominant, the horizontal (x)
    onset earliest, and the vertical (z) range smallest.  Phases are stored
    with x's lead expressed as a negative equivalent angle so the defaults
    satisfy phase_x < phase_y while x still peaks first within a cycle.
    """

    amplitude: tuple[float, float, float] = (0.012, 0.020, 0.006)
    phase: tuple[float, float, float] = (1.0 - 2.0 * math.pi, 0.5, 0.0)
    period: float = 4.0  # seconds

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValueError("period must be positive")


def breath_offset(profile: BreathProfile, t: float) -> tuple[float, float, float]:
    w = 2.0 * math.pi * t / profile.period
    return tuple(
        a * math.sin(w + phi)
        for a, phi in zip(profile.amplitude, profile.phase)
    )


# ---------------------------------------------------------------------------
# Compilation


@dataclass(frozen=True)
class Trajectory:
    frames_t: np.ndarray  # (n,) seconds, uniform 1/rate grid from 0
    frames_q: np.ndarray  # (n, joints)
    rate: float
    trace_index: np.ndarray  # (n,) which trace entry each frame belongs to
    loop: bool = False
    loop_start: float = 0.0  # wrap target for looping playback

    @property
    def duration(self) -> float:
        return float(self.frames_t[-1]) if len(self.frames_t) else 0.0

    def frame_at(self, playhead: float) -> int:
        if not len(self.frames_t):
            raise ValueError("empty trajectory")
        i = int(round(playhead * self.rate))
        return min(max(i, 0), len(self.frames_t) - 1)


@dataclass(frozen=True)
class UnappliedBias:
    """A Weight bias that could not be realized as a pose correction."""

    entry_index: int
    bias: float
    reason: str


class CompileError(Exception):
    """Compilation failed; all missing poses are reported at once."""

    def __init__(self, missing: list):
        self.missing = missing  # list of (entry_index, MissingPoseError)
        lines = [str(e) for _, e in missing]
        super().__init__("missing poses: " + "; ".join(lines))


@dataclass(frozen=True)
class CompiledScore:
    trace: SymbolicTrace
    trajectory: Trajectory
    unapplied: tuple = ()


def _biased_pose(
    spec: PlatformSpec,
    ecl: ECL,
    entry: TraceMove,
    base: np.ndarray,
    bias: float,
):
    """Perturb a pose vertically by the Weight bias, keeping the symbol
    intact.

    The correction only runs when the library also holds the level-shifted
    neighbor key, evidence the platform can pose in the biased region;
    otherwise the bias is recorded as metadata.
    """
    shifted, _ = shift_level(entry.direction, 1 if bias > 0 else -1)
    neighbor = (entry.label, shifted, entry.reach)
    if neighbor not in ecl.entries:
        return None, f"no pose toward {shifted.name} to lean on"
    sphere = kinesphere(spec, entry.label)
    fk = fk_full(spec, base)
    distal = _label_chain(spec, entry.label)[-1]
    target = fk.endpoints[distal] + np.array([0.0, 0.0, bias * sphere.radius])
    try:
        return ik_solve(spec, entry.label, target, base), None
    except IKError as e:
        return None, str(e)


def compile_score(
    score: Score,
    spec: PlatformSpec,
    ecl: ECL,
    rate: float = DEFAULT_FRAME_RATE,
    start_config: Optional[Sequence[float]] = None,
) -> CompiledScore:
    """Compile a valid score into a frame-by-frame joint trajectory.

    Each Move interpolates in joint space from the current configuration to
    its pose, time-warped by its easing; Holds freeze the configuration.
    Frames sit on a uniform 1/rate grid from t=0; the final frame lands on
    the score's total duration whenever that duration lies on the grid.
    """
    if rate <= 0:
        raise ValueError("frame rate must be positive")
    trace = flatten(score)
    tempo = float(score.tempo)

    # Resolve every pose first so a live edit surfaces all gaps in one go.
    missing = []
    poses: list = []
    for i, e in enumerate(trace.entries):
        if isinstance(e, TraceMove):
            try:
                poses.append(ecl_lookup(ecl, e.label, e.direction, e.reach))
            except MissingPoseError as err:
                poses.append(None)
                missing.append((i, err))
        else:
            poses.append(None)
    if missing:
        raise CompileError(missing)

    unapplied = []
    current = (
        spec.zero_config()
        if start_config is None
        else np.asarray(start_config, dtype=float)
    )
    segments = []  # (t0, t1, q_from, q_to, ease, entry_index)
    t = 0.0
    for i, e in enumerate(trace.entries):
        seconds = float(e.beats) * 60.0 / tempo
        if isinstance(e, TraceHold):
            segments.append((t, t + seconds, current, current, None, i))
        else:
            target = poses[i]
            bias = weight_bias(e.qualities)
            if bias:
                corrected, why = _biased_pose(spec, ecl, e, target, bias)
                if corrected is not None:
                    target = corrected
                else:
                    unapplied.append(UnappliedBias(i, bias, why))
            segments.append((t, t + seconds, current, target, easing(e.qualities), i))
            current = target
        t += seconds

    total = t
    n_frames = int(math.floor(total * rate + 1e-9)) + 1
    joints = spec.joint_count
    frames_t = np.arange(n_frames) / rate
    frames_q = np.zeros((n_frames, joints))
    trace_index = np.zeros(n_frames, dtype=int)
    start = spec.zero_config() if start_config is None else np.asarray(start_config)

    seg = 0
    for k in range(n_frames):
        tk = frames_t[k]
        while seg + 1 < len(segments) and tk >= segments[seg][1] - 1e-12:
            seg += 1
        if not segments:
            frames_q[k] = start
            continue
        t0, t1, q_from, q_to, ease, idx = segments[seg]
        trace_index[k] = idx
        if ease is None or t1 <= t0:
            frames_q[k] = q_to
        else:
            s = min(1.0, max(0.0, (tk - t0) / (t1 - t0)))
            u = ease(s)
            frames_q[k] = q_from + (q_to - q_from) * u

    loop_start = 0.0
    if trace.loop:
        # The loop region is the final playlist entry's stretch; playback
        # wraps there.  flatten() cut the playlist at the loop entry, so the
        # region start is the duration of everything before it.
        loop_start = _loop_start_seconds(score, tempo)

    traj = Trajectory(frames_t, frames_q, rate, trace_index, trace.loop, loop_start)
    return CompiledScore(trace, traj, tuple(unapplied))


def _loop_start_seconds(score: Score, tempo: float) -> float:
    beats = Fraction(0)
    for item in score.playlist:
        if item.loop:
            break
        phrase = _eval_expr(score, item.expr)
        beats += _phrase_total_beats(score, phrase)
    return float(beats) * 60.0 / tempo


def _phrase_total_beats(score: Score, phrase: Phrase) -> Fraction:
    total = Fraction(0)
    for a in phrase.actions:
        if isinstance(a, (Move, Hold)):
            total += a.beats
        else:
            total += _phrase_total_beats(score, score.phrase(a.name))
    return total


def trajectory_to_dict(
    compiled: CompiledScore, spec: PlatformSpec
) -> dict:
    """The `*.traj.json` document: platform, rate, frames, trace."""
    traj = compiled.trajectory
    return {
        "format": 1,
        "platform": spec.name,
        "rate": traj.rate,
        "loop": traj.loop,
        "frames": [
            [round(float(t), 9)] + [float(x) for x in q]
            for t, q in zip(traj.frames_t, traj.frames_q)
        ],
        "trace": compiled.trace.to_jsonable(),
    }


def check_trajectory_limits(spec: PlatformSpec, traj: Trajectory) -> bool:
    return all(within_limits(spec, q) for q in traj.frames_q)
