import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from choreo.notation import parse
from choreo.platform import load_ecl, load_platform
from choreo.score import (
    Direction,
    EffortQuality,
    Horizontal,
    Level,
    Hold,
    Move,
    Phrase,
    PhraseRef,
    PlaylistEntry,
    Reach,
    Ref,
    Score,
    Theme,
)
from choreo.synth import (
    BreathProfile,
    CompileError,
    DEFAULT_BOUNCE,
    DEFAULT_DRAG,
    HoverKind,
    HoverProfile,
    SymbolicTrace,
    TraceHold,
    TraceMove,
    breath_offset,
    compile_score,
    check_trajectory_limits,
    easing,
    flatten,
    hover_offset,
    trajectory_to_dict,
    weight_bias,
)

FIX = Path(__file__).resolve().parents[1] / "src" / "choreo" / "fixtures"


@pytest.fixture(scope="module")
def arm3():
    spec = load_platform(FIX / "arm3.eurdf.json")
    return spec, load_ecl(FIX / "arm3.ecl.json", spec)


@pytest.fixture(scope="module")
def spatial3():
    spec = load_platform(FIX / "spatial3.eurdf.json")
    return spec, load_ecl(FIX / "spatial3.ecl.json", spec)


def mid(name):
    return Direction.from_name(name + "_mid")


def score_of(*phrases, playlist=None, tempo=60):
    entries = playlist or [PlaylistEntry(Ref(p.name)) for p in phrases]
    return Score(tempo=Fraction(tempo), phrases=tuple(phrases), playlist=tuple(entries))


# ---------------------------------------------------------------------------
# flatten


def test_flatten_play_then_retrograde(arm3):
    text = (
        "phrase p {\n  arm -> fwd_mid far for 1\n  arm -> left_mid near for 2\n}\n"
        "play p\nplay retrograde(p)\n"
    )
    trace = flatten(parse(text))
    moves = [e.direction.name for e in trace.entries]
    assert moves == ["fwd_mid", "left_mid", "left_mid", "fwd_mid"]
    assert [e.beats for e in trace.entries] == [1, 2, 2, 1]


def test_flatten_repeat_is_double_flatten():
    text_once = "phrase p {\n  arm -> fwd_mid far for 1\n  hold for 1\n}\nplay p\n"
    text_twice = text_once.replace("play p", "play repeat(p, 2)")
    once = flatten(parse(text_once))
    twice = flatten(parse(text_twice))
    assert twice.entries == once.entries + once.entries


def test_flatten_invariant_under_reprint():
    from choreo.notation import print_score

    s = parse((FIX / "demo.mvt").read_text())
    assert flatten(parse(print_score(s))) == flatten(s)


def test_flatten_expands_refs_and_distributes_themes():
    inner = Phrase("inner", (
        Move("arm", mid("fwd"), Reach.FAR, Fraction(1),
             frozenset({EffortQuality.SUSTAINED})),
    ))
    outer = Phrase("outer", (
        PhraseRef("inner"),
        Move("arm", mid("back"), Reach.NEAR, Fraction(1)),
    ), (Theme(EffortQuality.SUDDEN, 1, 2), Theme(EffortQuality.LIGHT, 1, 1)))
    trace = flatten(score_of(inner, outer, playlist=[PlaylistEntry(Ref("outer"))]))
    first, second = trace.entries
    # The inner move's own Time quality wins over the outer theme.
    assert first.qualities == frozenset({EffortQuality.SUSTAINED, EffortQuality.LIGHT})
    assert second.qualities == frozenset({EffortQuality.SUDDEN})


def test_flatten_inner_theme_wins_over_outer():
    p = Phrase("p", (
        Move("arm", mid("fwd"), Reach.FAR, Fraction(1)),
        Move("arm", mid("back"), Reach.FAR, Fraction(1)),
    ), (
        Theme(EffortQuality.SUDDEN, 1, 2),     # outer: whole phrase
        Theme(EffortQuality.SUSTAINED, 2, 2),  # inner: narrower range wins
    ))
    trace = flatten(score_of(p))
    assert EffortQuality.SUDDEN in trace.entries[0].qualities
    assert EffortQuality.SUSTAINED in trace.entries[1].qualities
    assert EffortQuality.SUDDEN not in trace.entries[1].qualities


def test_flatten_stops_at_loop():
    text = (
        "phrase a {\n  arm -> fwd_mid far for 1\n}\n"
        "phrase b {\n  arm -> back_mid far for 1\n}\n"
        "loop a\nplay b\n"
    )
    trace = flatten(parse(text))
    assert trace.loop
    assert [e.direction.name for e in trace.entries] == ["fwd_mid"]


# ---------------------------------------------------------------------------
# easing / weight bias


def test_easing_linear_default():
    u = easing(frozenset())
    assert u(0.5) == 0.5
    assert u(0.0) == 0.0 and u(1.0) == 1.0


def test_easing_sustained_cosine():
    u = easing(frozenset({EffortQuality.SUSTAINED}))
    assert u(0.5) == pytest.approx(0.5, abs=1e-12)
    eps = 1e-6
    assert u(eps) / eps < 1e-4          # flat start
    assert (1 - u(1 - eps)) / eps < 1e-4  # flat end


def test_easing_sudden_cube_root():
    u = easing(frozenset({EffortQuality.SUDDEN}))
    assert u(0.125) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("qualities", [
    frozenset(),
    frozenset({EffortQuality.SUSTAINED}),
    frozenset({EffortQuality.SUDDEN}),
])
def test_easing_monotone_unit_range(qualities):
    u = easing(qualities)
    xs = [i / 1000 for i in range(1001)]
    ys = [u(x) for x in xs]
    assert ys[0] == pytest.approx(0.0, abs=1e-12)
    assert ys[-1] == pytest.approx(1.0, abs=1e-12)
    assert all(b >= a - 1e-12 for a, b in zip(ys, ys[1:]))


def test_weight_bias_table():
    assert weight_bias(frozenset({EffortQuality.LIGHT})) == 0.1
    assert weight_bias(frozenset({EffortQuality.STRONG})) == -0.1
    assert weight_bias(frozenset()) == 0.0
    assert weight_bias(frozenset({EffortQuality.SUDDEN})) == 0.0


# ---------------------------------------------------------------------------
# hover / breath


def test_hover_closed_forms():
    b = HoverProfile(HoverKind.BOUNCE, 0.4, 1.5)
    d = HoverProfile(HoverKind.DRAG, 0.4, 1.5)
    assert hover_offset(b, 0.0) == 0.0
    assert hover_offset(d, 0.0) == 0.4
    for i in range(200):
        t = i * 0.17
        assert hover_offset(b, t) + hover_offset(d, t) == pytest.approx(0.4, abs=1e-12)
        assert 0.0 <= hover_offset(b, t) <= 0.4


def test_default_bounce_exceeds_drag():
    assert DEFAULT_BOUNCE.amplitude > DEFAULT_DRAG.amplitude
    assert DEFAULT_BOUNCE.cadence > DEFAULT_DRAG.cadence


def test_breath_defaults_follow_axis_ordering():
    p = BreathProfile()
    ax, ay, az = p.amplitude
    assert ay > ax > az
    assert p.phase[0] < p.phase[1]
    # x peaks before y and z within the first cycle.
    def first_peak(axis):
        best_t, best_v = 0.0, -math.inf
        for i in range(4000):
            t = i * p.period / 4000
            v = breath_offset(p, t)[axis]
            if v > best_v:
                best_t, best_v = t, v
        return best_t
    assert first_peak(0) < first_peak(1) < first_peak(2)


def test_breath_offset_is_sinusoid():
    p = BreathProfile(amplitude=(1.0, 2.0, 0.5), phase=(0.0, 0.0, 0.0), period=2.0)
    x, y, z = breath_offset(p, 0.5)
    assert (x, y, z) == pytest.approx((1.0, 2.0, 0.5))


# ---------------------------------------------------------------------------
# compile_score


def test_compile_endpoint_condition(arm3):
    spec, ecl = arm3
    s = parse("tempo 60\nphrase p {\n  arm -> fwd_mid far for 2\n}\nplay p\n")
    out = compile_score(s, spec, ecl, rate=10.0)
    traj = out.trajectory
    assert len(traj.frames_t) == 21
    assert traj.duration == pytest.approx(2.0)
    target = ecl.entries[("arm", mid("fwd"), Reach.FAR)]
    assert np.allclose(traj.frames_q[-1], target)
    assert np.allclose(traj.frames_q[0], spec.zero_config())


def test_compile_hold_freezes(arm3):
    spec, ecl = arm3
    s = parse(
        "tempo 60\nphrase p {\n  arm -> fwd_mid far for 1\n  hold for 1\n}\nplay p\n"
    )
    traj = compile_score(s, spec, ecl, rate=10.0).trajectory
    hold_frames = traj.frames_q[traj.trace_index == 1]
    assert len(hold_frames) >= 10
    assert np.allclose(hold_frames, hold_frames[0])


def test_compile_duration_within_frame_period(arm3):
    spec, ecl = arm3
    s = parse("tempo 90\nphrase p {\n  arm -> left_mid near for 7/3\n}\nplay p\n")
    traj = compile_score(s, spec, ecl, rate=50.0).trajectory
    expect = float(Fraction(7, 3) * 60 / 90)
    assert abs(traj.duration - expect) <= 1.0 / 50.0


def test_compile_missing_keys_batched(arm3):
    spec, ecl = arm3
    s = parse(
        "phrase p {\n"
        "  arm -> fwd_high far for 1\n"   # off-plane: not in the library
        "  arm -> place_low near for 1\n"  # also missing
        "  arm -> fwd_mid far for 1\n"     # present
        "}\nplay p\n"
    )
    with pytest.raises(CompileError) as exc:
        compile_score(s, spec, ecl)
    assert len(exc.value.missing) == 2
    assert all(e.suggestion is not None for _, e in exc.value.missing)


def test_compile_respects_limits_and_rate(arm3):
    spec, ecl = arm3
    s = parse((FIX / "demo.mvt").read_text())
    out = compile_score(s, spec, ecl, rate=25.0)
    assert check_trajectory_limits(spec, out.trajectory)
    dts = np.diff(out.trajectory.frames_t)
    assert np.allclose(dts, 1 / 25.0)
    with pytest.raises(ValueError):
        compile_score(s, spec, ecl, rate=0)


def test_platform_invariance_of_trace(arm3, spatial3):
    spec_a, ecl_a = arm3
    spec_b, ecl_b = spatial3
    s = parse((FIX / "demo.mvt").read_text())
    a = compile_score(s, spec_a, ecl_a)
    b = compile_score(s, spec_b, ecl_b)
    assert a.trace.canonical_json() == b.trace.canonical_json()
    assert a.trajectory.frames_q.shape[1] != b.trajectory.frames_q.shape[1] or \
        not np.array_equal(a.trajectory.frames_q, b.trajectory.frames_q)


def test_retrograde_duality_single_segment(arm3):
    # One target-to-target segment: [A, B] against retrograde [B, A], both
    # compiled from the same start config with linear easing.
    spec, ecl = arm3
    base = "tempo 60\nphrase p {\n  arm -> fwd_mid far for 1\n  arm -> left_mid near for 1\n}\n"
    fwd = compile_score(parse(base + "play p\n"), spec, ecl, rate=20.0)
    rev = compile_score(parse(base + "play retrograde(p)\n"), spec, ecl, rate=20.0)

    # Both visit the reversed sequence of targets.
    ta = ecl.entries[("arm", mid("fwd"), Reach.FAR)]
    tb = ecl.entries[("arm", mid("left"), Reach.NEAR)]
    assert np.allclose(fwd.trajectory.frames_q[20], ta)
    assert np.allclose(fwd.trajectory.frames_q[-1], tb)
    assert np.allclose(rev.trajectory.frames_q[20], tb)
    assert np.allclose(rev.trajectory.frames_q[-1], ta)

    # The target-to-target stretch of one is the other reversed, frame for
    # frame, to 1e-9.
    seg_fwd = fwd.trajectory.frames_q[20:41]  # A -> B
    seg_rev = rev.trajectory.frames_q[20:41]  # B -> A
    assert np.max(np.abs(seg_fwd - seg_rev[::-1])) < 1e-9


def test_weight_bias_perturbs_pose_or_reports(arm3):
    spec, ecl = arm3
    plain = parse("phrase p {\n  arm -> fwd_mid mid for 1\n}\nplay p\n")
    light = parse("phrase p {\n  arm -> fwd_mid mid for 1 [weight: light]\n}\nplay p\n")
    a = compile_score(plain, spec, ecl)
    b = compile_score(light, spec, ecl)
    # arm3 is planar: it holds no pose toward fwd_high, so the bias cannot
    # be realized and must be reported, never silently dropped.
    assert len(b.unapplied) == 1
    assert b.unapplied[0].bias == 0.1
    assert np.allclose(a.trajectory.frames_q, b.trajectory.frames_q)


def test_weight_bias_applied_on_spatial_platform(spatial3):
    spec, ecl = spatial3
    plain = parse("phrase p {\n  arm -> fwd_mid mid for 1\n}\nplay p\n")
    light = parse("phrase p {\n  arm -> fwd_mid mid for 1 [weight: light]\n}\nplay p\n")
    a = compile_score(plain, spec, ecl)
    b = compile_score(light, spec, ecl)
    assert b.unapplied == ()
    from choreo.platform import fk_full

    za = fk_full(spec, a.trajectory.frames_q[-1]).endpoints[-1][2]
    zb = fk_full(spec, b.trajectory.frames_q[-1]).endpoints[-1][2]
    from choreo.platform import kinesphere

    radius = kinesphere(spec, "arm").radius
    assert zb - za == pytest.approx(0.1 * radius, abs=2e-3 * radius)
    # The symbol itself stays intact: the trace shows the original key.
    assert b.trace.entries[0].direction.name == "fwd_mid"


def test_trajectory_dict_shape(arm3):
    spec, ecl = arm3
    s = parse("tempo 60\nphrase p {\n  arm -> fwd_mid far for 1\n}\nplay p\n")
    out = compile_score(s, spec, ecl, rate=10.0)
    doc = trajectory_to_dict(out, spec)
    assert doc["platform"] == "arm3"
    assert doc["rate"] == 10.0
    assert len(doc["frames"]) == 11
    assert all(len(f) == 1 + spec.joint_count for f in doc["frames"])
    assert doc["trace"][0]["kind"] == "move"


def test_loop_metadata(arm3):
    spec, ecl = arm3
    s = parse(
        "tempo 60\n"
        "phrase a {\n  arm -> fwd_mid far for 1\n}\n"
        "phrase b {\n  arm -> back_mid far for 2\n}\n"
        "play a\nloop b\n"
    )
    traj = compile_score(s, spec, ecl).trajectory
    assert traj.loop
    assert traj.loop_start == pytest.approx(1.0)
    assert traj.duration == pytest.approx(3.0)
