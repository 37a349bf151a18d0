"""Platform descriptions, kinematics, and the pose library.

A platform file (`*.eurdf.json`) describes a tree of revolute links with
overlapping body-part labels, so an operator can address "arm" and
"forearm" on the same hardware.  The pose library (`*.ecl.json`) grounds
the platform-invariant (label, direction, reach) symbols in joint space;
it is synthesized here by walking the direction inventory as a movement
scale, solving each target with cyclic coordinate descent.

Geometry conventions: every link extends along its local `direction`
vector (default +x) and rotates about its local `axis`; a link's frame is
its parent's frame times its own joint rotation.  Lengths are meters,
angles radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .score import (
    DEFAULT_REACH_SCALES,
    Direction,
    Reach,
    direction_vector,
    enumerate_directions,
)

FORMAT_VERSION = 1

IK_TOLERANCE_FRACTION = 1e-3  # of the label's kinesphere radius
IK_MAX_SWEEPS = 200


class PlatformError(Exception):
    """A platform or pose-library file failed to load or validate.

    `path` is a JSON-pointer-style location of the offending element.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Link:
    name: str
    parent: Optional[str]  # None = attached to the root
    axis: tuple[float, float, float]
    length: float
    limits: tuple[float, float]
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)


@dataclass(frozen=True)
class PlatformSpec:
    name: str
    links: tuple[Link, ...]
    labels: dict[str, frozenset[str]]
    root: tuple[float, float, float] = (0.0, 0.0, 0.0)
    reach_scales: dict[Reach, float] = field(
        default_factory=lambda: dict(DEFAULT_REACH_SCALES)
    )

    @property
    def joint_count(self) -> int:
        return len(self.links)

    def index_of(self, link_name: str) -> int:
        for i, l in enumerate(self.links):
            if l.name == link_name:
                return i
        raise KeyError(link_name)

    def zero_config(self) -> np.ndarray:
        q = np.zeros(self.joint_count)
        # Zero may fall outside asymmetric limits; clamp per joint.
        return clamp_to_limits(self, q)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "name": self.name,
            "root": list(self.root),
            "links": [
                {
                    "name": l.name,
                    "parent": l.parent,
                    "axis": list(l.axis),
                    "length": l.length,
                    "limits": list(l.limits),
                    "direction": list(l.direction),
                }
                for l in self.links
            ],
            "labels": {k: sorted(v) for k, v in self.labels.items()},
            "reach_scales": {r.value: s for r, s in self.reach_scales.items()},
        }


@dataclass(frozen=True)
class Kinesphere:
    center: tuple[float, float, float]
    radius: float


def _unit(v: Sequence[float], path: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise PlatformError("expected a 3-vector", path)
    n = float(np.linalg.norm(arr))
    if n < 1e-12:
        raise PlatformError("axis must be nonzero", path)
    arr = arr / n
    return (float(arr[0]), float(arr[1]), float(arr[2]))


def _validate_spec(spec: PlatformSpec) -> None:
    names = [l.name for l in spec.links]
    if len(set(names)) != len(names):
        raise PlatformError("duplicate link names", "/links")
    known = set(names)
    children: dict[Optional[str], list[str]] = {}
    for i, l in enumerate(spec.links):
        if l.parent is not None and l.parent not in known:
            raise PlatformError(f"unknown parent {l.parent!r}", f"/links/{i}/parent")
        if l.parent == l.name:
            raise PlatformError("link cannot be its own parent", f"/links/{i}/parent")
        if l.length < 0:
            raise PlatformError("length must be >= 0", f"/links/{i}/length")
        lo, hi = l.limits
        if not (lo <= hi):
            raise PlatformError(f"limits out of order [{lo}, {hi}]", f"/links/{i}/limits")
        children.setdefault(l.parent, []).append(l.name)

    # The link graph must be a tree rooted at the root: every link reachable,
    # no cycles.
    seen: set[str] = set()
    stack = list(children.get(None, []))
    while stack:
        n = stack.pop()
        if n in seen:
            raise PlatformError(f"link {n!r} reached twice (cycle?)", "/links")
        seen.add(n)
        stack.extend(children.get(n, []))
    if seen != known:
        orphans = sorted(known - seen)
        raise PlatformError(f"links not connected to root: {orphans}", "/links")

    if not spec.labels:
        raise PlatformError("at least one label required", "/labels")
    parent_of = {l.name: l.parent for l in spec.links}
    for label, members in spec.labels.items():
        if not members:
            raise PlatformError("label has no links", f"/labels/{label}")
        for m in members:
            if m not in known:
                raise PlatformError(f"unknown link {m!r}", f"/labels/{label}")
        # Connected chain within the tree: one proximal member, and no member
        # parents more than one other member.
        roots = [m for m in members if parent_of[m] not in members]
        inner_parents = [parent_of[m] for m in members if parent_of[m] in members]
        if len(roots) != 1 or len(set(inner_parents)) != len(inner_parents):
            raise PlatformError("label links must form one connected chain",
                                f"/labels/{label}")

    scales = spec.reach_scales
    if not (0 < scales[Reach.NEAR] < scales[Reach.MID] < scales[Reach.FAR] <= 1.0):
        raise PlatformError("reach scales must satisfy 0 < near < mid < far <= 1",
                            "/reach_scales")


def load_platform(path: Union[str, Path]) -> PlatformSpec:
    """Load and validate a `*.eurdf.json` platform description."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise PlatformError(f"cannot read {path}: {e.strerror or e}") from None
    except json.JSONDecodeError as e:
        raise PlatformError(f"invalid JSON in {path}: {e}") from None
    return platform_from_dict(data)


def platform_from_dict(data: dict) -> PlatformSpec:
    if not isinstance(data, dict):
        raise PlatformError("expected a JSON object", "/")
    if data.get("format") != FORMAT_VERSION:
        raise PlatformError(f"unsupported format {data.get('format')!r}", "/format")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise PlatformError("missing platform name", "/name")

    links = []
    for i, raw in enumerate(data.get("links", [])):
        where = f"/links/{i}"
        try:
            limits = tuple(float(x) for x in raw["limits"])
            if len(limits) != 2:
                raise PlatformError("limits must be [lo, hi]", f"{where}/limits")
            links.append(
                Link(
                    name=str(raw["name"]),
                    parent=raw.get("parent"),
                    axis=_unit(raw["axis"], f"{where}/axis"),
                    length=float(raw["length"]),
                    limits=limits,
                    direction=_unit(raw.get("direction", (1, 0, 0)),
                                    f"{where}/direction"),
                )
            )
        except KeyError as e:
            raise PlatformError(f"missing field {e.args[0]!r}", where) from None
        except (TypeError, ValueError):
            raise PlatformError("malformed link", where) from None
    if not links:
        raise PlatformError("platform needs at least one link", "/links")

    labels_raw = data.get("labels", {})
    if not isinstance(labels_raw, dict):
        raise PlatformError("labels must be an object", "/labels")
    labels = {str(k): frozenset(map(str, v)) for k, v in labels_raw.items()}

    root_raw = data.get("root", (0, 0, 0))
    root = tuple(float(x) for x in root_raw)
    if len(root) != 3:
        raise PlatformError("root must be a 3-vector", "/root")

    scales = dict(DEFAULT_REACH_SCALES)
    for key, val in data.get("reach_scales", {}).items():
        try:
            scales[Reach(key)] = float(val)
        except ValueError:
            raise PlatformError(f"unknown reach zone {key!r}", "/reach_scales") from None

    spec = PlatformSpec(name=name, links=tuple(links), labels=labels,
                        root=root, reach_scales=scales)
    _validate_spec(spec)
    return spec


# ---------------------------------------------------------------------------
# Kinematics


def _rotation(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def check_config(spec: PlatformSpec, q: Sequence[float]) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (spec.joint_count,):
        raise ValueError(
            f"config has {q.shape[0] if q.ndim == 1 else '?'} angles, "
            f"platform {spec.name!r} has {spec.joint_count} joints"
        )
    return q


def clamp_to_limits(spec: PlatformSpec, q: np.ndarray) -> np.ndarray:
    g = _geometry(spec)
    return np.clip(q, g.lo, g.hi)


def within_limits(spec: PlatformSpec, q: Sequence[float], tol: float = 1e-9) -> bool:
    q = np.asarray(q, dtype=float)
    return all(
        l.limits[0] - tol <= qi <= l.limits[1] + tol
        for l, qi in zip(spec.links, q)
    )


@dataclass
class FKResult:
    """World-frame pose of every link for one configuration."""

    starts: np.ndarray     # (n, 3) proximal joint positions
    endpoints: np.ndarray  # (n, 3) distal endpoints
    rotations: np.ndarray  # (n, 3, 3) composed frames
    world_axes: np.ndarray  # (n, 3) each joint's rotation axis in world frame


def forward_kinematics(spec: PlatformSpec, q: Sequence[float]) -> dict[str, tuple]:
    """Map of link name -> world endpoint for a configuration."""
    fk = fk_full(spec, q)
    return {
        l.name: tuple(fk.endpoints[i]) for i, l in enumerate(spec.links)
    }


class _Geometry:
    """Per-spec arrays precomputed once; fk_full runs in the hot loop."""

    def __init__(self, spec: PlatformSpec):
        index = {l.name: i for i, l in enumerate(spec.links)}
        self.parents = [index[l.parent] if l.parent else -1 for l in spec.links]
        self.axes = [np.asarray(l.axis, dtype=float) for l in spec.links]
        self.reaches = [
            l.length * np.asarray(l.direction, dtype=float) for l in spec.links
        ]
        self.root = np.asarray(spec.root, dtype=float)
        self.lo = np.array([l.limits[0] for l in spec.links])
        self.hi = np.array([l.limits[1] for l in spec.links])


def _geometry(spec: PlatformSpec) -> _Geometry:
    cached = getattr(spec, "_geometry", None)
    if cached is None:
        cached = _Geometry(spec)
        object.__setattr__(spec, "_geometry", cached)
    return cached


def fk_full(spec: PlatformSpec, q: Sequence[float]) -> FKResult:
    q = check_config(spec, q)
    g = _geometry(spec)
    n = spec.joint_count
    starts = np.zeros((n, 3))
    endpoints = np.zeros((n, 3))
    rotations = np.zeros((n, 3, 3))
    world_axes = np.zeros((n, 3))
    for i in range(n):
        p = g.parents[i]
        if p < 0:
            parent_rot = None
            start = g.root
        else:
            parent_rot = rotations[p]
            start = endpoints[p]
        local = _rotation(g.axes[i], q[i])
        if parent_rot is None:
            world_axes[i] = g.axes[i]
            rotations[i] = local
        else:
            world_axes[i] = parent_rot @ g.axes[i]
            rotations[i] = parent_rot @ local
        starts[i] = start
        endpoints[i] = start + rotations[i] @ g.reaches[i]
    return FKResult(starts, endpoints, rotations, world_axes)


def _label_chain(spec: PlatformSpec, label: str) -> list[int]:
    """Indices of the label's links, proximal first."""
    cache = getattr(spec, "_chains", None)
    if cache is None:
        cache = {}
        object.__setattr__(spec, "_chains", cache)
    if label in cache:
        return cache[label]
    if label not in spec.labels:
        raise KeyError(f"unknown label {label!r} on platform {spec.name!r}")
    members = spec.labels[label]
    order = [i for i, l in enumerate(spec.links) if l.name in members]
    # spec.links is in parent-before-child order within a chain only if the
    # file lists it that way; sort by depth to be safe.
    depth = {}
    index = {l.name: i for i, l in enumerate(spec.links)}
    for i, l in enumerate(spec.links):
        d, p = 0, l.parent
        while p is not None:
            d += 1
            p = spec.links[index[p]].parent
        depth[i] = d
    cache[label] = sorted(order, key=lambda i: depth[i])
    return cache[label]


def _distal_index(spec: PlatformSpec, label: str) -> int:
    return _label_chain(spec, label)[-1]


def kinesphere(spec: PlatformSpec, label: str) -> Kinesphere:
    """The label's reachable sphere: centered at its proximal joint in the
    zero configuration, radius the chain's full extension."""
    chain = _label_chain(spec, label)
    fk = fk_full(spec, spec.zero_config())
    center = tuple(fk.starts[chain[0]])
    radius = float(sum(spec.links[i].length for i in chain))
    if radius <= 0:
        raise PlatformError(f"label {label!r} has zero reach", f"/labels/{label}")
    return Kinesphere(center, radius)


class IKError(Exception):
    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


def _ccd_joint(spec, q, fk, i, distal, target) -> None:
    """One CCD update of joint i, in place; clamps to limits."""
    pivot = fk.starts[i]
    axis = fk.world_axes[i]
    v_now = fk.endpoints[distal] - pivot
    v_want = target - pivot
    # Project into the joint's rotation plane.
    v_now = v_now - axis * (v_now @ axis)
    v_want = v_want - axis * (v_want @ axis)
    lo, hi = spec.links[i].limits
    if np.linalg.norm(v_want) < 1e-12:
        return
    if np.linalg.norm(v_now) < 1e-9:
        # Endpoint sits on this pivot: the alignment angle is undefined and
        # plain CCD locks up.  A fixed nudge breaks the fold.
        q[i] = min(hi, max(lo, q[i] + 0.5))
        return
    delta = math.atan2(float(np.cross(v_now, v_want) @ axis),
                       float(v_now @ v_want))
    q[i] = min(hi, max(lo, q[i] + delta))


def _ccd_run(spec, chain, distal, target, q_start, tol):
    """CCD sweeps from one seed.  Returns (q, best_residual).

    Sweeps continue to half tolerance so returned poses sit comfortably
    inside the contract, not on its edge.
    """
    polish = tol / 2.0
    q = q_start.copy()
    fk = fk_full(spec, q)
    best_q = q.copy()
    best = float(np.linalg.norm(fk.endpoints[distal] - target))
    since_improved = 0
    for _ in range(IK_MAX_SWEEPS):
        if best <= polish:
            break
        # Bidirectional sweep: distal-to-proximal then back, which converges
        # far faster near full extension than one-way CCD.
        for i in list(reversed(chain)) + list(chain):
            _ccd_joint(spec, q, fk, i, distal, target)
            fk = fk_full(spec, q)
        residual = float(np.linalg.norm(fk.endpoints[distal] - target))
        if residual < best - max(tol * 1e-2, best * 1e-3):
            best, best_q, since_improved = residual, q.copy(), 0
        else:
            if residual < best:
                best, best_q = residual, q.copy()
            since_improved += 1
            if since_improved >= 25:
                break  # stalled; this seed will not get there
    return best_q, best


def _prove_unreachable(spec, chain, distal, target, seed, tol) -> Optional[str]:
    """Cheap sound certificates that no chain configuration hits the target.

    Joints proximal to the chain stay at the seed, so the chain is anchored;
    distance-from-anchor bounds follow from the triangle inequality, and a
    chain whose joint axes are all parallel can never change its endpoint's
    coordinate along that axis.
    """
    fk = fk_full(spec, seed)
    anchor = fk.starts[chain[0]]
    lengths = [spec.links[i].length for i in chain]
    total = sum(lengths)
    d = float(np.linalg.norm(target - anchor))
    if d > total + tol:
        return f"distance {d:.3g} from the {_chain_label_text(spec, chain)} anchor exceeds full extension {total:.3g}"
    inner = max(0.0, 2 * max(lengths) - total)
    if d < inner - tol:
        return f"distance {d:.3g} from the anchor is inside minimum reach {inner:.3g}"
    axes = [fk.world_axes[i] for i in chain]
    if all(np.linalg.norm(np.cross(axes[0], a)) < 1e-12 for a in axes[1:]):
        off_plane = float((target - fk.endpoints[distal]) @ axes[0])
        if abs(off_plane) > tol:
            return f"target lies {abs(off_plane):.3g} off the chain's motion plane"
    return None


def _chain_label_text(spec, chain) -> str:
    return "-".join(spec.links[i].name for i in chain[:1])


def _aim_seed(spec, chain, distal, target) -> np.ndarray:
    """Proximal-to-distal alignment pass from zero: points the chain
    straight at the target, the exact answer for boundary targets."""
    q = spec.zero_config()
    fk = fk_full(spec, q)
    for i in chain:
        _ccd_joint(spec, q, fk, i, distal, target)
        fk = fk_full(spec, q)
    return q


def ik_solve(
    spec: PlatformSpec,
    label: str,
    target: Sequence[float],
    q0: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Cyclic coordinate descent on the label's joints.

    Only the label's own joints move; everything proximal to the label
    stays put.  The caller's seed is tried first, then a fixed cascade of
    fallback seeds, so the result is deterministic for a given
    (spec, target, q0).  Raises IKError for targets outside the label's
    kinesphere or when every attempt stays above tolerance.
    """
    target = np.asarray(target, dtype=float)
    sphere = kinesphere(spec, label)
    tol = IK_TOLERANCE_FRACTION * sphere.radius
    if np.linalg.norm(target - np.asarray(sphere.center)) > sphere.radius + tol:
        raise IKError(
            f"target {np.round(target, 4).tolist()} outside kinesphere of "
            f"{label!r} (radius {sphere.radius:g})"
        )

    chain = _label_chain(spec, label)
    distal = chain[-1]
    seed0 = spec.zero_config() if q0 is None else clamp_to_limits(
        spec, check_config(spec, q0).copy()
    )

    unreachable = _prove_unreachable(spec, chain, distal, target, seed0, tol)
    if unreachable:
        raise IKError(f"unreachable target: {unreachable}")

    def bent(angle: float) -> np.ndarray:
        q = seed0.copy()
        for i in chain:
            lo, hi = spec.links[i].limits
            q[i] = min(hi, max(lo, q[i] + angle))
        return q

    seeds = [seed0, _aim_seed(spec, chain, distal, target),
             spec.zero_config(), bent(0.3), bent(-0.3)]
    best_overall = math.inf
    for seed in seeds:
        q, residual = _ccd_run(spec, chain, distal, target, seed, tol)
        if residual <= tol:
            return q
        best_overall = min(best_overall, residual)
    raise IKError(
        f"no convergence after {IK_MAX_SWEEPS} sweeps "
        f"(best residual {best_overall:.3e}, tolerance {tol:.3e})",
        residual=best_overall,
    )


# ---------------------------------------------------------------------------
# Embodied configuration library


EclKey = tuple[str, Direction, Reach]


@dataclass(frozen=True)
class ECL:
    platform: str
    entries: dict  # EclKey -> np.ndarray

    def to_dict(self) -> dict:
        order = {d: i for i, d in enumerate(enumerate_directions())}
        reach_rank = {Reach.NEAR: 0, Reach.MID: 1, Reach.FAR: 2}
        items = sorted(
            self.entries.items(),
            key=lambda kv: (kv[0][0], order[kv[0][1]], reach_rank[kv[0][2]]),
        )
        return {
            "format": FORMAT_VERSION,
            "platform": self.platform,
            "entries": [
                {
                    "label": label,
                    "direction": d.name,
                    "reach": r.value,
                    "q": [float(x) for x in q],
                }
                for (label, d, r), q in items
            ],
        }


@dataclass
class CoverageReport:
    platform: str
    requested: int = 0
    solved: int = 0
    missing: list = field(default_factory=list)  # (EclKey, reason)

    @property
    def complete(self) -> bool:
        return not self.missing

    def summary(self) -> str:
        lines = [
            f"{self.platform}: {self.solved}/{self.requested} poses installed"
        ]
        for (label, d, r), reason in self.missing:
            lines.append(f"  missing {label} {d.name} {r.value}: {reason}")
        return "\n".join(lines)


def ecl_synthesize(spec: PlatformSpec) -> tuple[ECL, CoverageReport]:
    """Install a pose for every (label, direction, reach) the platform can
    reach.

    Targets walk the direction inventory in enumeration order like a
    movement scale; each solve is seeded from the previous success so
    neighboring poses stay continuous.  Per-key failures are collected in
    the coverage report, never raised.
    """
    entries: dict[EclKey, np.ndarray] = {}
    report = CoverageReport(platform=spec.name)
    reaches = (Reach.NEAR, Reach.MID, Reach.FAR)
    for label in sorted(spec.labels):
        sphere = kinesphere(spec, label)
        center = np.asarray(sphere.center)
        seed = spec.zero_config()
        for d in enumerate_directions():
            for reach in reaches:
                report.requested += 1
                target = center + (
                    spec.reach_scales[reach] * sphere.radius
                ) * np.asarray(direction_vector(d))
                try:
                    q = ik_solve(spec, label, target, seed)
                except IKError as e:
                    report.missing.append(((label, d, reach), str(e)))
                    continue
                entries[(label, d, reach)] = q
                report.solved += 1
                seed = q
    return ECL(platform=spec.name, entries=entries), report


class MissingPoseError(KeyError):
    """An ECL lookup missed; carries the nearest present key, never a
    silent substitute."""

    def __init__(self, key: EclKey, suggestion: Optional[EclKey]):
        label, d, r = key
        msg = f"no pose for ({label}, {d.name}, {r.value})"
        if suggestion:
            s_label, s_d, s_r = suggestion
            msg += f"; nearest present is ({s_label}, {s_d.name}, {s_r.value})"
        super().__init__(msg)
        self.key = key
        self.suggestion = suggestion

    def __str__(self) -> str:  # KeyError quotes its arg by default
        return self.args[0]


def nearest_key(ecl: ECL, key: EclKey) -> Optional[EclKey]:
    """Present key with maximal direction cosine similarity; ties broken by
    enumeration order, then by nearest reach zone."""
    if not ecl.entries:
        return None
    _, want_d, want_r = key
    order = {d: i for i, d in enumerate(enumerate_directions())}
    reach_rank = {Reach.NEAR: 0, Reach.MID: 1, Reach.FAR: 2}
    wv = np.asarray(direction_vector(want_d))

    def rank(k: EclKey):
        label, d, r = k
        cos = float(np.dot(wv, direction_vector(d)))
        return (-cos, order[d], abs(reach_rank[r] - reach_rank[want_r]), label)

    return min(ecl.entries, key=rank)


def ecl_lookup(ecl: ECL, label: str, direction: Direction, reach: Reach) -> np.ndarray:
    key = (label, direction, reach)
    try:
        return ecl.entries[key]
    except KeyError:
        raise MissingPoseError(key, nearest_key(ecl, key)) from None


def load_ecl(path: Union[str, Path], spec: PlatformSpec) -> ECL:
    """Load a `*.ecl.json` pose library and validate it against a platform."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise PlatformError(f"cannot read {path}: {e.strerror or e}") from None
    except json.JSONDecodeError as e:
        raise PlatformError(f"invalid JSON in {path}: {e}") from None
    return ecl_from_dict(data, spec)


def ecl_from_dict(data: dict, spec: PlatformSpec) -> ECL:
    if not isinstance(data, dict):
        raise PlatformError("expected a JSON object", "/")
    if data.get("format") != FORMAT_VERSION:
        raise PlatformError(f"unsupported format {data.get('format')!r}", "/format")
    if data.get("platform") != spec.name:
        raise PlatformError(
            f"library is for platform {data.get('platform')!r}, "
            f"expected {spec.name!r}",
            "/platform",
        )
    entries: dict[EclKey, np.ndarray] = {}
    for i, raw in enumerate(data.get("entries", [])):
        where = f"/entries/{i}"
        try:
            label = str(raw["label"])
            d = Direction.from_name(str(raw["direction"]))
            reach = Reach(str(raw["reach"]))
            q = np.asarray([float(x) for x in raw["q"]], dtype=float)
        except KeyError as e:
            raise PlatformError(f"missing field {e.args[0]!r}", where) from None
        except ValueError as e:
            raise PlatformError(str(e), where) from None
        if label not in spec.labels:
            raise PlatformError(f"unknown label {label!r}", f"{where}/label")
        if q.shape != (spec.joint_count,):
            raise PlatformError(
                f"pose has {len(q)} angles, platform has {spec.joint_count}",
                f"{where}/q",
            )
        for j, (link, angle) in enumerate(zip(spec.links, q)):
            lo, hi = link.limits
            if not (lo - 1e-9 <= angle <= hi + 1e-9):
                raise PlatformError(
                    f"angle {angle:g} outside limits [{lo:g}, {hi:g}] "
                    f"of joint {link.name!r}",
                    f"{where}/q/{j}",
                )
        entries[(label, d, reach)] = q
    return ECL(platform=spec.name, entries=entries)
