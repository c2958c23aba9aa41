"""Responsive layout graph construction and layout-failure classification.

A page is sampled at several viewport widths; each sample is a
:class:`LayoutSnapshot` of element border boxes. :func:`build_rlg` turns the
samples into a :class:`ResponsiveLayoutGraph` whose edges carry the width
ranges over which geometric relations hold, and :func:`detect_rlfs`
classifies five failure types from the graph:

* ``ELEMENT_COLLISION`` — two siblings intersect (area > 1 px²) in a width
  run but not at the widest sampled width.
* ``ELEMENT_PROTRUSION`` — a child escapes its parent's box on any side in a
  run but not at the widest width.
* ``VIEWPORT_PROTRUSION`` — a box crosses the left or right viewport edge in
  a run but not at the widest width.
* ``SMALL_RANGE`` — a sibling relation holds only on a band no wider than a
  threshold, with different relations on both flanks.
* ``WRAPPING_ELEMENTS`` — a member of a horizontal row drops below the row
  by more than its own height at narrower widths.

The widest sampled width anchors the non-failing reference state: a
condition that also holds there is treated as the page's normal layout, not
a failure. Sibling pairs get a single canonical relation per width
(overlap wins, then the axis with the larger gap / smaller penetration);
the tie-break rules are deliberately total so detection is deterministic.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import RedefixError
from .geometry import (
    EDGE_EPS,
    OVERLAP_AREA_EPS,
    BoundingBox,
    contains,
    intersection_extent,
    overlap_area,
    protrusion_amount,
    viewport_protrusion_amount,
)

log = logging.getLogger(__name__)

DEFAULT_SMALL_RANGE_THRESHOLD = 5


class SnapshotError(RedefixError):
    """A snapshot or snapshot set violates its invariants."""


class RlfType(enum.Enum):
    ELEMENT_COLLISION = "element_collision"
    ELEMENT_PROTRUSION = "element_protrusion"
    VIEWPORT_PROTRUSION = "viewport_protrusion"
    SMALL_RANGE = "small_range"
    WRAPPING_ELEMENTS = "wrapping_elements"

    @property
    def order(self) -> int:
        return list(RlfType).index(self)


@dataclass(frozen=True)
class LayoutNode:
    xpath: str
    box: BoundingBox
    visible: bool = True

    def __post_init__(self):
        if not self.xpath:
            raise ValueError("empty xpath")


@dataclass
class LayoutSnapshot:
    """Element geometry of one page at one viewport width."""

    viewport_width: int
    nodes: list[LayoutNode]
    parent_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._by_xpath = {n.xpath: n for n in self.nodes}
        if len(self._by_xpath) != len(self.nodes):
            raise SnapshotError("duplicate xpath within one snapshot")

    def node(self, xpath: str) -> Optional[LayoutNode]:
        return self._by_xpath.get(xpath)

    def visible(self, xpath: str) -> Optional[LayoutNode]:
        n = self._by_xpath.get(xpath)
        return n if n is not None and n.visible else None

    def validate(self) -> None:
        """Check parent_map acyclicity and referential integrity."""
        for child, parent in self.parent_map.items():
            if child not in self._by_xpath or parent not in self._by_xpath:
                raise SnapshotError(f"parent_map references unknown node: {child} -> {parent}")
        for start in self.parent_map:
            seen = set()
            cur = start
            while cur in self.parent_map:
                if cur in seen:
                    raise SnapshotError(f"parent_map cycle through {start}")
                seen.add(cur)
                cur = self.parent_map[cur]


@dataclass(frozen=True)
class RlgEdge:
    """A geometric relation holding over a contiguous run of sampled widths.

    ``kind`` is ``containment`` (a contains b) or ``sibling`` with a
    ``relation`` of ``overlapping``, ``left-of`` or ``above`` read as
    "a <relation> b".
    """

    kind: str
    a: str
    b: str
    min_width: int
    max_width: int
    relation: Optional[str] = None


@dataclass
class ResponsiveLayoutGraph:
    widths: list[int]
    snapshots: dict[int, LayoutSnapshot]
    edges: list[RlgEdge]

    @property
    def widest(self) -> int:
        return self.widths[-1]


@dataclass(frozen=True)
class RlfRecord:
    rlf_type: RlfType
    participants: tuple[str, ...]
    failure_range: tuple[int, int]

    def __post_init__(self):
        lo, hi = self.failure_range
        if lo > hi:
            raise ValueError(f"inverted failure range {self.failure_range}")
        if self.rlf_type is RlfType.ELEMENT_COLLISION and len(self.participants) != 2:
            raise ValueError("element collision needs exactly 2 participants")
        if self.rlf_type is RlfType.VIEWPORT_PROTRUSION and len(self.participants) != 1:
            raise ValueError("viewport protrusion needs exactly 1 participant")

    def sort_key(self):
        return (
            self.rlf_type.order,
            min(self.participants),
            self.failure_range[0],
            self.participants,
            self.failure_range[1],
        )

    def to_json(self) -> dict:
        return {
            "type": self.rlf_type.value,
            "participants": list(self.participants),
            "range": [self.failure_range[0], self.failure_range[1]],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RlfRecord":
        return cls(
            rlf_type=RlfType(obj["type"]),
            participants=tuple(obj["participants"]),
            failure_range=(int(obj["range"][0]), int(obj["range"][1])),
        )


# A sibling pair's state at one width: (relation, subject, object) or None
# when the pair is not visible/siblings at that width.
PairState = Optional[tuple[str, str, str]]


def classify_pair(a: LayoutNode, b: LayoutNode) -> tuple[str, str, str]:
    """Canonical single relation between two sibling boxes.

    Returns ``(relation, subject_xpath, object_xpath)``. Overlap (area over
    ``OVERLAP_AREA_EPS``) wins outright. Otherwise the separating axis is
    chosen: the axis with the larger gap when both are disjoint, the only
    disjoint axis when one is, and the axis of smaller penetration for
    touching boxes whose tiny intersection did not count as overlap.
    Direction comes from box centers, with x, then xpath as tie-breaks.
    """
    dx, dy = intersection_extent(a.box, b.box)
    if dx > 0 and dy > 0 and dx * dy > OVERLAP_AREA_EPS:
        first, second = sorted((a, b), key=lambda n: n.xpath)
        return ("overlapping", first.xpath, second.xpath)

    if dx <= 0 and dy <= 0:
        horizontal = -dx >= -dy
    elif dx <= 0:
        horizontal = True
    elif dy <= 0:
        horizontal = False
    else:
        horizontal = dx <= dy

    if horizontal:
        key = lambda n: (n.box.center_x, n.box.x, n.xpath)
        rel = "left-of"
    else:
        key = lambda n: (n.box.center_y, n.box.y, n.xpath)
        rel = "above"
    first, second = sorted((a, b), key=key)
    return (rel, first.xpath, second.xpath)


def _sibling_pairs(snapshot: LayoutSnapshot) -> list[tuple[str, str]]:
    """Visible same-parent pairs, canonically ordered, sorted."""
    by_parent: dict[str, list[str]] = {}
    for child, parent in snapshot.parent_map.items():
        if snapshot.visible(child) is not None:
            by_parent.setdefault(parent, []).append(child)
    pairs = []
    for children in by_parent.values():
        children.sort()
        for i in range(len(children)):
            for j in range(i + 1, len(children)):
                pairs.append((children[i], children[j]))
    pairs.sort()
    return pairs


def _pair_state(snapshot: LayoutSnapshot, a: str, b: str) -> PairState:
    na = snapshot.visible(a)
    nb = snapshot.visible(b)
    if na is None or nb is None:
        return None
    if snapshot.parent_map.get(a) != snapshot.parent_map.get(b) or a not in snapshot.parent_map:
        return None
    return classify_pair(na, nb)


def _runs(flags: list[bool]) -> list[tuple[int, int]]:
    """Maximal index runs where the flag is True."""
    runs = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def build_rlg(snapshots: list[LayoutSnapshot]) -> ResponsiveLayoutGraph:
    """Assemble the responsive layout graph from width-ordered samples.

    Edge width ranges are maximal contiguous runs of sampled widths where
    the relation holds; a node missing (or invisible) at a width produces
    no edges at that width.
    """
    if len(snapshots) < 2:
        raise SnapshotError("need at least two snapshots at distinct widths")
    widths = [s.viewport_width for s in snapshots]
    if len(set(widths)) != len(widths):
        raise SnapshotError(f"duplicate sampled widths: {sorted(widths)}")
    for s in snapshots:
        s.validate()

    ordered = sorted(snapshots, key=lambda s: s.viewport_width)
    widths = [s.viewport_width for s in ordered]
    by_width = {s.viewport_width: s for s in ordered}

    edges: list[RlgEdge] = []

    # Containment edges over DOM parent-child pairs.
    pc_pairs = sorted({(p, c) for s in ordered for c, p in s.parent_map.items()})
    for parent, child in pc_pairs:
        flags = []
        for s in ordered:
            pn, cn = s.visible(parent), s.visible(child)
            flags.append(
                pn is not None
                and cn is not None
                and s.parent_map.get(child) == parent
                and contains(pn.box, cn.box)
            )
        for i, j in _runs(flags):
            edges.append(RlgEdge("containment", parent, child, widths[i], widths[j]))

    # Sibling-alignment edges: runs of one unchanged canonical relation.
    pair_universe = sorted({p for s in ordered for p in _sibling_pairs(s)})
    for a, b in pair_universe:
        states = [_pair_state(s, a, b) for s in ordered]
        i = 0
        while i < len(states):
            if states[i] is None:
                i += 1
                continue
            j = i
            while j + 1 < len(states) and states[j + 1] == states[i]:
                j += 1
            rel, subj, obj = states[i]
            edges.append(RlgEdge("sibling", subj, obj, widths[i], widths[j], rel))
            i = j + 1

    return ResponsiveLayoutGraph(widths=widths, snapshots=by_width, edges=edges)


def _collision_at(s: LayoutSnapshot, a: str, b: str) -> bool:
    na, nb = s.visible(a), s.visible(b)
    return (
        na is not None
        and nb is not None
        and a in s.parent_map
        and s.parent_map.get(a) == s.parent_map.get(b)
        and overlap_area(na.box, nb.box) > OVERLAP_AREA_EPS
    )


def _protrusion_at(s: LayoutSnapshot, child: str, parent: str) -> bool:
    cn, pn = s.visible(child), s.visible(parent)
    return (
        cn is not None
        and pn is not None
        and s.parent_map.get(child) == parent
        and not contains(pn.box, cn.box)
    )


def _viewport_protrusion_at(s: LayoutSnapshot, xpath: str) -> bool:
    n = s.visible(xpath)
    if n is None:
        return False
    return n.box.x < -EDGE_EPS or n.box.right > s.viewport_width + EDGE_EPS


def _rows_at_widest(rlg: ResponsiveLayoutGraph) -> list[tuple[str, ...]]:
    """Horizontal rows among siblings at the widest width.

    A row is a connected component of visible same-parent children whose
    vertical extents overlap, with at least two members.
    """
    s = rlg.snapshots[rlg.widest]
    by_parent: dict[str, list[LayoutNode]] = {}
    for child, parent in s.parent_map.items():
        n = s.visible(child)
        if n is not None:
            by_parent.setdefault(parent, []).append(n)
    rows = []
    for parent in sorted(by_parent):
        members = sorted(by_parent[parent], key=lambda n: n.xpath)
        adj = {m.xpath: set() for m in members}
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                _, dy = intersection_extent(members[i].box, members[j].box)
                if dy > 0:
                    adj[members[i].xpath].add(members[j].xpath)
                    adj[members[j].xpath].add(members[i].xpath)
        seen: set[str] = set()
        for m in members:
            if m.xpath in seen:
                continue
            comp = []
            stack = [m.xpath]
            while stack:
                x = stack.pop()
                if x in seen:
                    continue
                seen.add(x)
                comp.append(x)
                stack.extend(adj[x] - seen)
            if len(comp) >= 2:
                rows.append(tuple(sorted(comp)))
    return rows


def _wrapped_at(s: LayoutSnapshot, member: str, row: tuple[str, ...]) -> bool:
    n = s.visible(member)
    if n is None:
        return False
    others = [s.visible(x) for x in row if x != member]
    others = [o for o in others if o is not None]
    if not others:
        return False
    row_y = min(o.box.y for o in others)
    return n.box.y > row_y + n.box.height


def detect_rlfs(
    rlg: ResponsiveLayoutGraph,
    small_range_threshold: int = DEFAULT_SMALL_RANGE_THRESHOLD,
) -> list[RlfRecord]:
    """Classify layout failures from the graph. Pure and deterministic.

    Failure ranges are expressed in sampled-width space
    ``[first failing sample, last failing sample]``; use
    :func:`refine_failure_ranges` to tighten them to exact pixel bounds.
    """
    widths = rlg.widths
    ordered = [rlg.snapshots[w] for w in widths]
    records: list[RlfRecord] = []

    def emit_runs(flags: list[bool], make: Callable[[int, int], RlfRecord]) -> None:
        # A condition that also holds at the widest width is the page's
        # normal state, not a failure.
        if flags[-1]:
            return
        for i, j in _runs(flags):
            records.append(make(widths[i], widths[j]))

    pair_universe = sorted({p for s in ordered for p in _sibling_pairs(s)})
    for a, b in pair_universe:
        emit_runs(
            [_collision_at(s, a, b) for s in ordered],
            lambda lo, hi, a=a, b=b: RlfRecord(RlfType.ELEMENT_COLLISION, (a, b), (lo, hi)),
        )

    pc_pairs = sorted({(p, c) for s in ordered for c, p in s.parent_map.items()})
    for parent, child in pc_pairs:
        emit_runs(
            [_protrusion_at(s, child, parent) for s in ordered],
            lambda lo, hi, c=child, p=parent: RlfRecord(
                RlfType.ELEMENT_PROTRUSION, (c, p), (lo, hi)
            ),
        )

    all_xpaths = sorted({n.xpath for s in ordered for n in s.nodes})
    for xpath in all_xpaths:
        emit_runs(
            [_viewport_protrusion_at(s, xpath) for s in ordered],
            lambda lo, hi, x=xpath: RlfRecord(RlfType.VIEWPORT_PROTRUSION, (x,), (lo, hi)),
        )

    for a, b in pair_universe:
        states = [_pair_state(s, a, b) for s in ordered]
        i = 0
        while i < len(states):
            if states[i] is None:
                i += 1
                continue
            j = i
            while j + 1 < len(states) and states[j + 1] == states[i]:
                j += 1
            run_width = widths[j] - widths[i] + 1
            has_flanks = i > 0 and j < len(states) - 1
            if (
                has_flanks
                and run_width <= small_range_threshold
                and states[i - 1] is not None
                and states[j + 1] is not None
                and states[i - 1] != states[i]
                and states[j + 1] != states[i]
            ):
                records.append(
                    RlfRecord(RlfType.SMALL_RANGE, (a, b), (widths[i], widths[j]))
                )
            i = j + 1

    for row in _rows_at_widest(rlg):
        for member in row:
            emit_runs(
                [_wrapped_at(s, member, row) for s in ordered],
                lambda lo, hi, m=member: RlfRecord(RlfType.WRAPPING_ELEMENTS, (m,), (lo, hi)),
            )

    records.sort(key=lambda r: r.sort_key())
    return records


def records_match(a: RlfRecord, b: RlfRecord) -> bool:
    """Identity rule for diffing: same type and participant set, ranges overlap.

    Overlap rather than equality absorbs the few pixels of boundary drift a
    patch can introduce without changing the failure's identity.
    """
    return (
        a.rlf_type is b.rlf_type
        and set(a.participants) == set(b.participants)
        and a.failure_range[0] <= b.failure_range[1]
        and b.failure_range[0] <= a.failure_range[1]
    )


def diff_rlfs(
    baseline: list[RlfRecord], current: list[RlfRecord]
) -> tuple[list[RlfRecord], list[RlfRecord]]:
    """Records eliminated from the baseline and records newly introduced."""
    eliminated = [r for r in baseline if not any(records_match(r, c) for c in current)]
    introduced = [c for c in current if not any(records_match(c, r) for r in baseline)]
    return eliminated, introduced


class RecordEvaluator:
    """Re-evaluates one record's failure condition on arbitrary snapshots.

    Used by boundary refinement (does the failure hold at width w?) and by
    the perturbation localizer (how big is the failure geometrically?).
    """

    def __init__(self, record: RlfRecord, rlg: ResponsiveLayoutGraph):
        self.record = record
        self._row: Optional[tuple[str, ...]] = None
        self._state: PairState = None
        if record.rlf_type is RlfType.WRAPPING_ELEMENTS:
            member = record.participants[0]
            for row in _rows_at_widest(rlg):
                if member in row:
                    self._row = row
                    break
            if self._row is None:
                raise RedefixError(f"no widest-width row found for {member}")
        elif record.rlf_type is RlfType.SMALL_RANGE:
            sample = rlg.snapshots[record.failure_range[0]]
            a, b = record.participants
            self._state = _pair_state(sample, a, b)

    def holds(self, snapshot: LayoutSnapshot) -> bool:
        r = self.record
        t = r.rlf_type
        if t is RlfType.ELEMENT_COLLISION:
            return _collision_at(snapshot, *r.participants)
        if t is RlfType.ELEMENT_PROTRUSION:
            child, parent = r.participants
            return _protrusion_at(snapshot, child, parent)
        if t is RlfType.VIEWPORT_PROTRUSION:
            return _viewport_protrusion_at(snapshot, r.participants[0])
        if t is RlfType.SMALL_RANGE:
            a, b = r.participants
            return _pair_state(snapshot, a, b) == self._state and self._state is not None
        if t is RlfType.WRAPPING_ELEMENTS:
            assert self._row is not None
            return _wrapped_at(snapshot, r.participants[0], self._row)
        raise RedefixError(f"unknown rlf type {t}")

    def magnitude(self, snapshot: LayoutSnapshot) -> float:
        """Geometric size of the failure at this snapshot; 0 when absent."""
        r = self.record
        t = r.rlf_type
        if t is RlfType.ELEMENT_COLLISION:
            a = snapshot.visible(r.participants[0])
            b = snapshot.visible(r.participants[1])
            if a is None or b is None:
                return 0.0
            return overlap_area(a.box, b.box)
        if t is RlfType.ELEMENT_PROTRUSION:
            child = snapshot.visible(r.participants[0])
            parent = snapshot.visible(r.participants[1])
            if child is None or parent is None:
                return 0.0
            return protrusion_amount(parent.box, child.box)
        if t is RlfType.VIEWPORT_PROTRUSION:
            n = snapshot.visible(r.participants[0])
            if n is None:
                return 0.0
            return viewport_protrusion_amount(n.box, snapshot.viewport_width)
        if t is RlfType.WRAPPING_ELEMENTS:
            assert self._row is not None
            n = snapshot.visible(r.participants[0])
            others = [snapshot.visible(x) for x in self._row if x != r.participants[0]]
            others = [o for o in others if o is not None]
            if n is None or not others:
                return 0.0
            row_y = min(o.box.y for o in others)
            return max(0.0, n.box.y - (row_y + n.box.height))
        return 1.0 if self.holds(snapshot) else 0.0


SnapshotProvider = Callable[[int], LayoutSnapshot]


def refine_failure_ranges(
    records: list[RlfRecord],
    rlg: ResponsiveLayoutGraph,
    provider: SnapshotProvider,
    small_range_threshold: int = DEFAULT_SMALL_RANGE_THRESHOLD,
) -> list[RlfRecord]:
    """Tighten sampled failure ranges to exact pixel bounds by bisection.

    ``provider`` must return a snapshot of the same page at any integer
    width. Bounds touching the sweep limits are left as-is. Small-range
    records whose refined band grows past the threshold are dropped.
    """
    widths = rlg.widths
    refined: list[RlfRecord] = []
    cache: dict[int, LayoutSnapshot] = dict(rlg.snapshots)

    def snap(w: int) -> LayoutSnapshot:
        if w not in cache:
            cache[w] = provider(w)
        return cache[w]

    for record in records:
        ev = RecordEvaluator(record, rlg)
        lo, hi = record.failure_range
        idx_lo, idx_hi = widths.index(lo), widths.index(hi)

        if idx_lo > 0:
            known_false, known_true = widths[idx_lo - 1], lo
            while known_true - known_false > 1:
                mid = (known_false + known_true) // 2
                if ev.holds(snap(mid)):
                    known_true = mid
                else:
                    known_false = mid
            lo = known_true
        if idx_hi < len(widths) - 1:
            known_true, known_false = hi, widths[idx_hi + 1]
            while known_false - known_true > 1:
                mid = (known_true + known_false) // 2
                if ev.holds(snap(mid)):
                    known_true = mid
                else:
                    known_false = mid
            hi = known_true

        if record.rlf_type is RlfType.SMALL_RANGE and hi - lo + 1 > small_range_threshold:
            log.debug("dropping small-range %s: refined band %d..%d too wide", record, lo, hi)
            continue
        refined.append(RlfRecord(record.rlf_type, record.participants, (lo, hi)))

    refined.sort(key=lambda r: r.sort_key())
    return refined
