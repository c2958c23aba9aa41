"""End-to-end detection on the shipped fixture pages.

Expected ranges are hand-computed from the fixture CSS (boundaries include
the detector's documented 0.5px edge and 1px² overlap tolerances).
"""

import pytest

from redefix.layout_model import RlfRecord, RlfType, build_rlg, detect_rlfs
from redefix.repair import sweep_and_detect

SWEEP = list(range(320, 1401, 10))

STAGE = "/html/body/div[1]"
LEFT = "/html/body/div[1]/div[1]"
RIGHT = "/html/body/div[1]/div[2]"
BODY = "/html/body"


def detect(harness, page_url, name):
    page = harness.open(page_url(name))
    try:
        _, records = sweep_and_detect(harness, page, SWEEP, small_range_threshold=5)
        return records
    finally:
        harness.close(page)


def test_clean_fixture_has_no_failures(harness, page_url):
    assert detect(harness, page_url, "clean.html") == []


def test_collide_fixture(harness, page_url):
    # Overlap area (440 - w) * 80 exceeds 1px² up to and including 439.
    records = detect(harness, page_url, "collide.html")
    assert records == [
        RlfRecord(RlfType.ELEMENT_COLLISION, (LEFT, RIGHT), (320, 439))
    ]


def test_protrude_fixture(harness, page_url):
    # Card (300px) escapes panel (w/2) while 300 > w/2 + 0.5, so w <= 598.
    records = detect(harness, page_url, "protrude.html")
    assert records == [
        RlfRecord(
            RlfType.ELEMENT_PROTRUSION,
            ("/html/body/div[1]/div[1]", "/html/body/div[1]"),
            (320, 598),
        )
    ]


def test_viewport_fixture(harness, page_url):
    # The 900px banner escapes the viewport while 900 > w + 0.5. The same
    # geometry necessarily escapes the body box, so the element-protrusion
    # companion record is expected alongside.
    banner = "/html/body/div[1]"
    records = detect(harness, page_url, "protrude-viewport.html")
    assert (
        RlfRecord(RlfType.VIEWPORT_PROTRUSION, (banner,), (320, 899)) in records
    )
    companions = [r for r in records if r.rlf_type is not RlfType.VIEWPORT_PROTRUSION]
    assert companions == [
        RlfRecord(RlfType.ELEMENT_PROTRUSION, (banner, BODY), (320, 899))
    ]


def test_wrap_fixture(harness, page_url):
    # Tiles are 300px wide: the third drops below 900px, the second below
    # 600px; the lead tile is 130px tall so dropped tiles sit lower than
    # their own 90px height.
    b = "/html/body/div[1]/div[2]"
    c = "/html/body/div[1]/div[3]"
    records = detect(harness, page_url, "wrap.html")
    assert records == [
        RlfRecord(RlfType.WRAPPING_ELEMENTS, (b,), (320, 599)),
        RlfRecord(RlfType.WRAPPING_ELEMENTS, (c,), (320, 899)),
    ]


def test_smallrange_fixture(harness, page_url):
    anchor = "/html/body/div[1]/div[1]"
    beacon = "/html/body/div[1]/div[2]"
    records = detect(harness, page_url, "smallrange.html")
    assert records == [
        RlfRecord(RlfType.SMALL_RANGE, (anchor, beacon), (700, 704))
    ]


def test_collide_overlap_edge_at_coarse_sample(harness, page_url):
    # The documented four-point sampling keeps the overlap edge at
    # [320, 400]: 440px combined banner width still overlaps at 400.
    page = harness.open(page_url("collide.html"))
    try:
        snapshots = [harness.snapshot_at(page, w) for w in (320, 400, 500, 768)]
    finally:
        harness.close(page)
    rlg = build_rlg(snapshots)
    overlap_edges = [e for e in rlg.edges if e.relation == "overlapping"]
    assert len(overlap_edges) == 1
    edge = overlap_edges[0]
    assert {edge.a, edge.b} == {LEFT, RIGHT}
    assert (edge.min_width, edge.max_width) == (320, 400)
    assert detect_rlfs(rlg) == [
        RlfRecord(RlfType.ELEMENT_COLLISION, (LEFT, RIGHT), (320, 400))
    ]
