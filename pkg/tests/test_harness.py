"""Harness integration against the embedded WebDriver endpoint."""

import io

import pytest
from PIL import Image

from redefix.harness import (
    BrowserHarness,
    DuplicateMarkerError,
    ElementNotFoundError,
    EndpointUnreachableError,
    HarnessError,
    NavigationError,
    UnknownMarkerError,
)

LEFT = "/html/body/div[1]/div[1]"
RIGHT = "/html/body/div[1]/div[2]"


class TestOpen:
    def test_open_yields_fresh_handle(self, harness, page_url):
        page = harness.open(page_url("collide.html"))
        try:
            assert page.session_id
            assert page.injected_style_ids == []
        finally:
            harness.close(page)

    def test_unreachable_endpoint(self, page_url):
        bad = BrowserHarness("http://127.0.0.1:9", settle_delay=0.0)
        with pytest.raises(EndpointUnreachableError):
            bad.open(page_url("collide.html"))

    def test_missing_local_file(self, harness):
        with pytest.raises(NavigationError):
            harness.open("does/not/exist.html")

    def test_missing_remote_page(self, harness, page_url):
        with pytest.raises(HarnessError):
            harness.open(page_url("nope.html") + "?")

    def test_non_html_content_rejected(self, harness, page_url, tmp_path):
        import io

        from PIL import Image

        from redefix.harness import StaticFileServer

        buf = io.BytesIO()
        Image.new("RGB", (4, 4)).save(buf, format="PNG")
        (tmp_path / "image.png").write_bytes(buf.getvalue())
        with StaticFileServer(tmp_path) as server:
            with pytest.raises(HarnessError):
                harness.open(server.url_for("image.png"))


@pytest.fixture()
def collide_page(harness, page_url):
    page = harness.open(page_url("collide.html"))
    yield page
    harness.close(page)


class TestSnapshot:
    def test_banners_apart_when_wide(self, harness, collide_page):
        snap = harness.snapshot_at(collide_page, 1400)
        left, right = snap.node(LEFT), snap.node(RIGHT)
        assert left.box.right <= right.box.x
        assert snap.viewport_width == 1400

    def test_deterministic_at_fixed_width(self, harness, collide_page):
        a = harness.snapshot_at(collide_page, 320)
        b = harness.snapshot_at(collide_page, 320)
        for node in a.nodes:
            other = b.node(node.xpath)
            assert abs(node.box.x - other.box.x) <= 0.5
            assert abs(node.box.width - other.box.width) <= 0.5

    def test_closed_page_errors(self, harness, page_url):
        page = harness.open(page_url("collide.html"))
        harness.close(page)
        with pytest.raises(HarnessError):
            harness.snapshot_at(page, 400)

    def test_width_bounds_enforced(self, harness, collide_page):
        with pytest.raises(HarnessError):
            harness.snapshot_at(collide_page, 100)

    def test_parent_map_connects_to_body(self, harness, collide_page):
        snap = harness.snapshot_at(collide_page, 500)
        assert snap.parent_map[LEFT] == "/html/body/div[1]"
        assert snap.parent_map["/html/body/div[1]"] == "/html/body"


class TestScreenshotRegion:
    def test_region_covers_both_banners(self, harness, collide_page):
        shot = harness.screenshot_region(collide_page, 360, [LEFT, RIGHT])
        image = Image.open(io.BytesIO(shot.png_bytes))
        assert image.size == (int(shot.region.width), int(shot.region.height))
        # Union box is (0,10)-(360,90); padding 40 clamps to the page.
        assert shot.region.x == 0 and shot.region.y == 0
        assert shot.region.width == 360

    def test_empty_participants_error(self, harness, collide_page):
        with pytest.raises(ElementNotFoundError):
            harness.screenshot_region(collide_page, 360, [])

    def test_region_intersects_every_participant(self, harness, collide_page):
        from redefix.geometry import overlap_area

        for width in (330, 500, 900):
            snap = harness.snapshot_at(collide_page, width)
            shot = harness.screenshot_region(collide_page, width, [LEFT, RIGHT])
            for xpath in (LEFT, RIGHT):
                assert overlap_area(shot.region, snap.node(xpath).box) > 0

    def test_unknown_participant_error(self, harness, collide_page):
        with pytest.raises(ElementNotFoundError):
            harness.screenshot_region(collide_page, 360, ["/html/body/div[9]"])


class TestStyleInjection:
    def test_inject_then_remove_round_trips_geometry(self, harness, page_url):
        page = harness.open(page_url("protrude.html"))
        try:
            card = "/html/body/div[1]/div[1]"
            before = harness.snapshot_at(page, 320).node(card).box
            harness.inject_style(page, "#card { width: 50px !important; }", "t1")
            during = harness.snapshot_at(page, 320).node(card).box
            assert during.width == 50
            harness.remove_style(page, "t1")
            after = harness.snapshot_at(page, 320).node(card).box
            assert abs(after.width - before.width) <= 0.5
            assert abs(after.x - before.x) <= 0.5
        finally:
            harness.close(page)

    def test_duplicate_marker(self, harness, collide_page):
        harness.inject_style(collide_page, "body { margin: 0; }", "dup")
        with pytest.raises(DuplicateMarkerError):
            harness.inject_style(collide_page, "body { margin: 0; }", "dup")

    def test_remove_unknown_marker(self, harness, collide_page):
        with pytest.raises(UnknownMarkerError):
            harness.remove_style(collide_page, "ghost")

    def test_remove_twice_errors(self, harness, collide_page):
        harness.inject_style(collide_page, "body { margin: 0; }", "once")
        harness.remove_style(collide_page, "once")
        with pytest.raises(UnknownMarkerError):
            harness.remove_style(collide_page, "once")

    def test_empty_style_is_noop_success(self, harness, collide_page):
        harness.inject_style(collide_page, "", "empty")
        assert "empty" in collide_page.injected_style_ids


class TestPageQueries:
    def test_page_source_contains_markup(self, harness, collide_page):
        assert "left-banner" in harness.page_source(collide_page)

    def test_computed_value_reflects_injected_patch(self, harness, page_url):
        page = harness.open(page_url("protrude.html"))
        try:
            harness.set_viewport_width(page, 400)
            harness.inject_style(
                page,
                "@media (min-width: 320px) and (max-width: 598px) {\n"
                "  #card {\n    width: 120px !important;\n  }\n}\n",
                "cv",
            )
            assert harness.computed_value(page, "#card", "width") == "120px"
            harness.set_viewport_width(page, 800)
            assert harness.computed_value(page, "#card", "width") == "300px"
        finally:
            harness.close(page)

    def test_selector_match_count(self, harness, collide_page):
        assert harness.selector_match_count(collide_page, "#left-banner") == 1
        assert harness.selector_match_count(collide_page, "div") == 3
        assert harness.selector_match_count(collide_page, ".nothing") == 0
