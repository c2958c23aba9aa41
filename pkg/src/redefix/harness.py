"""Drives a headless browser over the WebDriver wire protocol.

Sets viewport widths (compensating for window chrome by measuring the
layout viewport and adjusting), runs the geometry probe, captures region
screenshots and injects/removes style elements. Works against any
WebDriver-compliant endpoint, including the embedded offline renderer in
:mod:`redefix.devbrowser`.
"""

from __future__ import annotations

import base64
import io
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import requests
from PIL import Image

from .errors import RedefixError
from .geometry import BoundingBox, union_box
from .layout_model import LayoutNode, LayoutSnapshot

log = logging.getLogger(__name__)

MIN_VIEWPORT = 200
MAX_VIEWPORT = 4000
DEFAULT_WINDOW_HEIGHT = 800
DEFAULT_SETTLE_DELAY = 0.2
DEFAULT_NAV_TIMEOUT = 30.0
DEFAULT_REGION_PADDING = 40

INJECT_SCRIPT = """/* __REDEFIX_INJECT_STYLE__ */
var s = document.createElement('style');
s.setAttribute('id', arguments[1]);
s.appendChild(document.createTextNode(arguments[0]));
document.head.appendChild(s);
return true;
"""

REMOVE_SCRIPT = """/* __REDEFIX_REMOVE_STYLE__ */
var s = document.getElementById(arguments[0]);
if (s && s.parentNode) { s.parentNode.removeChild(s); return true; }
return false;
"""

SELECTOR_COUNT_SCRIPT = """/* __REDEFIX_SELECTOR_COUNT__ */
return document.querySelectorAll(arguments[0]).length;
"""

COMPUTED_SCRIPT = """/* __REDEFIX_COMPUTED__ */
var el = document.querySelector(arguments[0]);
if (!el) { return null; }
return window.getComputedStyle(el).getPropertyValue(arguments[1]);
"""

READY_SCRIPT = "return document.readyState;"
CLIENT_WIDTH_SCRIPT = "return document.documentElement.clientWidth;"


class HarnessError(RedefixError):
    pass


class EndpointUnreachableError(HarnessError):
    pass


class NavigationError(HarnessError):
    pass


class ScriptError(HarnessError):
    pass


class DuplicateMarkerError(HarnessError):
    pass


class UnknownMarkerError(HarnessError):
    pass


class ElementNotFoundError(HarnessError):
    pass


@dataclass(frozen=True)
class Screenshot:
    png_bytes: bytes
    viewport_width: int
    region: BoundingBox


@dataclass
class PageHandle:
    session_id: str
    url: str
    injected_style_ids: list[str] = field(default_factory=list)


def load_probe_script() -> str:
    source = resources.files("redefix").joinpath("data/probe.js").read_text()
    return source + "\nreturn collectGeometry();"


class BrowserHarness:
    def __init__(
        self,
        webdriver_endpoint: str,
        nav_timeout: float = DEFAULT_NAV_TIMEOUT,
        settle_delay: float = DEFAULT_SETTLE_DELAY,
        window_height: int = DEFAULT_WINDOW_HEIGHT,
        probe_script: Optional[str] = None,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = webdriver_endpoint.rstrip("/")
        self.nav_timeout = nav_timeout
        self.settle_delay = settle_delay
        self.window_height = window_height
        self._probe_script = probe_script or load_probe_script()
        self._session = session or requests.Session()

    # -- wire plumbing ---------------------------------------------------

    def _request(self, method: str, path: str, payload: Optional[dict] = None):
        url = f"{self.endpoint}{path}"
        try:
            resp = self._session.request(method, url, json=payload, timeout=self.nav_timeout + 30)
        except requests.RequestException as exc:
            raise EndpointUnreachableError(f"{method} {url}: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise HarnessError(f"{method} {path}: non-JSON response") from exc
        value = body.get("value")
        if resp.status_code != 200 or (isinstance(value, dict) and "error" in value and "message" in value):
            message = value.get("message", str(value)) if isinstance(value, dict) else str(value)
            raise HarnessError(f"{method} {path}: {message}")
        return value

    def _execute(self, page: PageHandle, script: str, args: Optional[list] = None):
        try:
            return self._request(
                "POST", f"/session/{page.session_id}/execute/sync",
                {"script": script, "args": args or []},
            )
        except HarnessError as exc:
            if isinstance(exc, EndpointUnreachableError):
                raise
            raise ScriptError(str(exc)) from exc

    # -- lifecycle ---------------------------------------------------------

    def open(self, target: str) -> PageHandle:
        """Open a browser session and navigate to a URL or local file."""
        url = self._normalize_target(target)
        value = self._request("POST", "/session", {"capabilities": {"alwaysMatch": {}}})
        session_id = value.get("sessionId") or value.get("session_id")
        if not session_id:
            raise HarnessError(f"no session id in {value}")
        page = PageHandle(session_id=session_id, url=url)
        try:
            self._request("POST", f"/session/{session_id}/url", {"url": url})
            deadline = time.monotonic() + self.nav_timeout
            while True:
                if self._execute(page, READY_SCRIPT) == "complete":
                    break
                if time.monotonic() > deadline:
                    raise NavigationError(f"navigation timeout for {url}")
                time.sleep(0.1)
        except HarnessError as exc:
            self.close(page)
            if isinstance(exc, (NavigationError, EndpointUnreachableError)):
                raise
            raise NavigationError(f"navigation failed for {url}: {exc}") from exc
        return page

    @staticmethod
    def _normalize_target(target: str) -> str:
        if target.startswith(("http://", "https://", "file://", "about:")):
            return target
        path = Path(target)
        if not path.exists():
            raise NavigationError(f"target not found: {target}")
        return path.resolve().as_uri()

    def close(self, page: PageHandle) -> None:
        try:
            self._request("DELETE", f"/session/{page.session_id}")
        except HarnessError:
            log.debug("session %s already gone", page.session_id)

    # -- geometry ------------------------------------------------------------

    def set_viewport_width(self, page: PageHandle, width: int) -> None:
        """Resize until the layout viewport reports exactly ``width``."""
        delta = 0
        for _ in range(4):
            self._request(
                "POST", f"/session/{page.session_id}/window/rect",
                {"width": width + delta, "height": self.window_height},
            )
            measured = int(self._execute(page, CLIENT_WIDTH_SCRIPT))
            if measured == width:
                return
            delta += width - measured
        raise HarnessError(f"cannot reach viewport width {width} (chrome delta {delta})")

    def snapshot_at(self, page: PageHandle, width: int) -> LayoutSnapshot:
        if not MIN_VIEWPORT <= width <= MAX_VIEWPORT:
            raise HarnessError(f"viewport width out of range: {width}")
        self.set_viewport_width(page, width)
        if self.settle_delay:
            time.sleep(self.settle_delay)
        result = self._execute(page, self._probe_script)
        try:
            entries = result["elements"]
        except (TypeError, KeyError) as exc:
            raise ScriptError(f"malformed probe result: {result!r}") from exc
        nodes = []
        parent_map: dict[str, str] = {}
        xpaths: list[str] = []
        for entry in entries:
            rect = entry["rect"]
            box = BoundingBox(
                float(rect["x"]), float(rect["y"]),
                float(rect["width"]), float(rect["height"]),
            )
            nodes.append(LayoutNode(xpath=entry["xpath"], box=box, visible=True))
            xpaths.append(entry["xpath"])
            parent_idx = entry.get("parent_index", -1)
            if parent_idx is not None and parent_idx >= 0:
                parent_map[entry["xpath"]] = xpaths[parent_idx]
        snapshot = LayoutSnapshot(viewport_width=width, nodes=nodes, parent_map=parent_map)
        snapshot.validate()
        return snapshot

    def screenshot_region(
        self,
        page: PageHandle,
        width: int,
        participants: list[str],
        padding: int = DEFAULT_REGION_PADDING,
    ) -> Screenshot:
        if not participants:
            raise ElementNotFoundError("no participants to capture")
        snapshot = self.snapshot_at(page, width)
        boxes = []
        for xpath in participants:
            node = snapshot.node(xpath)
            if node is None:
                raise ElementNotFoundError(f"{xpath} not present at {width}px")
            boxes.append(node.box)
        union = union_box(boxes)

        raw = self._request("GET", f"/session/{page.session_id}/screenshot")
        image = Image.open(io.BytesIO(base64.b64decode(raw)))

        x0 = max(0, int(union.x) - padding)
        y0 = max(0, int(union.y) - padding)
        x1 = min(image.width, int(union.right) + padding)
        y1 = min(image.height, int(union.bottom) + padding)
        if x1 <= x0 or y1 <= y0:
            raise HarnessError(f"degenerate capture region for {participants}")
        crop = image.crop((x0, y0, x1, y1))
        buf = io.BytesIO()
        crop.save(buf, format="PNG")
        return Screenshot(
            png_bytes=buf.getvalue(),
            viewport_width=width,
            region=BoundingBox(x0, y0, x1 - x0, y1 - y0),
        )

    # -- styles ------------------------------------------------------------

    def inject_style(self, page: PageHandle, css_text: str, marker_id: str) -> None:
        if marker_id in page.injected_style_ids:
            raise DuplicateMarkerError(f"style marker already injected: {marker_id}")
        self._execute(page, INJECT_SCRIPT, [css_text, marker_id])
        page.injected_style_ids.append(marker_id)

    def remove_style(self, page: PageHandle, marker_id: str) -> None:
        if marker_id not in page.injected_style_ids:
            raise UnknownMarkerError(f"style marker not injected: {marker_id}")
        self._execute(page, REMOVE_SCRIPT, [marker_id])
        page.injected_style_ids.remove(marker_id)

    # -- page queries --------------------------------------------------------

    def page_source(self, page: PageHandle) -> str:
        return self._request("GET", f"/session/{page.session_id}/source")

    def selector_match_count(self, page: PageHandle, selector: str) -> int:
        return int(self._execute(page, SELECTOR_COUNT_SCRIPT, [selector]))

    def computed_value(self, page: PageHandle, selector: str, prop: str):
        return self._execute(page, COMPUTED_SCRIPT, [selector, prop])

    def element_rect(self, page: PageHandle, xpath: str) -> BoundingBox:
        """Border-box rect straight from the WebDriver element-rect
        endpoint (independent of the in-page probe)."""
        refs = self._request(
            "POST", f"/session/{page.session_id}/elements",
            {"using": "xpath", "value": xpath},
        )
        if not refs:
            raise ElementNotFoundError(f"no element for xpath {xpath}")
        element_id = next(iter(refs[0].values()))
        rect = self._request(
            "GET", f"/session/{page.session_id}/element/{element_id}/rect"
        )
        return BoundingBox(
            float(rect["x"]), float(rect["y"]), float(rect["width"]), float(rect["height"])
        )


class StaticFileServer:
    """Serves a directory over HTTP on an ephemeral port.

    Some browsers restrict script execution on file:// pages, so local
    fixtures are served over localhost instead.
    """

    def __init__(self, directory: str | Path, host: str = "127.0.0.1"):
        import functools
        from http.server import ThreadingHTTPServer

        class Server(ThreadingHTTPServer):
            daemon_threads = True

        handler = functools.partial(
            _QuietFileHandler, directory=str(Path(directory).resolve())
        )
        self._httpd = Server((host, 0), handler)
        self._thread = None

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def url_for(self, relative: str) -> str:
        return f"{self.base_url}/{relative.lstrip('/')}"

    def start(self) -> "StaticFileServer":
        import threading

        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> "StaticFileServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def _make_quiet_handler():
    from http.server import SimpleHTTPRequestHandler

    class QuietFileHandler(SimpleHTTPRequestHandler):
        disable_nagle_algorithm = True

        def log_message(self, fmt, *args):
            log.debug("fileserver: " + fmt, *args)

    return QuietFileHandler


_QuietFileHandler = _make_quiet_handler()
