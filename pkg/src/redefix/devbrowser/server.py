"""WebDriver wire-protocol server over the offline renderer.

Implements the endpoint subset the harness drives: session lifecycle,
navigation, window rect, synchronous script execution, element lookup and
rects, page source and screenshots. Script execution recognizes the
toolchain's scripts by embedded marker comments; anything else returns a
WebDriver ``javascript error`` so unsupported usage fails loudly instead of
silently.
"""

from __future__ import annotations

import base64
import json
import logging
import re
import threading
import urllib.request
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .page import Page, PageError

log = logging.getLogger(__name__)

ELEMENT_KEY = "element-6066-11e4-a52e-4f735466cecf"

PROBE_MARKER = "__REDEFIX_PROBE__"
INJECT_MARKER = "__REDEFIX_INJECT_STYLE__"
REMOVE_MARKER = "__REDEFIX_REMOVE_STYLE__"
COUNT_MARKER = "__REDEFIX_SELECTOR_COUNT__"
COMPUTED_MARKER = "__REDEFIX_COMPUTED__"


class _Session:
    def __init__(self):
        self.id = uuid.uuid4().hex
        self.page: Page | None = None
        self.width = 1024
        self.height = 800
        self.elements: dict[str, str] = {}  # element ref -> xpath
        self.lock = threading.RLock()


class _Handler(BaseHTTPRequestHandler):
    server_version = "redefix-devbrowser"
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # latency matters: many tiny requests

    def log_message(self, fmt, *args):
        log.debug("devbrowser: " + fmt, *args)

    # -- plumbing -------------------------------------------------------

    def _reply(self, status: int, value) -> None:
        body = json.dumps({"value": value}).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str, message: str) -> None:
        self._reply(status, {"error": code, "message": message, "stacktrace": ""})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if not length:
            return {}
        return json.loads(self.rfile.read(length))

    def _session(self, sid: str) -> _Session | None:
        return self.server.sessions.get(sid)

    # -- HTTP verbs -------------------------------------------------------

    def do_POST(self):
        try:
            # Consume the body up front: with keep-alive, unread bytes would
            # corrupt the next request on the same connection.
            self._payload = self._body()
            self._route("POST")
        except PageError as exc:
            self._error(400, "invalid argument", str(exc))
        except Exception as exc:  # defensive: always answer in protocol shape
            log.exception("devbrowser POST failed")
            self._error(500, "unknown error", str(exc))

    def do_GET(self):
        try:
            self._route("GET")
        except PageError as exc:
            self._error(400, "invalid argument", str(exc))
        except Exception as exc:
            log.exception("devbrowser GET failed")
            self._error(500, "unknown error", str(exc))

    def do_DELETE(self):
        m = re.fullmatch(r"/session/(\w+)", self.path)
        if m and self.server.sessions.pop(m.group(1), None) is not None:
            self._reply(200, None)
        else:
            self._error(404, "invalid session id", "no such session")

    # -- routing ----------------------------------------------------------

    def _route(self, verb: str):
        path = self.path
        if verb == "POST" and path == "/session":
            session = _Session()
            self.server.sessions[session.id] = session
            self._reply(
                200,
                {
                    "sessionId": session.id,
                    "capabilities": {"browserName": "redefix-devbrowser"},
                },
            )
            return

        m = re.match(r"/session/(\w+)(/.*)?$", path)
        if not m:
            self._error(404, "unknown command", path)
            return
        session = self._session(m.group(1))
        if session is None:
            self._error(404, "invalid session id", "no such session")
            return
        tail = m.group(2) or ""

        with session.lock:
            if verb == "POST":
                self._route_post(session, tail)
            else:
                self._route_get(session, tail)

    def _route_post(self, session: _Session, tail: str):
        body = self._payload
        if tail == "/url":
            self._navigate(session, body.get("url", ""))
        elif tail == "/window/rect":
            if body.get("width") is not None:
                session.width = int(body["width"])
            if body.get("height") is not None:
                session.height = int(body["height"])
            self._reply(200, {"x": 0, "y": 0, "width": session.width, "height": session.height})
        elif tail == "/execute/sync":
            self._execute(session, body.get("script", ""), body.get("args", []))
        elif tail == "/elements":
            self._find_elements(session, body.get("using", ""), body.get("value", ""))
        else:
            self._error(404, "unknown command", tail)

    def _route_get(self, session: _Session, tail: str):
        if tail == "/url":
            self._reply(200, session.page.url if session.page else "about:blank")
        elif tail == "/source":
            self._require_page(session)
            self._reply(200, session.page.source)
        elif tail == "/window/rect":
            self._reply(200, {"x": 0, "y": 0, "width": session.width, "height": session.height})
        elif tail == "/screenshot":
            self._require_page(session)
            png = session.page.screenshot(session.width)
            self._reply(200, base64.b64encode(png).decode("ascii"))
        elif (m := re.fullmatch(r"/element/([\w-]+)/rect", tail)):
            self._require_page(session)
            xpath = session.elements.get(m.group(1))
            if xpath is None:
                self._error(404, "stale element reference", m.group(1))
                return
            self._reply(200, session.page.rect_of(xpath, session.width))
        else:
            self._error(404, "unknown command", tail)

    def _require_page(self, session: _Session):
        if session.page is None:
            raise PageError("no page loaded")

    # -- command implementations -------------------------------------------

    def _navigate(self, session: _Session, url: str):
        if not url:
            self._error(400, "invalid argument", "missing url")
            return
        try:
            if url.startswith(("http://", "https://", "file://")):
                with urllib.request.urlopen(url, timeout=30) as resp:
                    content_type = resp.headers.get("Content-Type", "")
                    if content_type and not any(
                        t in content_type for t in ("html", "text/plain", "xml")
                    ):
                        self._error(
                            400, "invalid argument", f"non-HTML content: {content_type}"
                        )
                        return
                    html = resp.read().decode("utf-8", errors="replace")
            else:
                html = Path(url).read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            self._error(500, "unknown error", f"navigation failed: {exc}")
            return
        session.page = Page(html, url)
        session.elements.clear()
        self._reply(200, None)

    def _find_elements(self, session: _Session, using: str, value: str):
        self._require_page(session)
        refs = []
        for xpath in session.page.find_elements(using, value, session.width):
            ref = uuid.uuid4().hex
            session.elements[ref] = xpath
            refs.append({ELEMENT_KEY: ref})
        self._reply(200, refs)

    def _execute(self, session: _Session, script: str, args: list):
        if "document.readyState" in script:
            self._reply(200, "complete")
            return
        self._require_page(session)
        page = session.page
        if PROBE_MARKER in script:
            self._reply(200, page.probe(session.width, session.height))
        elif INJECT_MARKER in script:
            css_text, marker_id = str(args[0]), str(args[1])
            page.inject_style(marker_id, css_text)
            self._reply(200, True)
        elif REMOVE_MARKER in script:
            page.remove_style(str(args[0]))
            self._reply(200, True)
        elif COUNT_MARKER in script:
            self._reply(200, len(page.find_elements("css selector", str(args[0]), session.width)))
        elif COMPUTED_MARKER in script:
            value = page.computed_value(str(args[0]), str(args[1]), session.width)
            self._reply(200, value)
        elif "clientWidth" in script:
            self._reply(200, session.width)
        elif "outerHTML" in script:
            self._reply(200, page.source)
        else:
            self._error(400, "javascript error", f"unsupported script: {script[:80]!r}")


class _Server(ThreadingHTTPServer):
    daemon_threads = True


class DevBrowserServer:
    """Threaded server; ``port=0`` picks an ephemeral port."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._httpd = _Server((host, port), _Handler)
        self._httpd.sessions = {}
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "DevBrowserServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        log.info("devbrowser listening on %s", self.endpoint)
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> "DevBrowserServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
