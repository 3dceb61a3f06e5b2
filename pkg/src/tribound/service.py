"""Local HTTP API exposing programs, annotations and estimates to the workbench.

Endpoints (JSON in/out, CORS enabled for the browser client):

    GET  /programs                         -> {"programs": [names]}
    GET  /programs/{name}                  -> source, block map, current estimate
    GET  /programs/{name}/estimate?period=N
    PUT  /programs/{name}/annotations      -> replaces the set, returns new estimate
    GET  /model/summary

Unknown programs give 404; conflicting or infeasible annotations give 422
with the error code in the body.  Estimates are cached per (program,
annotations, model) content hash, and the estimate payload is byte-identical
to `tribound estimate` output for the same inputs.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .cfg import Cfg, build_cfg
from .errors import (
    ConflictingMarks,
    Infeasible,
    MalformedAnnotation,
    NonPositivePeriod,
    TriboundError,
    UnknownLabel,
)
from .estimator import (
    Annotation,
    annotation_from_json_dict,
    annotation_to_json_dict,
    estimate,
    estimate_to_json_dict,
    render_json,
)
from .program import Program, parse_program
from .timing_model import TimingModel, load_model, model_to_json_dict

ANNOTATION_ERRORS = (ConflictingMarks, Infeasible, MalformedAnnotation, UnknownLabel, NonPositivePeriod)


@dataclass
class _Entry:
    source: str
    program: Program
    cfg: Cfg
    annotation: Annotation = field(default_factory=Annotation.empty)
    lock: threading.Lock = field(default_factory=threading.Lock)


class ProjectWorkspace:
    """Programs, per-program annotations and a content-addressed estimate cache."""

    def __init__(self, model: TimingModel, model_path: str | Path, programs_dir: str | Path):
        self.model = model
        self.model_hash = hashlib.md5(Path(model_path).read_bytes()).hexdigest()
        self.entries: dict[str, _Entry] = {}
        self._cache: dict[tuple[str, str, str, str], dict] = {}
        self._cache_lock = threading.Lock()
        for path in sorted(Path(programs_dir).glob("*.tasm")):
            source = path.read_text(encoding="utf-8")
            program = parse_program(source, name=path.stem)
            self.entries[path.stem] = _Entry(source, program, build_cfg(program))

    def names(self) -> list[str]:
        return sorted(self.entries)

    def entry(self, name: str) -> _Entry | None:
        return self.entries.get(name)

    def estimate_doc(self, name: str, period: int | None = None) -> dict:
        entry = self.entries[name]
        ann_doc = annotation_to_json_dict(entry.annotation)
        key = (
            hashlib.md5(entry.source.encode()).hexdigest(),
            hashlib.md5(json.dumps(ann_doc, sort_keys=True).encode()).hexdigest(),
            self.model_hash,
            str(period),
        )
        with self._cache_lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        est = estimate(entry.program, self.model, entry.annotation, entry.cfg)
        doc = estimate_to_json_dict(est, name, entry.cfg, period)
        with self._cache_lock:
            self._cache[key] = doc
        return doc

    def put_annotations(self, name: str, doc: dict) -> dict:
        entry = self.entries[name]
        annotation = annotation_from_json_dict(doc)
        with entry.lock:
            previous = entry.annotation
            entry.annotation = annotation
            try:
                return self.estimate_doc(name)
            except ANNOTATION_ERRORS:
                entry.annotation = previous
                raise


def _block_map(cfg: Cfg) -> list[dict]:
    return [
        {
            "id": b.id,
            "label": b.label,
            "start": b.start(),
            "size": b.size(),
            "addresses": [i.address for i in b.instructions],
        }
        for b in cfg.blocks
    ]


def make_handler(workspace: ProjectWorkspace):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, status: int, body: str, content_type: str = "application/json") -> None:
            data = body.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, PUT, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()
            self.wfile.write(data)

        def _send_json(self, status: int, doc: dict) -> None:
            self._send(status, render_json(doc))

        def _error(self, status: int, err: TriboundError | str) -> None:
            if isinstance(err, TriboundError):
                self._send_json(status, err.to_json_dict())
            else:
                self._send_json(status, {"error": "BadRequest", "detail": err})

        def do_OPTIONS(self):
            self._send(204, "")

        def do_GET(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            try:
                if parts == ["programs"]:
                    self._send_json(200, {"programs": workspace.names()})
                    return
                if parts == ["model", "summary"]:
                    doc = model_to_json_dict(workspace.model)
                    self._send_json(
                        200,
                        {
                            "processor": doc["processor"],
                            "baselineOpcodes": len(doc["baseline"]),
                            "sequences": len(doc["sequences"]),
                            "provenance": doc["provenance"],
                        },
                    )
                    return
                if len(parts) >= 2 and parts[0] == "programs":
                    name = parts[1]
                    entry = workspace.entry(name)
                    if entry is None:
                        self._send_json(404, {"error": "UnknownProgram", "detail": name})
                        return
                    if len(parts) == 2:
                        self._send_json(
                            200,
                            {
                                "name": name,
                                "source": entry.source,
                                "blocks": _block_map(entry.cfg),
                                "annotations": annotation_to_json_dict(entry.annotation),
                                "estimate": workspace.estimate_doc(name),
                            },
                        )
                        return
                    if len(parts) == 3 and parts[2] == "estimate":
                        query = parse_qs(url.query)
                        period = None
                        if "period" in query:
                            period = int(query["period"][0])
                            if period <= 0:
                                raise NonPositivePeriod(f"period must be positive, got {period}")
                        self._send(200, render_json(workspace.estimate_doc(name, period)))
                        return
                self._send_json(404, {"error": "UnknownRoute", "detail": url.path})
            except ANNOTATION_ERRORS as err:
                self._error(422, err)
            except TriboundError as err:
                self._error(400, err)

        def do_PUT(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if len(parts) != 3 or parts[0] != "programs" or parts[2] != "annotations":
                self._send_json(404, {"error": "UnknownRoute", "detail": url.path})
                return
            name = parts[1]
            if workspace.entry(name) is None:
                self._send_json(404, {"error": "UnknownProgram", "detail": name})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                doc = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError as err:
                self._error(400, str(err))
                return
            try:
                self._send(200, render_json(workspace.put_annotations(name, doc)))
            except ANNOTATION_ERRORS as err:
                self._error(422, err)
            except TriboundError as err:
                self._error(400, err)

    return Handler


def make_server(model_path, programs_dir, port: int = 8321, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    model = load_model(model_path)
    workspace = ProjectWorkspace(model, model_path, programs_dir)
    return ThreadingHTTPServer((host, port), make_handler(workspace))


def serve(model_path, programs_dir, port: int = 8321, host: str = "127.0.0.1") -> None:
    server = make_server(model_path, programs_dir, port, host)
    print(f"tribound service on http://{host}:{server.server_address[1]}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
