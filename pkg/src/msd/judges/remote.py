"""JSON-over-HTTP judge: a threaded server wrapping any in-process judge, and its client.

Request ``POST /judge``::

    {"factor": str, "labels": [str], "shape": [int], "dtype": "f32",
     "data": base64 of little-endian float32, row-major}

Response ``{"label": str}``. A payload shaped like one sequence is judged at
sequence level; one shaped like a single step is judged as a frame.
``GET /health`` and ``GET /factors`` support liveness checks and discovery.
"""

from __future__ import annotations

import base64
import http.client
import json
import logging
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlparse

import numpy as np

from .base import INVALID, Judge, JudgeError

log = logging.getLogger(__name__)


class ProtocolError(JudgeError):
    """The server answered, but not with a valid label."""


def encode_array(x: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(x, dtype="<f4").tobytes()).decode("ascii")


def decode_array(text: str, shape) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    shape = tuple(int(s) for s in shape)
    if len(raw) != 4 * int(np.prod(shape)):
        raise ValueError(f"payload has {len(raw)} bytes, shape {shape} needs {4 * int(np.prod(shape))}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    server: "JudgeServer"

    def log_message(self, fmt, *args):  # route through logging instead of stderr
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, obj) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, {"status": "ok"})
        elif self.path == "/factors":
            m = self.server.judge.manifest
            self._send(200, {"dataset": m.name, "factors": [f.to_json() for f in m.factors]})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/judge":
            self._send(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            req = json.loads(self.rfile.read(length).decode("utf-8"))
            label = self.server.answer(req)
        except (ValueError, KeyError, TypeError, JudgeError) as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, {"label": label})


class JudgeServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, judge: Judge, host: str = "127.0.0.1", port: int = 0, max_concurrent: int = 8):
        super().__init__((host, port), _Handler)
        self.judge = judge
        self._slots = threading.BoundedSemaphore(max_concurrent)
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def answer(self, req: dict) -> str:
        manifest = self.judge.manifest
        factor = req["factor"]
        spec = manifest.factor(factor)
        if req.get("dtype") != "f32":
            raise ValueError(f"unsupported dtype {req.get('dtype')!r}")
        if list(req.get("labels", spec.labels)) != list(spec.labels):
            raise ValueError("label space does not match the served dataset")
        x = decode_array(req["data"], req["shape"])
        seq_shape = (manifest.seq_len, *manifest.step_shape)
        with self._slots:
            if x.shape == seq_shape:
                idx = int(self.judge.judge_sequences(x[None], factor)[0])
            elif x.shape == tuple(manifest.step_shape):
                idx = int(self.judge.judge_frames(x[None], factor)[0])
            else:
                raise ValueError(f"shape {x.shape} is neither a sequence {seq_shape} nor a frame {manifest.step_shape}")
        return spec.labels[idx]

    def start(self) -> "JudgeServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


class RemoteJudge(Judge):
    """Client side of the wire protocol; one persistent connection per thread.

    With ``invalid_on_error`` set, failed samples come back as ``INVALID``
    and are counted in ``failures`` instead of raising.
    """

    def __init__(self, endpoint: str, manifest, timeout: float = 30.0, retries: int = 0, invalid_on_error: bool = False):
        url = urlparse(endpoint)
        self.host = url.hostname or "127.0.0.1"
        self.port = url.port or 80
        self.manifest = manifest
        self.timeout = timeout
        self.retries = retries
        self.invalid_on_error = invalid_on_error
        self.calls = 0
        self.failures = 0
        self._local = threading.local()

    def _conn(self) -> http.client.HTTPConnection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
            conn.connect()
            conn.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._local.conn = conn
        return conn

    def _drop_conn(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
        self._local.conn = None

    def request(self, method: str, path: str, body: dict | None = None) -> tuple[int, bytes]:
        payload = None if body is None else json.dumps(body).encode("utf-8")
        headers = {"Content-Type": "application/json"} if payload is not None else {}
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                conn = self._conn()
                conn.request(method, path, body=payload, headers=headers)
                resp = conn.getresponse()
                return resp.status, resp.read()
            except (OSError, http.client.HTTPException, socket.timeout) as exc:
                last_exc = exc
                self._drop_conn()
        raise JudgeError(f"judge endpoint {self.host}:{self.port} unreachable: {last_exc}") from last_exc

    def judge_one(self, x: np.ndarray, factor: str) -> int:
        spec = self.manifest.factor(factor)
        body = {"factor": factor, "labels": list(spec.labels), "shape": list(x.shape), "dtype": "f32", "data": encode_array(x)}
        status, raw = self.request("POST", "/judge", body)
        if status != 200:
            raise ProtocolError(f"judge returned HTTP {status}: {raw[:200]!r}")
        try:
            label = json.loads(raw.decode("utf-8"))["label"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed judge response: {raw[:200]!r}") from exc
        if label not in spec.labels:
            raise ProtocolError(f"label {label!r} is not in the label space of {factor!r}")
        return spec.labels.index(label)

    def _judge_many(self, items: np.ndarray, factor: str) -> np.ndarray:
        out = np.empty(len(items), dtype=np.int64)
        for i, x in enumerate(items):
            self.calls += 1
            try:
                out[i] = self.judge_one(x, factor)
            except JudgeError:
                if not self.invalid_on_error:
                    raise
                self.failures += 1
                out[i] = INVALID
        return out

    def judge_sequences(self, x: np.ndarray, factor: str) -> np.ndarray:
        return self._judge_many(np.asarray(x), factor)

    def judge_frames(self, frames: np.ndarray, factor: str) -> np.ndarray:
        self._check_frame_factor(factor)
        return self._judge_many(np.asarray(frames), factor)

    def health(self) -> bool:
        status, raw = self.request("GET", "/health")
        return status == 200 and json.loads(raw).get("status") == "ok"

    def factors(self) -> dict:
        status, raw = self.request("GET", "/factors")
        if status != 200:
            raise ProtocolError(f"/factors returned HTTP {status}")
        return json.loads(raw)
