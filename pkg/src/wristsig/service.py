"""Trusted-third-party verification service.

Wire API (JSON over HTTP):

``POST /enroll``
    ``{"user_id": str, "recordings": [recording, ...], "overwrite": bool?}``
    -> 201 ``{"status": "enrolled", ...}`` or 200 ``{"status": "unchanged", ...}``
``POST /verify``
    ``{"user_id": str, "recording": recording, "signed_at": ISO-8601 UTC, "nonce": str}``
    -> 200 ``{"decision": "GENUINE"|"FORGED", "score": float, "model_version": str, "threshold": float}``
``GET /health``
    -> 200 ``{"status": "ok", "model_version": str, "enrolled_users": int}``

A ``recording`` is either a CSV string in the recording file format or an
object ``{"signals": {"acc_x": [...], ..., "gvel_z": [...]}, "sample_rate_hz": 62}``.
Errors come back as ``{"error": <error class>, "message": str}`` with status
400 (malformed), 404 (unknown user), 409 (already enrolled / replay) or 500.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

from .classifiers import DEFAULT_THRESHOLD, VerificationModel, dumps_model, load_model, predict_score
from .errors import (
    DataError,
    EmptyEnrollment,
    MalformedRecording,
    ReplayRejected,
    UnknownUser,
    UserAlreadyEnrolled,
)
from .features import extract_features
from .signal import COLUMNS, DEFAULT_SAMPLE_RATE, Label, SignatureRecording, preprocess
from .storage import ReferenceStore, read_recording

log = logging.getLogger(__name__)

ENV_PREFIX = "WRISTSIG_"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    model_path: Optional[str] = None
    store_path: Optional[str] = None
    threshold: float = DEFAULT_THRESHOLD
    replay_window_s: float = 120.0

    @property
    def bind(self) -> str:
        return f"{self.host}:{self.port}"


def _parse_bind(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must look like HOST:PORT, got {value!r}")
    return host, int(port)


def load_service_config(path=None, env=None, **overrides) -> ServiceConfig:
    """Config file (JSON), then ``WRISTSIG_*`` environment variables, then explicit overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        raw = raw.get("serve", raw)
        if "bind" in raw:
            values["host"], values["port"] = _parse_bind(raw.pop("bind"))
        values.update({k.replace("-", "_"): v for k, v in raw.items()})
    if f"{ENV_PREFIX}BIND" in env:
        values["host"], values["port"] = _parse_bind(env[f"{ENV_PREFIX}BIND"])
    for key, name, cast in (
        ("MODEL_PATH", "model_path", str),
        ("STORE_PATH", "store_path", str),
        ("THRESHOLD", "threshold", float),
        ("REPLAY_WINDOW", "replay_window_s", float),
    ):
        if ENV_PREFIX + key in env:
            values[name] = cast(env[ENV_PREFIX + key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = set(ServiceConfig.__dataclass_fields__)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown service settings: {', '.join(unknown)}")
    cfg = ServiceConfig(**values)
    return replace(cfg, port=int(cfg.port), threshold=float(cfg.threshold), replay_window_s=float(cfg.replay_window_s))


class NonceRegistry:
    """Nonces accepted within the replay window; check-and-insert is atomic."""

    def __init__(self):
        self._lock = threading.Lock()
        self._expiry: dict[str, float] = {}

    def __len__(self) -> int:
        return len(self._expiry)

    def evict(self, now: float) -> None:
        with self._lock:
            self._evict(now)

    def _evict(self, now: float) -> None:
        stale = [n for n, exp in self._expiry.items() if exp < now]
        for n in stale:
            del self._expiry[n]

    def claim(self, nonce: str, expires_at: float, now: float) -> bool:
        with self._lock:
            self._evict(now)
            if nonce in self._expiry:
                return False
            self._expiry[nonce] = expires_at
            return True


def parse_timestamp(value) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str) or not value:
        raise MalformedRecording("signed_at must be an ISO-8601 timestamp")
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise MalformedRecording(f"unparseable signed_at {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat().replace("+00:00", "Z")


def parse_recording(payload, user_id: str = "") -> SignatureRecording:
    """Decode a wire recording (CSV text or inline per-channel arrays)."""
    try:
        if isinstance(payload, str):
            return read_recording(io.StringIO(payload), user_id)
        if isinstance(payload, dict) and "csv" in payload:
            return read_recording(io.StringIO(payload["csv"]), user_id)
        if isinstance(payload, dict) and "signals" in payload:
            signals = payload["signals"]
            missing = [c for c in COLUMNS if c not in signals]
            if missing:
                raise MalformedRecording(f"recording lacks channels {', '.join(missing)}")
            rate = float(payload.get("sample_rate_hz", DEFAULT_SAMPLE_RATE))
            return SignatureRecording([signals[c] for c in COLUMNS], user_id, sample_rate_hz=rate)
    except MalformedRecording:
        raise
    except (DataError, ValueError, TypeError) as exc:
        raise MalformedRecording(f"bad recording: {exc}") from None
    raise MalformedRecording("recording must be CSV text or an object with 'signals'")


def recording_payload(recording: SignatureRecording) -> dict:
    return {
        "signals": {c: recording.data[i].tolist() for i, c in enumerate(COLUMNS)},
        "sample_rate_hz": recording.sample_rate_hz,
    }


STATUS_FOR = {
    EmptyEnrollment: 400,
    MalformedRecording: 400,
    UnknownUser: 404,
    UserAlreadyEnrolled: 409,
    ReplayRejected: 409,
}


def status_for(exc: Exception) -> int:
    for cls, code in STATUS_FOR.items():
        if isinstance(exc, cls):
            return code
    if isinstance(exc, DataError):
        return 400
    return 500


class VerificationService:
    def __init__(
        self,
        model: VerificationModel,
        store: ReferenceStore,
        threshold: float = DEFAULT_THRESHOLD,
        replay_window_s: float = 120.0,
        clock: Callable[[], float] = time.time,
    ):
        self.model = model
        self.store = store
        self.threshold = float(threshold)
        self.replay_window_s = float(replay_window_s)
        self.clock = clock
        self.nonces = NonceRegistry()
        self.model_version = hashlib.sha256(dumps_model(model)).hexdigest()[:16]

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "VerificationService":
        if not config.model_path or not config.store_path:
            raise ValueError("service needs both model_path and store_path")
        return cls(
            load_model(config.model_path),
            ReferenceStore(config.store_path),
            config.threshold,
            config.replay_window_s,
        )

    def handle_enroll(self, request: dict) -> tuple[int, dict]:
        user_id = request.get("user_id")
        if not isinstance(user_id, str) or not user_id:
            raise MalformedRecording("user_id must be a non-empty string")
        payloads = request.get("recordings") or []
        if not isinstance(payloads, list):
            raise MalformedRecording("recordings must be a list")
        if not payloads:
            raise EmptyEnrollment("at least one genuine recording is required")
        recordings = [parse_recording(p, user_id) for p in payloads]
        changed = self.store.enroll(user_id, recordings, overwrite=bool(request.get("overwrite", False)))
        body = {
            "status": "enrolled" if changed else "unchanged",
            "user_id": user_id,
            "n_references": len(self.store.get_references(user_id)),
        }
        return (201 if changed else 200), body

    def handle_verify(self, request: dict) -> tuple[int, dict]:
        user_id = request.get("user_id")
        if not isinstance(user_id, str) or not user_id:
            raise MalformedRecording("user_id must be a non-empty string")
        nonce = request.get("nonce")
        if not isinstance(nonce, str) or not nonce:
            raise MalformedRecording("nonce must be a non-empty string")
        signed_at = parse_timestamp(request.get("signed_at"))
        now = self.clock()
        if abs(now - signed_at) > self.replay_window_s:
            raise ReplayRejected(
                f"signature signed {now - signed_at:.0f}s from server time; window is {self.replay_window_s:.0f}s"
            )
        recording = parse_recording(request.get("recording"), user_id)
        self.store.refresh()
        refs = self.store.get_references(user_id)
        if not self.nonces.claim(nonce, signed_at + self.replay_window_s, now):
            raise ReplayRejected(f"nonce {nonce!r} already used")
        fv = extract_features(preprocess(recording, refs.k), refs)
        score = predict_score(self.model, fv)
        decision = score.decision(self.threshold)
        return 200, {
            "decision": "GENUINE" if decision is Label.GENUINE else "FORGED",
            "score": score.probability_genuine,
            "model_version": self.model_version,
            "threshold": self.threshold,
        }

    def health(self) -> tuple[int, dict]:
        return 200, {"status": "ok", "model_version": self.model_version, "enrolled_users": len(self.store)}


def _make_handler(service: VerificationService):
    class Handler(BaseHTTPRequestHandler):
        server_version = "wristsig"

        def log_message(self, fmt, *args):
            log.info("%s %s", self.address_string(), fmt % args)

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _error(self, exc: Exception) -> None:
            status = status_for(exc)
            if status == 500:
                log.exception("internal error")
            self._send(status, {"error": type(exc).__name__, "message": str(exc)})

        def do_GET(self):
            if self.path == "/health":
                self._send(*service.health())
            else:
                self._send(404, {"error": "NotFound", "message": f"no route {self.path}"})

        def do_POST(self):
            routes = {"/enroll": service.handle_enroll, "/verify": service.handle_verify}
            route = routes.get(self.path)
            if route is None:
                self._send(404, {"error": "NotFound", "message": f"no route {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    request = json.loads(self.rfile.read(length) or b"{}")
                except (json.JSONDecodeError, UnicodeDecodeError):
                    raise MalformedRecording("request body is not valid JSON") from None
                if not isinstance(request, dict):
                    raise MalformedRecording("request body must be a JSON object")
                self._send(*route(request))
            except Exception as exc:
                self._error(exc)

    return Handler


def make_server(service: VerificationService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _make_handler(service))
    server.daemon_threads = True
    return server


def start_in_thread(service: VerificationService, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a background thread; returns (server, base_url)."""
    server = make_server(service, host, port)
    thread = threading.Thread(target=server.serve_forever, name="wristsig-http", daemon=True)
    thread.start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}"


def serve(config: ServiceConfig) -> None:
    service = VerificationService.from_config(config)
    server = make_server(service, config.host, config.port)
    log.info("serving on %s (model %s)", config.bind, service.model_version)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
