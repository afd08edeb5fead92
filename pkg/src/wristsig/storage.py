"""On-disk formats: CSV recordings, JSON corpus manifests and the binary reference store."""

from __future__ import annotations

import contextlib
import csv
import fcntl
import hashlib
import io
import json
import logging
import os
import struct
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from .corpus import SignatureCorpus, UserRecord
from .errors import (
    CorpusError,
    CorruptStoreFile,
    DataError,
    EmptyEnrollment,
    EmptyRecording,
    MalformedHeader,
    ManifestNotFound,
    NonFiniteInput,
    NonMonotonicTimestamps,
    RaggedRow,
    UnknownUser,
    UnsupportedVersion,
    UserAlreadyEnrolled,
    VersionMismatch,
)
from .features import ReferenceSet
from .signal import COLUMNS, DEFAULT_K, DEFAULT_SAMPLE_RATE, N_DIMS, CompressedSignature, Label, SignatureRecording, preprocess

log = logging.getLogger(__name__)

CSV_HEADER = ("t",) + COLUMNS
SAMPLE_RATE_TOLERANCE = 0.10

PathOrStream = Union[str, os.PathLike, TextIO]


# ---------------------------------------------------------------- recordings


@contextlib.contextmanager
def _text_source(source):
    if hasattr(source, "read"):
        yield source
    else:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            yield fh


def read_recording(
    source: PathOrStream,
    user_id: str = "",
    label: Label = Label.UNKNOWN,
    forger_id: Optional[str] = None,
) -> SignatureRecording:
    """Parse a ten-column CSV recording (timestamp in seconds plus nine channels)."""
    name = getattr(source, "name", source if not hasattr(source, "read") else "<stream>")
    with _text_source(source) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyRecording(f"{name}: file is empty") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise MalformedHeader(f"{name}: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise RaggedRow(f"{name}: line {lineno} has {len(row)} fields, expected {len(CSV_HEADER)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise RaggedRow(f"{name}: line {lineno} contains a non-numeric field") from None
    if not rows:
        raise EmptyRecording(f"{name}: no samples")
    table = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(table)):
        raise NonFiniteInput(f"{name}: non-finite value")
    t = table[:, 0]
    dt = np.diff(t)
    if np.any(dt <= 0):
        bad = int(np.flatnonzero(dt <= 0)[0]) + 3  # header + 1-based + next row
        raise NonMonotonicTimestamps(f"{name}: timestamps not strictly increasing at line {bad}")
    rate = 1.0 / float(np.median(dt)) if dt.size else DEFAULT_SAMPLE_RATE
    if abs(rate - DEFAULT_SAMPLE_RATE) > SAMPLE_RATE_TOLERANCE * DEFAULT_SAMPLE_RATE:
        log.warning("%s: sample rate %.2f Hz deviates from %.0f Hz by more than 10%%", name, rate, DEFAULT_SAMPLE_RATE)
    return SignatureRecording(table[:, 1:].T, user_id, label, forger_id, rate)


def recording_to_csv(recording: SignatureRecording) -> str:
    buf = io.StringIO()
    write_recording(recording, buf)
    return buf.getvalue()


def write_recording(recording: SignatureRecording, sink: PathOrStream) -> None:
    """Write a recording as CSV with 17 significant digits (lossless for doubles)."""
    if not hasattr(sink, "write"):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            write_recording(recording, fh)
        return
    sink.write(",".join(CSV_HEADER) + "\n")
    step = 1.0 / recording.sample_rate_hz
    for i in range(recording.n_samples):
        values = [i * step] + recording.data[:, i].tolist()
        sink.write(",".join(format(v, ".17g") for v in values) + "\n")


# ---------------------------------------------------------------- corpora

MANIFEST_FORMAT = "wristsig-corpus"
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


def write_corpus(corpus: SignatureCorpus, out_dir) -> Path:
    """Write one CSV per recording plus ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for user in corpus:
        udir = out / user.user_id
        udir.mkdir(exist_ok=True)
        genuine = []
        for i, rec in enumerate(user.genuine):
            rel = f"{user.user_id}/genuine_{i:02d}.csv"
            write_recording(rec, out / rel)
            genuine.append(rel)
        forgeries = []
        seen: dict[str, int] = {}
        for rec in user.skilled_forgeries:
            j = seen.get(rec.forger_id, 0)
            seen[rec.forger_id] = j + 1
            rel = f"{user.user_id}/forgery_{rec.forger_id}_{j:02d}.csv"
            write_recording(rec, out / rel)
            forgeries.append({"path": rel, "forger_id": rec.forger_id})
        entries.append({"user_id": user.user_id, "genuine": genuine, "forgeries": forgeries})
    manifest = {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, "users": entries}
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_corpus(manifest_path, standard_shape: bool = False) -> SignatureCorpus:
    """Load every recording named by a manifest.

    All parse failures and shape violations are collected and raised together
    as :class:`CorpusError`.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise ManifestNotFound(f"corpus manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError([f"{path}: invalid JSON ({exc})"]) from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise CorpusError([f"{path}: not a {MANIFEST_FORMAT} manifest"])
    if manifest.get("version") != MANIFEST_VERSION:
        raise VersionMismatch(f"{path}: manifest version {manifest.get('version')}, supported {MANIFEST_VERSION}")
    root = path.parent
    problems: list[str] = []
    users = []
    seen_ids = set()
    for entry in manifest.get("users", []):
        uid = str(entry.get("user_id", ""))
        if not uid:
            problems.append("user entry without user_id")
            continue
        if uid in seen_ids:
            problems.append(f"user {uid}: duplicate user id")
            continue
        seen_ids.add(uid)
        genuine, forged = [], []
        for rel in entry.get("genuine", []):
            try:
                genuine.append(read_recording(root / rel, uid, Label.GENUINE))
            except (DataError, OSError) as exc:
                problems.append(f"{root / rel}: {exc}")
        for f in entry.get("forgeries", []):
            rel, forger = f.get("path"), f.get("forger_id")
            if not rel or not forger:
                problems.append(f"user {uid}: forgery entry needs path and forger_id")
                continue
            if str(forger) == uid:
                problems.append(f"user {uid}: forgery {rel} has forger_id equal to the user id")
                continue
            try:
                forged.append(read_recording(root / rel, uid, Label.FORGED, str(forger)))
            except (DataError, OSError) as exc:
                problems.append(f"{root / rel}: {exc}")
        users.append(UserRecord(uid, tuple(genuine), tuple(forged)))
    if not problems:
        corpus = SignatureCorpus(tuple(users))
        problems = corpus.shape_problems(standard_shape=standard_shape)
        if not problems:
            return corpus
    raise CorpusError(problems)


# ---------------------------------------------------------------- reference store

STORE_MAGIC = b"MSIGREF"
STORE_VERSION = 1


def content_hash(recordings: Sequence[SignatureRecording]) -> str:
    h = hashlib.sha256()
    for rec in recordings:
        h.update(struct.pack("<Qd", rec.n_samples, rec.sample_rate_hz))
        h.update(np.ascontiguousarray(rec.data, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class Enrollment:
    references: ReferenceSet
    enrolled_at: float
    content_hash: str


def _encode_store(entries: dict[str, Enrollment]) -> bytes:
    parts = [STORE_MAGIC, struct.pack("<HI", STORE_VERSION, len(entries))]
    for uid in sorted(entries):
        e = entries[uid]
        raw_id = uid.encode("utf-8")
        refs = e.references
        parts.append(struct.pack("<H", len(raw_id)) + raw_id)
        parts.append(struct.pack("<d", e.enrolled_at) + bytes.fromhex(e.content_hash))
        parts.append(struct.pack("<HI", refs.k, len(refs)))
        parts.append(np.ascontiguousarray(refs.stacked(), dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def _decode_store(raw: bytes) -> dict[str, Enrollment]:
    if len(raw) < len(STORE_MAGIC) + 10 or raw[: len(STORE_MAGIC)] != STORE_MAGIC:
        raise CorruptStoreFile("not a reference store (bad magic or too short)")
    version, n_users = struct.unpack_from("<HI", raw, len(STORE_MAGIC))
    if version != STORE_VERSION:
        raise UnsupportedVersion(f"reference store version {version}, supported {STORE_VERSION}")
    if zlib.crc32(raw[:-4]) != struct.unpack("<I", raw[-4:])[0]:
        raise CorruptStoreFile("reference store checksum mismatch (truncated or damaged)")
    pos = len(STORE_MAGIC) + 6
    entries = {}
    try:
        for _ in range(n_users):
            (id_len,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            uid = raw[pos : pos + id_len].decode("utf-8")
            pos += id_len
            (enrolled_at,) = struct.unpack_from("<d", raw, pos)
            digest = raw[pos + 8 : pos + 40].hex()
            pos += 40
            k, n_refs = struct.unpack_from("<HI", raw, pos)
            pos += 6
            count = n_refs * N_DIMS * k
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(n_refs, N_DIMS, k)
            pos += count * 8
            refs = tuple(CompressedSignature(a.astype(np.float64), uid, Label.GENUINE) for a in arr)
            entries[uid] = Enrollment(ReferenceSet(uid, refs), enrolled_at, digest)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CorruptStoreFile(f"malformed reference store: {exc}") from exc
    if pos != len(raw) - 4:
        raise CorruptStoreFile("trailing bytes in reference store")
    return entries


class ReferenceStore:
    """Persistent map from user id to preprocessed reference signatures.

    Updates rewrite the whole file through a temporary sibling and an atomic
    rename while holding an advisory lock, so readers always see either the
    old or the new snapshot.
    """

    def __init__(self, path, k: int = DEFAULT_K):
        self.path = Path(path)
        self.k = k
        self._lock = threading.RLock()
        self._entries: dict[str, Enrollment] = {}
        self.reload()

    def reload(self) -> None:
        with self._lock:
            self._mtime = self._disk_mtime()
            self._entries = self._read_disk()

    def refresh(self) -> None:
        """Reload only if another writer replaced the file since the last read."""
        if self._disk_mtime() != self._mtime:
            self.reload()

    def _disk_mtime(self):
        try:
            st = self.path.stat()
        except FileNotFoundError:
            return None
        return (st.st_mtime_ns, st.st_size, st.st_ino)

    def _read_disk(self) -> dict[str, Enrollment]:
        try:
            raw = self.path.read_bytes()
        except FileNotFoundError:
            return {}
        return _decode_store(raw)

    @contextlib.contextmanager
    def _write_lock(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lock_path = self.path.with_name(self.path.name + ".lock")
        with self._lock, open(lock_path, "a+b") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _commit(self, entries: dict[str, Enrollment]) -> None:
        tmp = self.path.with_name(f"{self.path.name}.{os.getpid()}.tmp")
        try:
            with open(tmp, "wb") as fh:
                fh.write(_encode_store(entries))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        finally:
            if tmp.exists():
                tmp.unlink()
        self._entries = entries
        self._mtime = self._disk_mtime()

    def __contains__(self, user_id) -> bool:
        return user_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def user_ids(self) -> list[str]:
        return sorted(self._entries)

    def entry(self, user_id: str) -> Enrollment:
        try:
            return self._entries[user_id]
        except KeyError:
            raise UnknownUser(f"user {user_id!r} is not enrolled") from None

    def get_references(self, user_id: str) -> ReferenceSet:
        return self.entry(user_id).references

    def enroll(
        self,
        user_id: str,
        recordings: Iterable[SignatureRecording],
        overwrite: bool = False,
        now: Optional[float] = None,
    ) -> bool:
        """Preprocess and store a user's references.

        Returns False when the identical recordings are already enrolled (no
        state change), True when the store was updated.
        """
        recordings = list(recordings)
        if not recordings:
            raise EmptyEnrollment(f"no reference recordings supplied for user {user_id!r}")
        if not user_id:
            raise DataError("user id must be non-empty")
        digest = content_hash(recordings)
        refs = []
        for rec in recordings:
            c = preprocess(rec, self.k)
            refs.append(CompressedSignature(c.coefficients, user_id, Label.GENUINE))
        with self._write_lock():
            entries = dict(self._read_disk())
            current = entries.get(user_id)
            if current is not None:
                if current.content_hash == digest:
                    self._entries = entries
                    return False
                if not overwrite:
                    raise UserAlreadyEnrolled(f"user {user_id!r} is already enrolled")
            entries[user_id] = Enrollment(
                ReferenceSet(user_id, tuple(refs)), time.time() if now is None else float(now), digest
            )
            self._commit(entries)
        return True


def enroll(store: ReferenceStore, user_id: str, recordings, overwrite: bool = False) -> ReferenceStore:
    store.enroll(user_id, recordings, overwrite=overwrite)
    return store


def get_references(store: ReferenceStore, user_id: str) -> ReferenceSet:
    return store.get_references(user_id)
