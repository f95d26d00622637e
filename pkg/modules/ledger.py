"""
Append-only, hash-chained record store.

The ledger is the only channel between participants. It does not judge
content: any byte-serializable message is appended, filtering is left to
the verifier.

Canonical record bytes (the hashed range):

    seq        8 bytes big-endian
    prev_hash  32 bytes
    timestamp  8 bytes big-endian (logical tick)
    message    u32 length + canonical message bytes

record_hash = SHA-256(canonical record bytes). The backing store and the
dump keep each record as canonical bytes followed by its 32-byte hash;
a dump has one base64 line per record.
"""

import base64
import binascii
import hashlib
import struct
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Union

from modules.crypto_suite import ParticipantId
from modules.messages import AnyMessage, Envelope, MessageKind, MessageSyntaxError, parse_envelope, serialize_canonical
from utils.config import DIGEST_SIZE, ZERO_DIGEST
from utils.logger import get_logger

_HEADER = struct.Struct(">Q32sQI")


class LedgerError(RuntimeError):
    """Base class for ledger failures."""


class EncodingError(LedgerError):
    """Message cannot be turned into canonical bytes."""


class TamperDisabledError(LedgerError):
    """Tampering was requested on a ledger that does not allow it."""


class DumpFormatError(LedgerError):
    """A dump line is not a decodable record."""

    def __init__(self, line_number: int, detail: str):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class IntegrityKind(Enum):
    HASH_MISMATCH = "hash-mismatch"
    LINK_BROKEN = "link-broken"
    SEQ_GAP = "seq-gap"
    TRUNCATED = "truncated"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class IntegrityViolation:
    seq: int
    kind: IntegrityKind

    def describe(self) -> str:
        return f"{self.kind.value}@{self.seq}"


IntegrityResult = Optional[IntegrityViolation]


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class Record:
    seq: int
    prev_hash: bytes
    timestamp: int
    message: bytes
    record_hash: bytes

    @staticmethod
    def canonical_bytes(seq: int, prev_hash: bytes, timestamp: int, message: bytes) -> bytes:
        return _HEADER.pack(seq, prev_hash, timestamp, len(message)) + message

    def to_bytes(self) -> bytes:
        return self.canonical_bytes(self.seq, self.prev_hash, self.timestamp, self.message)

    def stored_bytes(self) -> bytes:
        return self.to_bytes() + self.record_hash

    @classmethod
    def from_stored(cls, stored: bytes) -> "Record":
        if len(stored) < _HEADER.size + DIGEST_SIZE:
            raise ValueError(f"record of {len(stored)} bytes is shorter than its header")
        seq, prev_hash, timestamp, length = _HEADER.unpack_from(stored)
        body = stored[_HEADER.size:]
        if len(body) != length + DIGEST_SIZE:
            raise ValueError(f"message length {length} does not match record size")
        return cls(seq, prev_hash, timestamp, body[:length], body[length:])

    def envelope(self) -> Optional[Envelope]:
        """Parsed framing of the message, or None when it does not parse."""
        try:
            return parse_envelope(self.message)
        except MessageSyntaxError:
            return None


class Ledger:
    """
    Hash-chained log with serialized appends.

    Tampering hooks exist for integrity tests only and are refused unless the
    ledger was created with allow_tamper=True.
    """

    def __init__(self, allow_tamper: bool = False):
        self.logger = get_logger()
        self._store: List[bytes] = []
        self._lock = threading.Lock()
        self._allow_tamper = allow_tamper

    def __len__(self) -> int:
        return len(self._store)

    @property
    def last_hash(self) -> bytes:
        if not self._store:
            return ZERO_DIGEST
        return self._store[-1][-DIGEST_SIZE:]

    def append(self, message: Union[AnyMessage, bytes], tick: int) -> int:
        """
        Persist a message as the next record.

        Args:
            message: Typed message, raw envelope or already-canonical bytes
            tick: Logical time of the append

        Returns:
            Sequence number of the new record
        """
        try:
            data = message if isinstance(message, (bytes, bytearray)) else serialize_canonical(message)
        except (ValueError, AttributeError, TypeError, struct.error) as e:
            raise EncodingError(f"Message cannot be serialized: {e}")
        if tick < 0:
            raise EncodingError(f"Negative tick {tick}")

        # seq, link and hash are assigned under one lock
        with self._lock:
            seq = len(self._store)
            prev_hash = self.last_hash
            canonical = Record.canonical_bytes(seq, prev_hash, tick, bytes(data))
            self._store.append(canonical + digest(canonical))
        self.logger.debug(f"Appended record {seq} at tick {tick} ({len(data)} bytes)")
        return seq

    def records(self) -> List[Record]:
        """Consistent snapshot of every record in seq order."""
        with self._lock:
            snapshot = list(self._store)
        return [Record.from_stored(stored) for stored in snapshot]

    def get(self, seq: int) -> Record:
        return Record.from_stored(self._store[seq])

    def query(self, kind: Optional[MessageKind] = None, sender: Optional[ParticipantId] = None,
              recipient: Optional[ParticipantId] = None, tick_from: Optional[int] = None,
              tick_to: Optional[int] = None) -> List[Record]:
        """
        Records matching every given filter, in seq order.

        Type, sender and recipient filters match on the message framing;
        records whose framing does not parse only match filter-free queries.
        tick_to is exclusive.
        """
        header_filter = kind is not None or sender is not None or recipient is not None
        result = []
        for record in self.records():
            if tick_from is not None and record.timestamp < tick_from:
                continue
            if tick_to is not None and record.timestamp >= tick_to:
                continue
            # Header filters need parsed framing
            if header_filter:
                envelope = record.envelope()
                if envelope is None:
                    continue
                if kind is not None and envelope.kind is not kind:
                    continue
                if sender is not None and envelope.sender != sender.public_key_bytes:
                    continue
                if recipient is not None and envelope.recipient != recipient.public_key_bytes:
                    continue
            result.append(record)
        return result

    def verify_integrity(self, expected_length: Optional[int] = None) -> IntegrityResult:
        """
        Recompute the chain.

        Args:
            expected_length: Last record count known to the client; a shorter
                chain is reported as truncated

        Returns:
            None when intact, otherwise the first violation found
        """
        with self._lock:
            snapshot = list(self._store)
        return verify_chain(snapshot, expected_length)

    def tamper_for_test(self, seq: int, mutation: Callable[[bytes], Optional[bytes]]):
        """
        Replace the stored bytes of one record, bypassing the append-only API.

        mutation receives the stored bytes and returns the replacement, or None
        to delete the record from the backing store.
        """
        if not self._allow_tamper:
            raise TamperDisabledError("Tampering is only available on test ledgers")
        with self._lock:
            replacement = mutation(self._store[seq])
            if replacement is None:
                del self._store[seq]
            else:
                self._store[seq] = bytes(replacement)
        self.logger.warning(f"Record {seq} tampered with for testing")

    def truncate_for_test(self, length: int):
        """Drop every record from position length on."""
        if not self._allow_tamper:
            raise TamperDisabledError("Tampering is only available on test ledgers")
        with self._lock:
            del self._store[length:]
        self.logger.warning(f"Ledger truncated to {length} records for testing")

    def dumps(self) -> str:
        """Newline-delimited base64 of every stored record."""
        with self._lock:
            snapshot = list(self._store)
        return "".join(base64.b64encode(stored).decode("ascii") + "\n" for stored in snapshot)

    def dump(self, path: Union[str, Path]):
        Path(path).write_text(self.dumps(), encoding="ascii", newline="\n")
        self.logger.info(f"Ledger dumped: {path} ({len(self)} records)")

    @classmethod
    def loads(cls, text: str, allow_tamper: bool = False) -> "Ledger":
        """
        Rebuild a ledger from dump text without re-hashing.

        The stored bytes are taken verbatim, so tampered dumps load and are
        exposed by verify_integrity; lines that are not base64 records raise
        DumpFormatError.
        """
        ledger = cls(allow_tamper=allow_tamper)
        for number, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                stored = base64.b64decode(line.strip(), validate=True)
                Record.from_stored(stored)
            except (binascii.Error, ValueError, struct.error) as e:
                raise DumpFormatError(number, str(e))
            ledger._store.append(stored)
        return ledger

    @classmethod
    def load(cls, path: Union[str, Path], allow_tamper: bool = False) -> "Ledger":
        try:
            text = Path(path).read_text(encoding="ascii")
        except UnicodeDecodeError as e:
            raise DumpFormatError(0, f"dump is not ASCII: {e}")
        return cls.loads(text, allow_tamper=allow_tamper)


def verify_chain(stored_records: List[bytes], expected_length: Optional[int] = None) -> IntegrityResult:
    """First integrity violation of a stored record list, or None."""
    prev_hash = ZERO_DIGEST
    for position, stored in enumerate(stored_records):
        try:
            record = Record.from_stored(stored)
        except (ValueError, struct.error):
            return IntegrityViolation(position, IntegrityKind.MALFORMED)
        if record.seq != position:
            return IntegrityViolation(position, IntegrityKind.SEQ_GAP)
        if digest(record.to_bytes()) != record.record_hash:
            return IntegrityViolation(position, IntegrityKind.HASH_MISMATCH)
        if record.prev_hash != prev_hash:
            return IntegrityViolation(position, IntegrityKind.LINK_BROKEN)
        prev_hash = record.record_hash
    # A valid but shorter chain only shows against a known length
    if expected_length is not None and len(stored_records) < expected_length:
        return IntegrityViolation(len(stored_records), IntegrityKind.TRUNCATED)
    return None
