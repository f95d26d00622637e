"""
Message schemas (b, s, r, c), canonical serialization and syntax checks.

Wire format of every message, fields in this order:

    tag         1 byte   b'b' | b's' | b'r' | b'c'
    sender      u16 length + public key bytes
    recipient   u16 length + public key bytes      (s only)
    payload     u32 length + variant payload
    signature   u16 length + signature bytes

The signature covers every preceding byte. Integers inside payloads are
encoded as u8 length + minimal big-endian bytes (zero is the empty string).
"""

import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import ClassVar, Dict, Optional, Tuple, Union

from modules.crypto_suite import CryptoSuite, KeyPair, ParticipantId
from modules.field_sss import FieldElement, SharingError, SharingParams, Share, check_modulus


class MessageKind(Enum):
    INIT = b"b"
    VOTE_SHARE = b"s"
    RESULT_SHARE = b"r"
    CHECKSUM_SHARE = b"c"

    @property
    def label(self) -> str:
        return self.value.decode("ascii")

    @property
    def is_broadcast(self) -> bool:
        return self is not MessageKind.VOTE_SHARE


class SyntaxErrorReason(Enum):
    UNKNOWN_TAG = "unknown tag"
    MISSING_FIELD = "missing field"
    BAD_LENGTH = "bad length"
    UNDECODABLE_PAYLOAD = "undecodable payload"


class MessageSyntaxError(ValueError):
    """Bytes do not form a valid message; reason is machine readable."""

    def __init__(self, reason: SyntaxErrorReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


class ParamsError(ValueError):
    """Referendum parameters violate their invariants."""


class _Writer:
    def __init__(self):
        self._parts = []

    def raw(self, data: bytes) -> "_Writer":
        self._parts.append(bytes(data))
        return self

    def u8(self, value: int) -> "_Writer":
        return self.raw(struct.pack(">B", value))

    def u16(self, value: int) -> "_Writer":
        return self.raw(struct.pack(">H", value))

    def u32(self, value: int) -> "_Writer":
        return self.raw(struct.pack(">I", value))

    def u64(self, value: int) -> "_Writer":
        return self.raw(struct.pack(">Q", value))

    def bytes16(self, data: bytes) -> "_Writer":
        return self.u16(len(data)).raw(data)

    def bytes32(self, data: bytes) -> "_Writer":
        return self.u32(len(data)).raw(data)

    def integer(self, value: int) -> "_Writer":
        if value < 0:
            raise ValueError(f"Cannot encode negative integer {value}")
        data = value.to_bytes((value.bit_length() + 7) // 8, "big")
        return self.u8(len(data)).raw(data)

    def text(self, value: str) -> "_Writer":
        return self.bytes32(value.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class _Reader:
    """Cursor over a byte string; errors carry the syntax reason to report."""

    def __init__(self, data: bytes, short_reason: SyntaxErrorReason = SyntaxErrorReason.BAD_LENGTH):
        self._data = bytes(data)
        self._pos = 0
        self._short_reason = short_reason

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def take(self, size: int, what: str) -> bytes:
        if size > self.remaining:
            raise MessageSyntaxError(self._short_reason, f"{what}: need {size} bytes, {self.remaining} left")
        chunk = self._data[self._pos: self._pos + size]
        self._pos += size
        return chunk

    def field_start(self, what: str):
        # Field entirely absent: nothing left where the field should begin
        if self.remaining == 0:
            raise MessageSyntaxError(SyntaxErrorReason.MISSING_FIELD, what)

    def u8(self, what: str) -> int:
        return struct.unpack(">B", self.take(1, what))[0]

    def u16(self, what: str) -> int:
        return struct.unpack(">H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack(">Q", self.take(8, what))[0]

    def bytes16(self, what: str) -> bytes:
        return self.take(self.u16(what), what)

    def bytes32(self, what: str) -> bytes:
        return self.take(self.u32(what), what)

    def integer(self, what: str) -> int:
        data = self.take(self.u8(what), what)
        if data[:1] == b"\x00":
            raise MessageSyntaxError(self._short_reason, f"{what}: non-minimal integer encoding")
        return int.from_bytes(data, "big")

    def text(self, what: str) -> str:
        try:
            return self.bytes32(what).decode("utf-8")
        except UnicodeDecodeError:
            raise MessageSyntaxError(SyntaxErrorReason.UNDECODABLE_PAYLOAD, f"{what}: not UTF-8")

    def end(self, what: str):
        if self.remaining:
            raise MessageSyntaxError(self._short_reason, f"{self.remaining} trailing bytes after {what}")


@dataclass(frozen=True)
class ReferendumParams:
    """
    Static referendum parameters published once by the initiator.

    share_affiliation[j] is the evaluation point of worker j (0-based
    position in workers).
    """

    voters: Tuple[ParticipantId, ...]
    workers: Tuple[ParticipantId, ...]
    share_affiliation: Tuple[int, ...]
    context_text: str
    option_map: Dict[int, str]
    q12: int
    q23: int
    q34: int
    threshold: int
    modulus: int

    def __post_init__(self):
        problems = []
        voter_set = set(self.voters)
        if len(voter_set) != len(self.voters):
            problems.append("voter ids must be distinct")
        if len(set(self.workers)) != len(self.workers):
            problems.append("worker ids must be distinct")
        if not set(self.workers) <= voter_set:
            problems.append("every worker must also be a registered voter")
        if self.threshold < 2:
            problems.append(f"threshold must be at least 2, got {self.threshold}")
        if len(self.workers) < 2 * self.threshold - 1:
            problems.append(f"{len(self.workers)} workers < 2t-1 = {2 * self.threshold - 1}")
        if len(self.share_affiliation) != len(self.workers):
            problems.append("share affiliation must name one evaluation point per worker")
        if not self.q12 < self.q23 < self.q34:
            problems.append(f"deadlines must satisfy q12 < q23 < q34, got {self.q12}, {self.q23}, {self.q34}")
        if self.q12 < 0:
            problems.append("deadlines must be non-negative")
        if set(self.option_map) != {1, -1}:
            problems.append("option map must label exactly +1 and -1")
        try:
            check_modulus(self.modulus, max(len(self.voters), 1))
            self.sharing_params()
        except SharingError as e:
            problems.append(str(e))
        if problems:
            raise ParamsError("; ".join(problems))

    @property
    def k(self) -> int:
        return len(self.voters)

    @property
    def n(self) -> int:
        return len(self.workers)

    def sharing_params(self) -> SharingParams:
        return SharingParams(
            self.threshold,
            len(self.workers),
            self.modulus,
            tuple(FieldElement.of(x, self.modulus) for x in self.share_affiliation),
        )

    def worker_position(self, participant: ParticipantId) -> Optional[int]:
        try:
            return self.workers.index(participant)
        except ValueError:
            return None

    def eval_point_of(self, participant: ParticipantId) -> Optional[FieldElement]:
        position = self.worker_position(participant)
        if position is None:
            return None
        return FieldElement.of(self.share_affiliation[position], self.modulus)

    def check_role_isolation(self, initiator: ParticipantId):
        if initiator in set(self.voters):
            raise ParamsError("initiator must not be a registered voter")

    def encode(self) -> bytes:
        writer = _Writer().integer(self.modulus).u16(self.threshold)
        writer.u64(self.q12).u64(self.q23).u64(self.q34)
        writer.text(self.context_text).text(self.option_map[1]).text(self.option_map[-1])
        # Voter list, then workers with their evaluation points
        writer.u32(len(self.voters))
        for voter in self.voters:
            writer.bytes16(voter.public_key_bytes)
        writer.u32(len(self.workers))
        for worker, x in zip(self.workers, self.share_affiliation):
            writer.bytes16(worker.public_key_bytes).integer(x)
        return writer.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "ReferendumParams":
        reader = _Reader(data, SyntaxErrorReason.UNDECODABLE_PAYLOAD)
        modulus = reader.integer("modulus")
        threshold = reader.u16("threshold")
        q12, q23, q34 = reader.u64("q12"), reader.u64("q23"), reader.u64("q34")
        context = reader.text("context")
        options = {1: reader.text("option +1"), -1: reader.text("option -1")}
        voters = tuple(ParticipantId(reader.bytes16("voter")) for _ in range(reader.u32("voter count")))
        workers, affiliation = [], []
        for _ in range(reader.u32("worker count")):
            workers.append(ParticipantId(reader.bytes16("worker")))
            affiliation.append(reader.integer("eval point"))
        reader.end("params")
        try:
            return cls(voters, tuple(workers), tuple(affiliation), context, options,
                       q12, q23, q34, threshold, modulus)
        except (ParamsError, SharingError) as e:
            raise MessageSyntaxError(SyntaxErrorReason.UNDECODABLE_PAYLOAD, f"invalid params: {e}")


def encode_share(share: Share) -> bytes:
    return (_Writer().integer(share.modulus).integer(share.eval_point.value).integer(share.value.value)
            .u16(share.degree_hint).u8(share.power).getvalue())


def decode_share(data: bytes) -> Share:
    reader = _Reader(data, SyntaxErrorReason.UNDECODABLE_PAYLOAD)
    modulus = reader.integer("modulus")
    x, y = reader.integer("eval point"), reader.integer("value")
    degree_hint, power = reader.u16("degree"), reader.u8("power")
    reader.end("share")
    try:
        return Share(FieldElement(x, modulus), FieldElement(y, modulus), degree_hint, power)
    except SharingError as e:
        raise MessageSyntaxError(SyntaxErrorReason.UNDECODABLE_PAYLOAD, f"invalid share: {e}")


@dataclass(frozen=True)
class Envelope:
    """
    Wire-level view of a message: header fields and raw payload bytes.

    recipient is None for broadcast kinds; for s an empty recipient means
    the field was left blank.
    """

    kind: MessageKind
    sender: bytes
    recipient: Optional[bytes]
    payload: bytes
    signature: bytes = b""

    def signed_bytes(self) -> bytes:
        writer = _Writer().raw(self.kind.value).bytes16(self.sender)
        if not self.kind.is_broadcast:
            writer.bytes16(self.recipient or b"")
        return writer.bytes32(self.payload).getvalue()

    def to_bytes(self) -> bytes:
        return self.signed_bytes() + _Writer().bytes16(self.signature).getvalue()

    @property
    def sender_id(self) -> ParticipantId:
        return ParticipantId(self.sender)

    @property
    def recipient_id(self) -> Optional[ParticipantId]:
        return ParticipantId(self.recipient) if self.recipient else None


@dataclass(frozen=True, kw_only=True)
class Message:
    """Common header of the four typed message variants."""

    KIND: ClassVar[MessageKind]

    sender: ParticipantId
    signature: bytes = field(default=b"", repr=False)

    @property
    def kind(self) -> MessageKind:
        return self.KIND

    @property
    def recipient(self) -> Optional[ParticipantId]:
        return None

    def payload_bytes(self) -> bytes:
        raise NotImplementedError

    def envelope(self) -> Envelope:
        recipient = None if self.KIND.is_broadcast else self.recipient.public_key_bytes
        return Envelope(self.KIND, self.sender.public_key_bytes, recipient, self.payload_bytes(), self.signature)

    def signed_bytes(self) -> bytes:
        return self.envelope().signed_bytes()


@dataclass(frozen=True, kw_only=True)
class InitBroadcast(Message):
    KIND: ClassVar[MessageKind] = MessageKind.INIT
    params: ReferendumParams

    def payload_bytes(self) -> bytes:
        return self.params.encode()


@dataclass(frozen=True, kw_only=True)
class VoteShare(Message):
    KIND: ClassVar[MessageKind] = MessageKind.VOTE_SHARE
    to: ParticipantId
    ciphertext: bytes

    @property
    def recipient(self) -> Optional[ParticipantId]:
        return self.to

    def payload_bytes(self) -> bytes:
        return _Writer().bytes16(self.ciphertext).getvalue()


@dataclass(frozen=True, kw_only=True)
class ResultShare(Message):
    KIND: ClassVar[MessageKind] = MessageKind.RESULT_SHARE
    share: Share

    def payload_bytes(self) -> bytes:
        return encode_share(self.share)


@dataclass(frozen=True, kw_only=True)
class ChecksumShare(Message):
    KIND: ClassVar[MessageKind] = MessageKind.CHECKSUM_SHARE
    share: Share

    def payload_bytes(self) -> bytes:
        return encode_share(self.share)


AnyMessage = Union[Message, Envelope]


def serialize_canonical(message: AnyMessage) -> bytes:
    """Canonical bytes of a typed message or a raw envelope."""
    if isinstance(message, Message):
        return message.envelope().to_bytes()
    return message.to_bytes()


def parse_envelope(data: bytes) -> Envelope:
    """
    Decode the wire framing without interpreting the payload.

    Raises:
        MessageSyntaxError: unknown tag, absent field, inconsistent lengths
    """
    reader = _Reader(data)
    reader.field_start("tag")
    tag = reader.take(1, "tag")
    try:
        kind = MessageKind(tag)
    except ValueError:
        raise MessageSyntaxError(SyntaxErrorReason.UNKNOWN_TAG, repr(tag))
    reader.field_start("sender")
    sender = reader.bytes16("sender")
    # Only vote shares carry a recipient
    recipient = None
    if not kind.is_broadcast:
        reader.field_start("recipient")
        recipient = reader.bytes16("recipient")
    reader.field_start("payload")
    payload = reader.bytes32("payload")
    reader.field_start("signature")
    signature = reader.bytes16("signature")
    reader.end("signature")
    return Envelope(kind, sender, recipient, payload, signature)


def decode_envelope(envelope: Envelope, suite: Optional[CryptoSuite] = None) -> Message:
    """
    Interpret an envelope's payload as its typed variant.

    Args:
        envelope: Parsed framing
        suite: When given, vote-share ciphertexts shorter than the suite's
            minimum are rejected as undecodable

    Raises:
        MessageSyntaxError: missing mandatory meta-information or undecodable payload
    """
    if not envelope.sender:
        raise MessageSyntaxError(SyntaxErrorReason.MISSING_FIELD, "sender")
    if not envelope.signature:
        raise MessageSyntaxError(SyntaxErrorReason.MISSING_FIELD, "signature")
    sender = ParticipantId(envelope.sender)
    kind = envelope.kind

    if kind is MessageKind.INIT:
        return InitBroadcast(sender=sender, params=ReferendumParams.decode(envelope.payload),
                             signature=envelope.signature)
    if kind is MessageKind.VOTE_SHARE:
        if not envelope.recipient:
            raise MessageSyntaxError(SyntaxErrorReason.MISSING_FIELD, "recipient")
        reader = _Reader(envelope.payload, SyntaxErrorReason.UNDECODABLE_PAYLOAD)
        blob = reader.bytes16("ciphertext")
        reader.end("ciphertext")
        if not blob or (suite is not None and len(blob) < suite.min_blob_size()):
            raise MessageSyntaxError(SyntaxErrorReason.UNDECODABLE_PAYLOAD, f"ciphertext of {len(blob)} bytes")
        return VoteShare(sender=sender, to=ParticipantId(envelope.recipient), ciphertext=blob,
                         signature=envelope.signature)

    # r and c: the power must match the tag
    share = decode_share(envelope.payload)
    if kind is MessageKind.RESULT_SHARE:
        if share.power != 1:
            raise MessageSyntaxError(SyntaxErrorReason.UNDECODABLE_PAYLOAD, "result share must be linear")
        return ResultShare(sender=sender, share=share, signature=envelope.signature)
    if share.power != 2:
        raise MessageSyntaxError(SyntaxErrorReason.UNDECODABLE_PAYLOAD, "checksum share must be squared")
    return ChecksumShare(sender=sender, share=share, signature=envelope.signature)


def parse(data: bytes, suite: Optional[CryptoSuite] = None) -> Message:
    """Full syntactic parse of canonical bytes into a typed message."""
    return decode_envelope(parse_envelope(data), suite)


def make_signed(message: Message, keypair: KeyPair, suite: CryptoSuite,
                forged_sender: Optional[ParticipantId] = None) -> Message:
    """
    Sign a message with the keypair's private key.

    The sender field is set to the keypair's id unless forged_sender is given;
    a forged sender keeps the signer's own signature, so it never verifies.
    """
    unsigned = replace(message, sender=forged_sender or keypair.id, signature=b"")
    return replace(unsigned, signature=suite.sign(unsigned.signed_bytes(), keypair))


def verify_signature(message: Message, suite: CryptoSuite) -> bool:
    """True iff the signature verifies against the claimed sender."""
    return suite.verify(message.signed_bytes(), message.signature, message.sender)
