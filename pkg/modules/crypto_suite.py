"""
Keypairs, signatures and public-key encryption of shares.

A participant's identifier is the canonical encoding of its public key
material. Two interchangeable suites implement the same interface:

- Ed25519Suite: Ed25519 signatures; shares are encrypted with an ephemeral
  X25519 key agreement, HKDF-SHA256 and ChaCha20-Poly1305. The identifier
  carries both public keys (signing key first).
- KeyedHashSuite: a fast deterministic stand-in for protocol tests. It
  offers no security and must never be used outside simulations.

All randomness (key seeds, ephemeral keys, nonces) is drawn from a seeded
numpy Generator so that simulated runs are reproducible.
"""

import hashlib
import hmac
from dataclasses import dataclass, field
from typing import Dict

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from utils.config import DEFAULT_CRYPTO_SUITE


class CryptoError(Exception):
    """Base class for crypto suite failures."""


class DecryptionError(CryptoError):
    """Ciphertext does not open under the given key."""


class InvalidIdentifierError(CryptoError):
    """Bytes do not encode a well-formed public key."""


@dataclass(frozen=True)
class ParticipantId:
    """Canonical public-key bytes; equality is byte equality."""

    public_key_bytes: bytes

    def short(self) -> str:
        """Abbreviated hex form for logs and reports."""
        return self.public_key_bytes[:6].hex()

    def hex(self) -> str:
        return self.public_key_bytes.hex()


@dataclass(frozen=True)
class KeyPair:
    id: ParticipantId
    private_key: bytes = field(repr=False)


@dataclass(frozen=True)
class Ciphertext:
    recipient: ParticipantId
    blob: bytes


def _raw_public(key) -> bytes:
    return key.public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def _hkdf(shared: bytes, info: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=info).derive(shared)


class CryptoSuite:
    """Scheme-agnostic interface consumed by the protocol roles."""

    name = "abstract"

    def gen_keypair(self, randomness) -> KeyPair:
        raise NotImplementedError

    def is_valid_id(self, participant: ParticipantId) -> bool:
        raise NotImplementedError

    def sign(self, message: bytes, keypair: KeyPair) -> bytes:
        raise NotImplementedError

    def verify(self, message: bytes, signature: bytes, participant: ParticipantId) -> bool:
        raise NotImplementedError

    def encrypt(self, plaintext: bytes, recipient: ParticipantId, randomness) -> Ciphertext:
        raise NotImplementedError

    def decrypt(self, ciphertext: Ciphertext, keypair: KeyPair) -> bytes:
        raise NotImplementedError

    def min_blob_size(self) -> int:
        """Smallest syntactically possible ciphertext blob."""
        raise NotImplementedError


class Ed25519Suite(CryptoSuite):
    """Ed25519 signatures with X25519/ChaCha20-Poly1305 share encryption."""

    name = "ed25519"
    KEY_SIZE = 32
    NONCE_SIZE = 12
    TAG_SIZE = 16
    INFO = b"referendum-share-v1"

    def gen_keypair(self, randomness) -> KeyPair:
        # 64 seeded bytes: signing seed then encryption seed
        seed = bytes(randomness.bytes(2 * self.KEY_SIZE))
        signing = Ed25519PrivateKey.from_private_bytes(seed[: self.KEY_SIZE])
        encryption = X25519PrivateKey.from_private_bytes(seed[self.KEY_SIZE:])
        participant = ParticipantId(_raw_public(signing.public_key()) + _raw_public(encryption.public_key()))
        return KeyPair(participant, seed)

    def _split_id(self, participant: ParticipantId):
        raw = participant.public_key_bytes
        if len(raw) != 2 * self.KEY_SIZE:
            raise InvalidIdentifierError(f"Identifier must be {2 * self.KEY_SIZE} bytes, got {len(raw)}")
        try:
            return (
                Ed25519PublicKey.from_public_bytes(raw[: self.KEY_SIZE]),
                X25519PublicKey.from_public_bytes(raw[self.KEY_SIZE:]),
            )
        except ValueError as e:
            raise InvalidIdentifierError(str(e))

    def is_valid_id(self, participant: ParticipantId) -> bool:
        try:
            self._split_id(participant)
            return True
        except InvalidIdentifierError:
            return False

    def sign(self, message: bytes, keypair: KeyPair) -> bytes:
        signing = Ed25519PrivateKey.from_private_bytes(keypair.private_key[: self.KEY_SIZE])
        return signing.sign(message)

    def verify(self, message: bytes, signature: bytes, participant: ParticipantId) -> bool:
        try:
            public, _ = self._split_id(participant)
            public.verify(signature, message)
            return True
        except (InvalidSignature, InvalidIdentifierError, ValueError, TypeError):
            return False

    def encrypt(self, plaintext: bytes, recipient: ParticipantId, randomness) -> Ciphertext:
        _, recipient_key = self._split_id(recipient)
        # Fresh ephemeral key per share
        ephemeral = X25519PrivateKey.from_private_bytes(bytes(randomness.bytes(self.KEY_SIZE)))
        nonce = bytes(randomness.bytes(self.NONCE_SIZE))
        ephemeral_public = _raw_public(ephemeral.public_key())
        key = _hkdf(ephemeral.exchange(recipient_key), self.INFO)
        # The ephemeral public key is bound as associated data
        sealed = ChaCha20Poly1305(key).encrypt(nonce, plaintext, ephemeral_public)
        return Ciphertext(recipient, ephemeral_public + nonce + sealed)

    def decrypt(self, ciphertext: Ciphertext, keypair: KeyPair) -> bytes:
        blob = ciphertext.blob
        if len(blob) < self.min_blob_size():
            raise DecryptionError(f"Ciphertext too short ({len(blob)} bytes)")
        # ephemeral key || nonce || ciphertext+tag
        ephemeral_public = blob[: self.KEY_SIZE]
        nonce = blob[self.KEY_SIZE: self.KEY_SIZE + self.NONCE_SIZE]
        sealed = blob[self.KEY_SIZE + self.NONCE_SIZE:]
        try:
            own = X25519PrivateKey.from_private_bytes(keypair.private_key[self.KEY_SIZE:])
            key = _hkdf(own.exchange(X25519PublicKey.from_public_bytes(ephemeral_public)), self.INFO)
            return ChaCha20Poly1305(key).decrypt(nonce, sealed, ephemeral_public)
        except (InvalidTag, ValueError) as e:
            raise DecryptionError(f"Ciphertext does not open under this key: {type(e).__name__}")

    def min_blob_size(self) -> int:
        return self.KEY_SIZE + self.NONCE_SIZE + self.TAG_SIZE


class KeyedHashSuite(CryptoSuite):
    """
    Deterministic test double: keyed MAC signatures, HMAC keystream encryption.

    The identifier is a hash of the private key and doubles as the MAC key,
    so anyone can forge; only the verify/decrypt contracts are modelled.
    """

    name = "keyed-hash"
    KEY_SIZE = 32
    NONCE_SIZE = 16
    TAG_SIZE = 16
    ID_PREFIX = b"KH1"

    def gen_keypair(self, randomness) -> KeyPair:
        private = bytes(randomness.bytes(self.KEY_SIZE))
        return KeyPair(ParticipantId(self._derive_id(private)), private)

    def _derive_id(self, private: bytes) -> bytes:
        return self.ID_PREFIX + hashlib.sha256(b"id" + private).digest()

    def is_valid_id(self, participant: ParticipantId) -> bool:
        raw = participant.public_key_bytes
        return len(raw) == len(self.ID_PREFIX) + 32 and raw.startswith(self.ID_PREFIX)

    def sign(self, message: bytes, keypair: KeyPair) -> bytes:
        return hmac.new(keypair.id.public_key_bytes, message, hashlib.sha256).digest()

    def verify(self, message: bytes, signature: bytes, participant: ParticipantId) -> bool:
        if not self.is_valid_id(participant) or not isinstance(signature, (bytes, bytearray)):
            return False
        expected = hmac.new(participant.public_key_bytes, message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, bytes(signature))

    def _keystream(self, key: bytes, nonce: bytes, length: int) -> bytes:
        stream = b""
        counter = 0
        while len(stream) < length:
            stream += hmac.new(key, nonce + counter.to_bytes(4, "big"), hashlib.sha256).digest()
            counter += 1
        return stream[:length]

    def _tag(self, key: bytes, nonce: bytes, body: bytes) -> bytes:
        return hmac.new(key, b"tag" + nonce + body, hashlib.sha256).digest()[: self.TAG_SIZE]

    def encrypt(self, plaintext: bytes, recipient: ParticipantId, randomness) -> Ciphertext:
        if not self.is_valid_id(recipient):
            raise InvalidIdentifierError("Recipient is not a keyed-hash identifier")
        key = recipient.public_key_bytes
        nonce = bytes(randomness.bytes(self.NONCE_SIZE))
        body = bytes(a ^ b for a, b in zip(plaintext, self._keystream(key, nonce, len(plaintext))))
        return Ciphertext(recipient, nonce + body + self._tag(key, nonce, body))

    def decrypt(self, ciphertext: Ciphertext, keypair: KeyPair) -> bytes:
        blob = ciphertext.blob
        if len(blob) < self.min_blob_size():
            raise DecryptionError(f"Ciphertext too short ({len(blob)} bytes)")
        key = keypair.id.public_key_bytes
        nonce, body, tag = blob[: self.NONCE_SIZE], blob[self.NONCE_SIZE: -self.TAG_SIZE], blob[-self.TAG_SIZE:]
        if not hmac.compare_digest(tag, self._tag(key, nonce, body)):
            raise DecryptionError("Authentication tag mismatch")
        return bytes(a ^ b for a, b in zip(body, self._keystream(key, nonce, len(body))))

    def min_blob_size(self) -> int:
        return self.NONCE_SIZE + self.TAG_SIZE


_SUITES: Dict[str, CryptoSuite] = {
    Ed25519Suite.name: Ed25519Suite(),
    KeyedHashSuite.name: KeyedHashSuite(),
}


def available_suites() -> list:
    return sorted(_SUITES)


def get_suite(name: str = DEFAULT_CRYPTO_SUITE) -> CryptoSuite:
    """Look up a crypto suite by name."""
    try:
        return _SUITES[name]
    except KeyError:
        raise ValueError(f"Unknown crypto suite '{name}' (available: {', '.join(available_suites())})")
