import numpy as np
import pytest

from modules.crypto_suite import (
    Ciphertext,
    DecryptionError,
    InvalidIdentifierError,
    ParticipantId,
    available_suites,
    get_suite,
)

SUITES = ["ed25519", "keyed-hash"]


@pytest.fixture(params=SUITES)
def suite(request):
    return get_suite(request.param)


def test_available_suites():
    assert available_suites() == ["ed25519", "keyed-hash"]
    with pytest.raises(ValueError):
        get_suite("rsa")


def test_keypairs_from_different_seeds_differ(suite):
    a = suite.gen_keypair(np.random.default_rng(1))
    b = suite.gen_keypair(np.random.default_rng(2))
    assert a.id != b.id


def test_same_seed_same_keypair(suite):
    a = suite.gen_keypair(np.random.default_rng(5))
    b = suite.gen_keypair(np.random.default_rng(5))
    assert a == b


def test_hundred_distinct_ids(suite, rng):
    ids = {suite.gen_keypair(rng).id for _ in range(100)}
    assert len(ids) == 100
    assert all(suite.is_valid_id(i) for i in ids)


def test_private_key_not_in_repr(suite, rng):
    keypair = suite.gen_keypair(rng)
    assert keypair.private_key.hex() not in repr(keypair)


def test_sign_verify(suite, rng):
    alice, bob = suite.gen_keypair(rng), suite.gen_keypair(rng)
    message = b"referendum message"
    signature = suite.sign(message, alice)
    assert suite.verify(message, signature, alice.id)
    assert not suite.verify(message, signature, bob.id)


def test_every_byte_mutation_breaks_signature(suite, rng):
    keypair = suite.gen_keypair(rng)
    message = bytes(range(40))
    signature = suite.sign(message, keypair)
    for i in range(len(message)):
        mutated = bytearray(message)
        mutated[i] ^= 0xFF
        assert not suite.verify(bytes(mutated), signature, keypair.id)
    for i in range(len(signature)):
        mutated = bytearray(signature)
        mutated[i] ^= 0x01
        assert not suite.verify(message, bytes(mutated), keypair.id)


def test_verify_with_malformed_id(suite, rng):
    keypair = suite.gen_keypair(rng)
    signature = suite.sign(b"m", keypair)
    assert not suite.verify(b"m", signature, ParticipantId(b"short"))


def test_encrypt_decrypt(suite, rng):
    worker, other = suite.gen_keypair(rng), suite.gen_keypair(rng)
    ciphertext = suite.encrypt(b"share bytes", worker.id, rng)
    assert suite.decrypt(ciphertext, worker) == b"share bytes"
    with pytest.raises(DecryptionError):
        suite.decrypt(ciphertext, other)


def test_encryption_is_randomized(suite, rng):
    worker = suite.gen_keypair(rng)
    blobs = {suite.encrypt(b"same plaintext", worker.id, rng).blob for _ in range(100)}
    assert len(blobs) == 100


def test_short_blob_rejected(suite, rng):
    worker = suite.gen_keypair(rng)
    with pytest.raises(DecryptionError):
        suite.decrypt(Ciphertext(worker.id, b"\x00" * (suite.min_blob_size() - 1)), worker)


def test_tampered_blob_rejected(suite, rng):
    worker = suite.gen_keypair(rng)
    blob = bytearray(suite.encrypt(b"payload", worker.id, rng).blob)
    blob[-1] ^= 0x01
    with pytest.raises(DecryptionError):
        suite.decrypt(Ciphertext(worker.id, bytes(blob)), worker)


def test_encrypt_to_invalid_recipient(suite, rng):
    with pytest.raises(InvalidIdentifierError):
        suite.encrypt(b"x", ParticipantId(b"\x01\x02"), rng)


def test_ed25519_id_layout(ed_suite, rng):
    keypair = ed_suite.gen_keypair(rng)
    assert len(keypair.id.public_key_bytes) == 64
    assert ed_suite.min_blob_size() == 60


def test_default_suite_is_ed25519(rng):
    suite = get_suite()
    assert suite.name == "ed25519"
    keypair = suite.gen_keypair(rng)
    assert suite.verify(b"ballot", suite.sign(b"ballot", keypair), keypair.id)
