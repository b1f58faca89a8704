"""Crypto kernel tests.

The Shamir checks are validated against an independent brute-force Lagrange
oracle written here in the test module, not against the library's own
interpolation path.
"""

import itertools
from random import Random

import pytest

from tidsim.crypto import (
    AuthenticationError,
    InsufficientSharesError,
    Onion,
    OnionStateError,
    ParameterError,
    Share,
    Signature,
    SMALL_TEST_PRIME,
    VerificationError,
    ecies_decrypt,
    ecies_encrypt,
    encode_parts,
    hash256,
    keypair_from_scalar,
    keypair_gen,
    new_secret_key,
    onion_peel,
    onion_wrap,
    recover_signer,
    sign,
    ss_restore,
    ss_split,
    sym_decrypt,
    sym_encrypt,
)

# SHA3-256 golden values, pinned from hashlib on first computation.
SHA3_256_EMPTY = "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"
SHA3_256_ABC = "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532"


def oracle_lagrange_at_zero(points, prime):
    """Independent Lagrange interpolation oracle (plain egcd arithmetic)."""

    def egcd(a, b):
        if b == 0:
            return a, 1, 0
        g, x, y = egcd(b, a % b)
        return g, y, x - (a // b) * y

    def inv(a):
        g, x, _ = egcd(a % prime, prime)
        assert g == 1
        return x % prime

    total = 0
    for xi, yi in points:
        term = yi
        for xj, _ in points:
            if xj == xi:
                continue
            term = term * ((-xj) % prime) % prime
            term = term * inv((xi - xj) % prime) % prime
        total = (total + term) % prime
    return total


class FixedRandom:
    """Duck-typed random source that replays a pinned list of randrange results."""

    def __init__(self, values):
        self._values = list(values)

    def randrange(self, *args, **kwargs):
        return self._values.pop(0)


class TestHash:
    def test_deterministic(self):
        rng = Random(7)
        for _ in range(50):
            data = rng.randbytes(rng.randrange(0, 200))
            assert hash256(data) == hash256(data)
            assert len(hash256(data)) == 32

    def test_golden_values(self):
        assert hash256(b"").hex() == SHA3_256_EMPTY
        assert hash256(b"abc").hex() == SHA3_256_ABC

    def test_extension_changes_digest(self):
        # small brute-force collision scan: x vs x || 0x00
        rng = Random(11)
        for _ in range(1000):
            x = rng.randbytes(rng.randrange(0, 64))
            assert hash256(x) != hash256(x + b"\x00")

    def test_encode_parts_unambiguous(self):
        assert encode_parts(b"ab", b"c") != encode_parts(b"a", b"bc")
        assert encode_parts(1, b"x") != encode_parts(b"x", 1)


class TestKeyPairs:
    def test_same_seed_same_keypair(self):
        assert keypair_gen(Random(42)) == keypair_gen(Random(42))

    def test_address_is_20_bytes(self):
        kp = keypair_gen(Random(1))
        assert len(kp.address) == 20
        assert kp.address == hash256(kp.pubkey)[-20:]

    def test_seed_collision_scan(self):
        addresses = set()
        rng = Random(99)
        for _ in range(10_000):
            addresses.add(keypair_from_scalar(1 + rng.randrange(2**250)).address)
        assert len(addresses) == 10_000

    def test_scalar_bounds(self):
        with pytest.raises(ParameterError):
            keypair_from_scalar(0)


class TestSignatures:
    def test_round_trip_fuzz(self):
        rng = Random(3)
        for _ in range(1000):
            kp = keypair_gen(rng)
            digest = rng.randbytes(32)
            sig = sign(kp.privkey, digest)
            assert recover_signer(digest, sig) == kp.address

    def test_tampered_digest_fuzz(self):
        rng = Random(5)
        kp = keypair_gen(rng)
        for _ in range(1000):
            digest = rng.randbytes(32)
            sig = sign(kp.privkey, digest)
            tampered = bytearray(digest)
            tampered[rng.randrange(32)] ^= 1 + rng.randrange(255)
            try:
                recovered = recover_signer(bytes(tampered), sig)
            except VerificationError:
                continue
            assert recovered != kp.address

    def test_two_signers_distinct(self):
        rng = Random(8)
        a, b = keypair_gen(rng), keypair_gen(rng)
        digest = hash256(b"shared message")
        assert recover_signer(digest, sign(a.privkey, digest)) != recover_signer(
            digest, sign(b.privkey, digest)
        )

    def test_malformed_signature_rejected(self):
        digest = hash256(b"m")
        with pytest.raises(VerificationError):
            recover_signer(digest, Signature(v=2, r=1, s=1))
        with pytest.raises(VerificationError):
            recover_signer(digest, Signature(v=0, r=0, s=1))
        with pytest.raises(VerificationError):
            Signature.from_bytes(b"\x00" * 10)

    def test_signature_bytes_round_trip(self):
        sig = sign(keypair_gen(Random(2)).privkey, hash256(b"x"))
        assert Signature.from_bytes(sig.to_bytes()) == sig


class TestSymmetric:
    def test_round_trip(self):
        rng = Random(21)
        key = new_secret_key(rng)
        msg = b"the pending information"
        assert sym_decrypt(key, sym_encrypt(key, msg, rng)) == msg

    def test_wrong_key_fails(self):
        rng = Random(22)
        key, other = new_secret_key(rng), new_secret_key(rng)
        blob = sym_encrypt(key, b"secret", rng)
        with pytest.raises(AuthenticationError):
            sym_decrypt(other, blob)

    def test_tamper_fails(self):
        rng = Random(23)
        key = new_secret_key(rng)
        blob = bytearray(sym_encrypt(key, b"secret", rng))
        blob[-1] ^= 0xFF
        with pytest.raises(AuthenticationError):
            sym_decrypt(key, bytes(blob))

    def test_ciphertext_differs_from_plaintext(self):
        rng = Random(24)
        key = new_secret_key(rng)
        msg = b"plaintext bytes"
        assert msg not in sym_encrypt(key, msg, rng)


class TestEcies:
    def test_round_trip(self):
        rng = Random(31)
        kp = keypair_gen(rng)
        blob = ecies_encrypt(kp.pubkey, b"layer data", rng)
        assert ecies_decrypt(kp.privkey, blob) == b"layer data"

    def test_wrong_privkey_fails(self):
        rng = Random(32)
        kp, other = keypair_gen(rng), keypair_gen(rng)
        blob = ecies_encrypt(kp.pubkey, b"layer data", rng)
        with pytest.raises(AuthenticationError):
            ecies_decrypt(other.privkey, blob)


class TestSecretSharing:
    def test_degree_zero_split(self):
        shares = ss_split(42, t=1, n=3, rng=Random(0), prime=SMALL_TEST_PRIME)
        assert [s.value for s in shares] == [42, 42, 42]

    def test_pinned_coefficients_match_hand_oracle(self):
        # polynomial 42 + 113*x over GF(257), coefficient pinned via fake rng
        shares = ss_split(42, t=2, n=3, rng=FixedRandom([113]), prime=257)
        expected = [(x, (42 + 113 * x) % 257) for x in (1, 2, 3)]
        assert [(s.index, s.value) for s in shares] == expected
        # every 2-subset interpolates back to 42 under the independent oracle
        for pair in itertools.combinations(expected, 2):
            assert oracle_lagrange_at_zero(pair, 257) == 42

    def test_exhaustive_subset_identity_small_field(self):
        rng = Random(77)
        for n in range(1, 7):
            for t in range(1, n + 1):
                secret = rng.randrange(SMALL_TEST_PRIME)
                shares = ss_split(secret, t, n, rng, prime=SMALL_TEST_PRIME)
                for size in range(t, n + 1):
                    for subset in itertools.combinations(shares, size):
                        assert ss_restore(subset, t, prime=SMALL_TEST_PRIME, as_bytes=False) == secret
                        points = [(s.index, s.value) for s in subset[:t]]
                        assert oracle_lagrange_at_zero(points, SMALL_TEST_PRIME) == secret

    def test_full_field_round_trip(self):
        rng = Random(55)
        key = new_secret_key(rng)
        shares = ss_split(key, t=4, n=10, rng=rng)
        assert ss_restore(rng.sample(shares, 4), t=4) == key
        assert ss_restore(shares, t=4) == key

    def test_wrap_handles_secret_above_modulus(self):
        rng = Random(56)
        secret = 300  # above the small field modulus 257
        shares = ss_split(secret, t=2, n=4, rng=rng, prime=257)
        assert all(s.wrap == 1 for s in shares)
        assert ss_restore(shares[:2], t=2, prime=257, as_bytes=False) == 300

    def test_insufficient_shares_error(self):
        rng = Random(57)
        shares = ss_split(new_secret_key(rng), t=3, n=5, rng=rng)
        with pytest.raises(InsufficientSharesError):
            ss_restore(shares[:2], t=3)

    def test_under_threshold_subsets_miss_secret(self):
        # t=n=5: every 4-subset, interpolated as if t were 4, yields a wrong value
        rng = Random(58)
        secret = 123
        shares = ss_split(secret, t=5, n=5, rng=rng, prime=SMALL_TEST_PRIME)
        for subset in itertools.combinations(shares, 4):
            points = [(s.index, s.value) for s in subset]
            assert oracle_lagrange_at_zero(points, SMALL_TEST_PRIME) != secret

    def test_parameter_errors(self):
        rng = Random(59)
        with pytest.raises(ParameterError):
            ss_split(1, t=5, n=4, rng=rng)
        with pytest.raises(ParameterError):
            ss_split(1, t=0, n=4, rng=rng)
        shares = ss_split(9, t=2, n=3, rng=rng, prime=257)
        with pytest.raises(ParameterError):
            ss_restore([shares[0], shares[0]], t=2, prime=257)

    def test_shamir_invariant_up_to_8(self):
        rng = Random(60)
        key = new_secret_key(rng)
        for n in range(1, 9):
            for t in range(1, n + 1):
                shares = ss_split(key, t, n, rng)
                for subset in itertools.combinations(shares, t):
                    assert ss_restore(subset, t) == key


class TestOnions:
    def test_single_layer(self):
        rng = Random(71)
        kp = keypair_gen(rng)
        share = Share(index=1, value=12345)
        onion = onion_wrap(share, [kp.pubkey], rng)
        assert onion.layers_remaining == 1
        assert onion.layer_addrs == (kp.address,)
        peeled = onion_peel(onion, kp.privkey)
        assert peeled.layers_remaining == 0
        assert peeled.share() == share

    def test_three_layers_all_orderings(self):
        rng = Random(72)
        kps = [keypair_gen(rng) for _ in range(3)]
        share = Share(index=2, value=777)
        onion = onion_wrap(share, [kp.pubkey for kp in kps], rng)
        correct = (2, 1, 0)  # outermost layer is the last wrap key
        for order in itertools.permutations(range(3)):
            if order == correct:
                peeled = onion
                for i in order:
                    peeled = onion_peel(peeled, kps[i].privkey)
                assert peeled.share() == share
            else:
                peeled = onion
                with pytest.raises(AuthenticationError):
                    for i in order:
                        peeled = onion_peel(peeled, kps[i].privkey)

    @pytest.mark.parametrize("layers", [4, 5])
    def test_deeper_onions_round_trip(self, layers):
        rng = Random(73 + layers)
        kps = [keypair_gen(rng) for _ in range(layers)]
        share = Share(index=3, value=31337)
        onion = onion_wrap(share, [kp.pubkey for kp in kps], rng)
        peeled = onion
        for kp in reversed(kps):
            peeled = onion_peel(peeled, kp.privkey)
        assert peeled.layers_remaining == 0
        assert peeled.share() == share
        # one sampled wrong ordering fails
        wrong_first = kps[0] if layers > 1 else kps[-1]
        with pytest.raises(AuthenticationError):
            onion_peel(onion, wrong_first.privkey)

    def test_unrelated_key_fails(self):
        rng = Random(79)
        kp, stranger = keypair_gen(rng), keypair_gen(rng)
        onion = onion_wrap(Share(1, 5), [kp.pubkey], rng)
        with pytest.raises(AuthenticationError):
            onion_peel(onion, stranger.privkey)

    def test_peel_exhausted_onion(self):
        rng = Random(80)
        kp = keypair_gen(rng)
        peeled = onion_peel(onion_wrap(Share(1, 5), [kp.pubkey], rng), kp.privkey)
        with pytest.raises(OnionStateError):
            onion_peel(peeled, kp.privkey)

    def test_wire_round_trip_carries_no_holders(self):
        rng = Random(81)
        kps = [keypair_gen(rng) for _ in range(2)]
        onion = onion_wrap(Share(4, 9), [kp.pubkey for kp in kps], rng)
        wire = Onion.from_wire(onion.wire_bytes())
        assert wire.layers_remaining == 2
        assert wire.layer_addrs == ()
        for kp in reversed(kps):
            wire = onion_peel(wire, kp.privkey)
        assert wire.share() == Share(4, 9)


class TestDeterminism:
    def test_module_wide_byte_identity(self):
        def run(seed):
            rng = Random(seed)
            kp = keypair_gen(rng)
            key = new_secret_key(rng)
            shares = ss_split(key, 2, 3, rng)
            onion = onion_wrap(shares[0], [kp.pubkey], rng)
            sig = sign(kp.privkey, hash256(key))
            blob = sym_encrypt(key, b"payload", rng)
            return b"".join(
                [kp.privkey, kp.pubkey, key]
                + [s.to_bytes() for s in shares]
                + [onion.payload, sig.to_bytes(), blob]
            )

        assert run(1234) == run(1234)
        assert run(1234) != run(1235)
