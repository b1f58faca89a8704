"""Cryptographic kernel for the delivery simulator.

Provides the five primitives every other module builds on: a 256-bit hash,
recoverable signatures with 20-byte address derivation, authenticated
symmetric encryption, threshold secret sharing over a prime field, and
layered public-key wrapping of shares ("onions").

Everything here is a pure function of its inputs plus an injected random
source, so two runs seeded identically produce byte-identical artifacts.
The curve is secp256k1 and the hash is SHA3-256; neither choice is relied
on for bit-compatibility with any particular blockchain, only for being a
real 256-bit cryptographic primitive with detectable tampering.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
from dataclasses import dataclass
from random import Random
from typing import Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

DIGEST_SIZE = 32
ADDRESS_SIZE = 20
KEY_SIZE = 32

__all__ = [
    "CryptoError",
    "VerificationError",
    "AuthenticationError",
    "ParameterError",
    "InsufficientSharesError",
    "OnionStateError",
    "KeyPair",
    "Signature",
    "Share",
    "Onion",
    "hash256",
    "encode_parts",
    "decode_parts",
    "keypair_gen",
    "keypair_from_scalar",
    "address_of_pubkey",
    "pubkey_of_privkey",
    "sign",
    "recover_signer",
    "new_secret_key",
    "sym_encrypt",
    "sym_decrypt",
    "ecies_encrypt",
    "ecies_decrypt",
    "ss_split",
    "ss_restore",
    "onion_wrap",
    "onion_peel",
    "DEFAULT_SHARE_PRIME",
    "SMALL_TEST_PRIME",
]


class CryptoError(Exception):
    """Base class for failures raised by this module."""


class VerificationError(CryptoError):
    """Signature recovery failed or recovered an impossible point."""


class AuthenticationError(CryptoError):
    """Authenticated decryption failed (wrong key or tampered data)."""


class ParameterError(CryptoError, ValueError):
    """Caller violated a documented precondition."""


class InsufficientSharesError(ParameterError):
    """Fewer shares supplied than the threshold requires."""


class OnionStateError(CryptoError):
    """Peel attempted on a fully unwrapped onion."""


def hash256(data: bytes) -> bytes:
    """256-bit hash of a byte string (SHA3-256)."""
    return hashlib.sha3_256(data).digest()


def encode_parts(*parts: bytes | int | str) -> bytes:
    """Canonical length-prefixed encoding of a tuple, for hashing/signing.

    Integers become 8-byte big-endian, strings UTF-8. The length prefix
    removes concatenation ambiguity between adjacent fields.
    """
    out = bytearray()
    for part in parts:
        if isinstance(part, int):
            if part < 0:
                raise ParameterError("cannot encode negative integers")
            raw = part.to_bytes(max(1, (part.bit_length() + 7) // 8), "big")
        elif isinstance(part, str):
            raw = part.encode("utf-8")
        elif isinstance(part, Signature):
            raw = part.to_bytes()
        else:
            raw = bytes(part)
        out += len(raw).to_bytes(4, "big")
        out += raw
    return bytes(out)


def decode_parts(data: bytes) -> list[bytes]:
    """Inverse of encode_parts (all fields come back as raw bytes)."""
    parts = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise ParameterError("truncated field length")
        size = int.from_bytes(data[offset : offset + 4], "big")
        offset += 4
        if offset + size > len(data):
            raise ParameterError("truncated field body")
        parts.append(data[offset : offset + size])
        offset += size
    return parts


# ---------------------------------------------------------------------------
# secp256k1 arithmetic (Jacobian coordinates, windowed fixed-base table)
# ---------------------------------------------------------------------------

_P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
_GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_INF = (0, 0, 0)


def _jdouble(p):
    x1, y1, z1 = p
    if not y1:
        return _INF
    yy = y1 * y1 % _P
    s = 4 * x1 * yy % _P
    m = 3 * x1 * x1 % _P
    x3 = (m * m - 2 * s) % _P
    y3 = (m * (s - x3) - 8 * yy * yy) % _P
    z3 = 2 * y1 * z1 % _P
    return (x3, y3, z3)


def _jadd(p, q):
    if not p[2]:
        return q
    if not q[2]:
        return p
    x1, y1, z1 = p
    x2, y2, z2 = q
    z1z1 = z1 * z1 % _P
    z2z2 = z2 * z2 % _P
    u1 = x1 * z2z2 % _P
    u2 = x2 * z1z1 % _P
    s1 = y1 * z2 * z2z2 % _P
    s2 = y2 * z1 * z1z1 % _P
    if u1 == u2:
        if s1 != s2:
            return _INF
        return _jdouble(p)
    h = (u2 - u1) % _P
    i = 4 * h * h % _P
    j = h * i % _P
    r = 2 * (s2 - s1) % _P
    v = u1 * i % _P
    x3 = (r * r - j - 2 * v) % _P
    y3 = (r * (v - x3) - 2 * s1 * j) % _P
    z3 = 2 * h * z1 * z2 % _P
    return (x3, y3, z3)


def _jmul(k, p):
    acc = _INF
    while k:
        if k & 1:
            acc = _jadd(acc, p)
        p = _jdouble(p)
        k >>= 1
    return acc


def _to_affine(p):
    x, y, z = p
    if not z:
        return None
    zi = pow(z, -1, _P)
    zi2 = zi * zi % _P
    return (x * zi2 % _P, y * zi2 * zi % _P)


def _build_base_table():
    # 64 windows of 4 bits each: table[w][d] = d * 16^w * G
    table = []
    base = (_GX, _GY, 1)
    for _ in range(64):
        row = [_INF]
        cur = _INF
        for _ in range(15):
            cur = _jadd(cur, base)
            row.append(cur)
        table.append(row)
        for _ in range(4):
            base = _jdouble(base)
    return table


_BASE_TABLE = _build_base_table()


def _jmul_base(k):
    acc = _INF
    w = 0
    while k:
        d = k & 15
        if d:
            acc = _jadd(acc, _BASE_TABLE[w][d])
        k >>= 4
        w += 1
    return acc


def _point_on_curve(x, y):
    return (y * y - (x * x * x + 7)) % _P == 0


# ---------------------------------------------------------------------------
# Key pairs, addresses, recoverable signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyPair:
    """A scalar private key with its derived public point and address."""

    privkey: bytes  # 32-byte big-endian scalar in [1, n-1]
    pubkey: bytes  # 64-byte uncompressed point (x || y)
    address: bytes  # low 20 bytes of hash256(pubkey)

    def __repr__(self) -> str:  # never echo the private scalar
        return f"KeyPair(address={self.address.hex()})"


def address_of_pubkey(pubkey: bytes) -> bytes:
    return hash256(pubkey)[-ADDRESS_SIZE:]


def pubkey_of_privkey(privkey: bytes) -> bytes:
    k = int.from_bytes(privkey, "big")
    if not 1 <= k < _N:
        raise ParameterError("private scalar out of range")
    x, y = _to_affine(_jmul_base(k))
    return x.to_bytes(32, "big") + y.to_bytes(32, "big")


def keypair_from_scalar(k: int) -> KeyPair:
    if not 1 <= k < _N:
        raise ParameterError("private scalar out of range")
    priv = k.to_bytes(32, "big")
    pub = pubkey_of_privkey(priv)
    return KeyPair(priv, pub, address_of_pubkey(pub))


def keypair_gen(rng: Random) -> KeyPair:
    """Draw a fresh key pair from the injected random source."""
    return keypair_from_scalar(1 + rng.randrange(_N - 1))


@dataclass(frozen=True)
class Signature:
    """Recoverable signature (v, r, s) over a 32-byte digest."""

    v: int
    r: int
    s: int

    def to_bytes(self) -> bytes:
        return bytes([self.v]) + self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Signature":
        if len(raw) != 65:
            raise VerificationError("signature must be 65 bytes")
        return cls(raw[0], int.from_bytes(raw[1:33], "big"), int.from_bytes(raw[33:], "big"))


def _check_digest(digest: bytes) -> int:
    if len(digest) != DIGEST_SIZE:
        raise ParameterError("digest must be 32 bytes")
    return int.from_bytes(digest, "big")


def sign(privkey: bytes, digest: bytes) -> Signature:
    """Sign a 32-byte digest; the signer's address is recoverable from (v,r,s).

    The nonce is derived from (privkey, digest), so signing is deterministic.
    """
    z = _check_digest(digest)
    d = int.from_bytes(privkey, "big")
    if not 1 <= d < _N:
        raise ParameterError("private scalar out of range")
    counter = 0
    while True:
        seed = _hmac.new(privkey, digest + counter.to_bytes(4, "big"), hashlib.sha256).digest()
        k = int.from_bytes(seed, "big") % _N
        counter += 1
        if k == 0:
            continue
        rx, ry = _to_affine(_jmul_base(k))
        # keep r below the group order so the recovery id is a single parity bit
        if rx >= _N:
            continue
        r = rx
        if r == 0:
            continue
        s = pow(k, -1, _N) * (z + r * d) % _N
        if s == 0:
            continue
        return Signature(ry & 1, r, s)


def recover_signer(digest: bytes, sig: Signature) -> bytes:
    """Recover the 20-byte address that produced `sig` over `digest`."""
    z = _check_digest(digest)
    if not isinstance(sig, Signature):
        raise VerificationError("not a signature value")
    if sig.v not in (0, 1) or not 0 < sig.r < _N or not 0 < sig.s < _N:
        raise VerificationError("malformed signature")
    x = sig.r
    y_sq = (x * x * x + 7) % _P
    y = pow(y_sq, (_P + 1) // 4, _P)
    if y * y % _P != y_sq:
        raise VerificationError("signature r does not name a curve point")
    if y & 1 != sig.v:
        y = _P - y
    r_point = (x, y, 1)
    r_inv = pow(sig.r, -1, _N)
    # Q = r^-1 * (s*R - z*G)
    q = _jadd(_jmul(sig.s, r_point), _jmul_base((-z) % _N))
    q = _jmul(r_inv, q)
    aff = _to_affine(q)
    if aff is None:
        raise VerificationError("recovered point at infinity")
    qx, qy = aff
    if not _point_on_curve(qx, qy):
        raise VerificationError("recovered point off curve")
    return address_of_pubkey(qx.to_bytes(32, "big") + qy.to_bytes(32, "big"))


# ---------------------------------------------------------------------------
# Symmetric and asymmetric authenticated encryption
# ---------------------------------------------------------------------------

_NONCE_SIZE = 12


def new_secret_key(rng: Random) -> bytes:
    """Uniform 256-bit secret from the injected random source."""
    return rng.getrandbits(256).to_bytes(KEY_SIZE, "big")


def sym_encrypt(key: bytes, plaintext: bytes, rng: Random) -> bytes:
    """AES-256-GCM; the returned blob is nonce || ciphertext+tag."""
    if len(key) != KEY_SIZE:
        raise ParameterError("symmetric key must be 32 bytes")
    nonce = rng.getrandbits(8 * _NONCE_SIZE).to_bytes(_NONCE_SIZE, "big")
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def sym_decrypt(key: bytes, blob: bytes) -> bytes:
    if len(key) != KEY_SIZE:
        raise ParameterError("symmetric key must be 32 bytes")
    if len(blob) < _NONCE_SIZE + 16:
        raise AuthenticationError("ciphertext too short")
    try:
        return AESGCM(key).decrypt(blob[:_NONCE_SIZE], blob[_NONCE_SIZE:], None)
    except InvalidTag as exc:
        raise AuthenticationError("wrong key or tampered ciphertext") from exc


def ecies_encrypt(pubkey: bytes, plaintext: bytes, rng: Random) -> bytes:
    """Authenticated public-key encryption: ephemeral ECDH + AES-GCM.

    Blob layout: ephemeral pubkey (64) || nonce (12) || ciphertext+tag.
    A peel with the wrong private key fails the GCM tag check.
    """
    if len(pubkey) != 64:
        raise ParameterError("pubkey must be 64 bytes")
    px = int.from_bytes(pubkey[:32], "big")
    py = int.from_bytes(pubkey[32:], "big")
    if not _point_on_curve(px, py):
        raise ParameterError("pubkey not on curve")
    eph = keypair_gen(rng)
    shared = _jmul(int.from_bytes(eph.privkey, "big"), (px, py, 1))
    sx, _ = _to_affine(shared)
    sym = hash256(sx.to_bytes(32, "big"))
    nonce = rng.getrandbits(8 * _NONCE_SIZE).to_bytes(_NONCE_SIZE, "big")
    return eph.pubkey + nonce + AESGCM(sym).encrypt(nonce, plaintext, None)


def ecies_decrypt(privkey: bytes, blob: bytes) -> bytes:
    if len(blob) < 64 + _NONCE_SIZE + 16:
        raise AuthenticationError("ciphertext too short")
    ex = int.from_bytes(blob[:32], "big")
    ey = int.from_bytes(blob[32:64], "big")
    if not _point_on_curve(ex, ey):
        raise AuthenticationError("ephemeral point off curve")
    d = int.from_bytes(privkey, "big")
    if not 1 <= d < _N:
        # an unusable scalar can never open a layer; report it the same way
        raise AuthenticationError("private scalar out of range")
    shared = _jmul(d, (ex, ey, 1))
    sx, _ = _to_affine(shared)
    sym = hash256(sx.to_bytes(32, "big"))
    nonce = blob[64 : 64 + _NONCE_SIZE]
    try:
        return AESGCM(sym).decrypt(nonce, blob[64 + _NONCE_SIZE :], None)
    except InvalidTag as exc:
        raise AuthenticationError("wrong key or tampered onion layer") from exc


# ---------------------------------------------------------------------------
# (t, n) threshold secret sharing over a prime field
# ---------------------------------------------------------------------------

# 256-bit prime (= 2**256 - 2**32 - 977). Any 256-bit secret reduces into the
# field with quotient 0 or 1; the quotient rides along publicly so restore is
# exact even for the ~2^-224 fraction of secrets at or above the modulus.
DEFAULT_SHARE_PRIME = 2**256 - 2**32 - 977
# small field for hand-checkable oracle tests
SMALL_TEST_PRIME = 257


@dataclass(frozen=True)
class Share:
    """One point of a Shamir split: (index, poly(index)) plus the public
    reduction quotient shared by the whole split."""

    index: int
    value: int
    wrap: int = 0

    def to_bytes(self) -> bytes:
        return self.index.to_bytes(8, "big") + self.value.to_bytes(32, "big") + self.wrap.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Share":
        if len(raw) != 72:
            raise ParameterError("share encoding must be 72 bytes")
        return cls(
            int.from_bytes(raw[:8], "big"),
            int.from_bytes(raw[8:40], "big"),
            int.from_bytes(raw[40:], "big"),
        )


def _secret_to_int(secret: bytes | int) -> int:
    if isinstance(secret, int):
        if secret < 0:
            raise ParameterError("secret must be non-negative")
        return secret
    return int.from_bytes(secret, "big")


def ss_split(
    secret: bytes | int,
    t: int,
    n: int,
    rng: Random,
    prime: int = DEFAULT_SHARE_PRIME,
) -> list[Share]:
    """Split a secret into n shares, any t of which restore it.

    The polynomial has degree t-1 with constant term secret mod prime; the
    quotient secret // prime is attached to every share.
    """
    if not 1 <= t <= n:
        raise ParameterError(f"invalid threshold parameters t={t}, n={n}")
    if n >= prime:
        raise ParameterError("share count must be below the field size")
    k = _secret_to_int(secret)
    value = k % prime
    wrap = k // prime
    coeffs = [value] + [rng.randrange(prime) for _ in range(t - 1)]
    shares = []
    for index in range(1, n + 1):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * index + c) % prime
        shares.append(Share(index, acc, wrap))
    return shares


def ss_restore(
    shares: Sequence[Share],
    t: int,
    prime: int = DEFAULT_SHARE_PRIME,
    as_bytes: bool = True,
) -> bytes | int:
    """Lagrange-interpolate the secret at 0 from any t of the given shares.

    Returns the original 256-bit secret as 32 bytes by default (set
    as_bytes=False to get the raw integer, e.g. over a small test field).
    """
    if t < 1:
        raise ParameterError("threshold must be positive")
    if len(shares) < t:
        raise InsufficientSharesError(f"need at least {t} shares, got {len(shares)}")
    indices = [s.index for s in shares]
    if len(set(indices)) != len(indices):
        raise ParameterError("duplicate share indices")
    if len({s.wrap for s in shares}) != 1:
        raise ParameterError("shares mix different splits")
    chosen = sorted(shares, key=lambda s: s.index)[:t]
    acc = 0
    for i, si in enumerate(chosen):
        num = 1
        den = 1
        for j, sj in enumerate(chosen):
            if i == j:
                continue
            num = num * (-sj.index) % prime
            den = den * (si.index - sj.index) % prime
        acc = (acc + si.value * num * pow(den, -1, prime)) % prime
    k = acc + chosen[0].wrap * prime
    if not as_bytes:
        return k
    if k >= 2**256:
        raise ParameterError("restored secret exceeds 256 bits")
    return k.to_bytes(KEY_SIZE, "big")


# ---------------------------------------------------------------------------
# Onion wrapping of shares
# ---------------------------------------------------------------------------

_SHARE_LEVEL = 0


@dataclass(frozen=True)
class Onion:
    """A share wrapped in successive public-key layers.

    layer_addrs lists, in wrap order (outermost last), the addresses whose
    public keys wrapped each layer. Only the wrapping party knows this list;
    the broadcast wire form (`wire_bytes`) carries no holder information, so
    unwrapping without it means trial decryption.
    """

    layers_remaining: int
    payload: bytes
    layer_addrs: tuple[bytes, ...] = ()

    def wire_bytes(self) -> bytes:
        return bytes([self.layers_remaining]) + self.payload

    @classmethod
    def from_wire(cls, raw: bytes) -> "Onion":
        if not raw:
            raise ParameterError("empty onion encoding")
        return cls(raw[0], raw[1:])

    def share(self) -> Share:
        if self.layers_remaining != 0:
            raise OnionStateError("onion still has encrypted layers")
        return Share.from_bytes(self.payload)


def onion_wrap(share: Share, layer_pubkeys: Sequence[bytes], rng: Random) -> Onion:
    """Encrypt a share under each public key in turn (last key = outer layer)."""
    if len(layer_pubkeys) < 1:
        raise ParameterError("need at least one wrapping key")
    payload = share.to_bytes()
    for pk in layer_pubkeys:
        payload = ecies_encrypt(pk, payload, rng)
    return Onion(
        layers_remaining=len(layer_pubkeys),
        payload=payload,
        layer_addrs=tuple(address_of_pubkey(pk) for pk in layer_pubkeys),
    )


def onion_peel(onion: Onion, privkey: bytes) -> Onion:
    """Remove the outermost layer; wrong keys raise AuthenticationError."""
    if onion.layers_remaining == 0:
        raise OnionStateError("no layers left to peel")
    inner = ecies_decrypt(privkey, onion.payload)
    return Onion(
        layers_remaining=onion.layers_remaining - 1,
        payload=inner,
        layer_addrs=onion.layer_addrs[:-1],
    )
