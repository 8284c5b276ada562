"""Chip-bound identity: challenges, responses, and deterministic keys.

A challenge is a pure function of the security-state index and the
issuing authority.  A chip answers with a keyed digest of the challenge
under its fingerprint, and the response seeds a deterministic RSA
keypair, so the same chip at the same state index always reproduces the
same keys.  Nothing is ever stored on the device side; possession of
the physical chip is what regenerates the secret key.

Key sizes here are desk-scale (512 to 2048 bit) for fast simulation,
not production parameters.
"""

from __future__ import annotations

import hashlib
import hmac
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

try:
    from gmpy2 import powmod as _powmod
except ImportError:  # pure fallback, same results
    _powmod = pow

from .chip_model import Prn, SimulatedChip, extract_prn
from .errors import PrimeSearchExhausted, SignatureMalformed

ISSUER_MANAGEMENT = "management"
ISSUER_SECURITY = "security"

SUPPORTED_MODULUS_BITS = (512, 1024, 2048)

_CHALLENGE_TAG = b"chipchain/challenge/v1"
_KDF_TAG = b"chipchain/keyseed/v1"
_ISSUER_TAGS = {ISSUER_MANAGEMENT: b"MGT\x00", ISSUER_SECURITY: b"SEC\x00"}

_RESPONSE_BLOCKS = 2  # 2 x SHA-256 = 64 response bytes


@dataclass(frozen=True)
class Challenge:
    """Attestation challenge, reproducible from (state_index, issuer)."""

    state_index: int
    issuer: str
    data: bytes


def make_challenge(state_index: int, issuer: str = ISSUER_MANAGEMENT) -> Challenge:
    if state_index < 0:
        raise ValueError("state_index must be >= 0")
    if issuer not in _ISSUER_TAGS:
        raise ValueError(f"issuer must be one of {sorted(_ISSUER_TAGS)}")
    data = hashlib.sha256(
        _CHALLENGE_TAG + _ISSUER_TAGS[issuer] + state_index.to_bytes(8, "big")
    ).digest()
    return Challenge(state_index, issuer, data)


@dataclass(frozen=True)
class Response:
    """64-byte chip answer binding a fingerprint to a challenge."""

    chip_id: str
    state_index: int
    data: bytes


def respond(prn: Prn, challenge: Challenge) -> Response:
    """Keyed digest of the challenge under the chip fingerprint."""
    key = prn.canonical_bytes
    blocks = [
        hmac.digest(key, challenge.data + i.to_bytes(4, "big"), "sha256")
        for i in range(_RESPONSE_BLOCKS)
    ]
    return Response(prn.chip_id, challenge.state_index, b"".join(blocks))


def _int_bytes(value: int) -> bytes:
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def _length_prefixed(raw: bytes) -> bytes:
    return len(raw).to_bytes(4, "big") + raw


def _read_length_prefixed(data: bytes, offset: int) -> tuple[bytes, int]:
    if offset + 4 > len(data):
        raise ValueError("truncated length prefix")
    length = int.from_bytes(data[offset:offset + 4], "big")
    offset += 4
    if offset + length > len(data):
        raise ValueError("truncated field")
    return data[offset:offset + length], offset + length


@dataclass(frozen=True)
class PublicKey:
    modulus: int
    exponent: int

    @property
    def byte_size(self) -> int:
        return (self.modulus.bit_length() + 7) // 8

    def to_bytes(self) -> bytes:
        return (_length_prefixed(_int_bytes(self.modulus))
                + _length_prefixed(_int_bytes(self.exponent)))

    @classmethod
    def parse(cls, data: bytes, offset: int = 0) -> tuple["PublicKey", int]:
        modulus, offset = _read_length_prefixed(data, offset)
        exponent, offset = _read_length_prefixed(data, offset)
        return cls(int.from_bytes(modulus, "big"),
                   int.from_bytes(exponent, "big")), offset

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicKey":
        key, offset = cls.parse(data)
        if offset != len(data):
            raise ValueError("trailing bytes after public key")
        return key


@dataclass(frozen=True)
class SecretKey:
    modulus: int
    exponent: int


@dataclass(frozen=True)
class ChipKeyPair:
    chip_id: str
    state_index: int
    public_key: PublicKey
    secret_key: SecretKey
    prime_p: int
    prime_q: int
    modulus_bits: int


def key_fingerprint(key: PublicKey) -> str:
    """Short stable hex handle for logs and tables."""
    return hashlib.sha256(key.to_bytes()).hexdigest()[:16]


def _first_primes(count: int) -> tuple[int, ...]:
    primes, candidate = [], 2
    while len(primes) < count:
        if all(candidate % p for p in primes):
            primes.append(candidate)
        candidate += 1
    return tuple(primes)


_MR_WITNESSES = _first_primes(40)
_SIEVE_PRIMES = [p for p in _first_primes(310) if p > 2]  # odd primes < ~2050


def _is_probable_prime(n: int) -> bool:
    """Miller-Rabin with a fixed witness schedule (deterministic)."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    twos = (d & -d).bit_length() - 1
    d >>= twos
    for a in _MR_WITNESSES:
        x = int(_powmod(a, d, n))
        if x == 1 or x == n - 1:
            continue
        for _ in range(twos - 1):
            x = int(_powmod(x, 2, n))
            if x == n - 1:
                break
        else:
            return False
    return True


def _next_prime(candidate: int, max_steps: int = 1 << 17) -> int:
    """First prime at or after candidate, stepping odd numbers.

    candidate must be larger than the sieve primes (key-size integers
    always are).  The residue sieve rejects most composites before any
    Miller-Rabin round runs.
    """
    if candidate % 2 == 0:
        candidate += 1
    residues = [candidate % p for p in _SIEVE_PRIMES]
    for step in range(max_steps):
        offset = 2 * step
        for r, p in zip(residues, _SIEVE_PRIMES):
            if (r + offset) % p == 0:
                break
        else:
            n = candidate + offset
            if _is_probable_prime(n):
                return n
    raise PrimeSearchExhausted(
        f"no prime within {max_steps} odd steps of the candidate")


class _ByteStream:
    """Counter-mode SHA-256 stream over a fixed seed."""

    def __init__(self, seed: bytes):
        self.seed = seed
        self.counter = 0
        self.buffer = b""

    def take(self, nbytes: int) -> bytes:
        while len(self.buffer) < nbytes:
            self.buffer += hashlib.sha256(
                _KDF_TAG + self.seed + self.counter.to_bytes(4, "big")
            ).digest()
            self.counter += 1
        out, self.buffer = self.buffer[:nbytes], self.buffer[nbytes:]
        return out


@lru_cache(maxsize=16384)
def _derive_core(seed: bytes, modulus_bits: int):
    half = modulus_bits // 2
    stream = _ByteStream(seed)

    def candidate() -> int:
        raw = int.from_bytes(stream.take(half // 8), "big")
        # top two bits forced so p*q always lands on modulus_bits bits
        return raw | (3 << (half - 2)) | 1

    while True:
        p = _next_prime(candidate())
        q = _next_prime(candidate())
        while q == p:
            q = _next_prime(candidate())
        n = p * q
        if n.bit_length() == modulus_bits:
            break
    phi = (p - 1) * (q - 1)
    e = 65537
    while math.gcd(e, phi) != 1:
        e += 2
    d = pow(e, -1, phi)
    return n, e, d, p, q


def derive_keypair(response: Response, modulus_bits: int = 1024) -> ChipKeyPair:
    """Deterministic RSA pair seeded by a chip response.

    The same response always regenerates the identical pair, which is
    the whole point: keys never need storing next to the chip.
    """
    if modulus_bits not in SUPPORTED_MODULUS_BITS:
        raise ValueError(f"modulus_bits must be one of {SUPPORTED_MODULUS_BITS}")
    n, e, d, p, q = _derive_core(response.data, modulus_bits)
    return ChipKeyPair(
        chip_id=response.chip_id,
        state_index=response.state_index,
        public_key=PublicKey(n, e),
        secret_key=SecretKey(n, d),
        prime_p=p,
        prime_q=q,
        modulus_bits=modulus_bits,
    )


def keypair_for_chip(chip: SimulatedChip, state_index: int,
                     modulus_bits: int = 1024, column: int = 0,
                     issuer: str = ISSUER_MANAGEMENT) -> ChipKeyPair:
    """Extract, respond, derive: the full chip-to-keys pipeline."""
    prn = extract_prn(chip, column)
    return derive_keypair(respond(prn, make_challenge(state_index, issuer)),
                          modulus_bits)


_DIGEST_SIZE = 32


def _padded_digest_int(message: bytes, size: int) -> int:
    if size < _DIGEST_SIZE + 11:
        raise ValueError("modulus too small to carry a padded digest")
    digest = hashlib.sha256(message).digest()
    padded = (b"\x00\x01" + b"\xff" * (size - _DIGEST_SIZE - 3)
              + b"\x00" + digest)
    return int.from_bytes(padded, "big")


def sign(secret_key: SecretKey, message: bytes) -> bytes:
    """Signature over the padded digest of message."""
    size = (secret_key.modulus.bit_length() + 7) // 8
    em = _padded_digest_int(bytes(message), size)
    s = int(_powmod(em, secret_key.exponent, secret_key.modulus))
    return s.to_bytes(size, "big")


def verify(public_key: PublicKey, message: bytes, signature: bytes) -> bool:
    """True iff signature opens to the padded digest of message."""
    size = public_key.byte_size
    if len(signature) != size:
        raise SignatureMalformed(
            f"signature must be {size} bytes for this key, got {len(signature)}")
    recovered = int(_powmod(int.from_bytes(signature, "big"),
                            public_key.exponent, public_key.modulus))
    return recovered == _padded_digest_int(bytes(message), size)


@dataclass
class SecurityState:
    """Indexed rotation state owned by the security authority."""

    index: int
    active: bool = True


class AuditVerdict(Enum):
    GENUINE = "Genuine"
    IMPOSTOR = "Impostor"


def crp_audit(chip: SimulatedChip, expected_key: PublicKey,
              state: SecurityState, nonce: bytes,
              column: int = 0) -> AuditVerdict:
    """Challenge the physical chip and test it against a claimed key.

    The chip regenerates its keypair at the active state index and
    signs the fresh nonce.  Genuine requires both the regenerated
    public key to equal the claimed one and the nonce signature to
    verify under the claimed key; an Impostor verdict is a result, not
    an error.
    """
    if not state.active:
        raise ValueError("cannot audit against an inactive security state")
    nonce = bytes(nonce)
    if not nonce:
        raise ValueError("nonce must be non-empty")
    bits = expected_key.modulus.bit_length()
    if bits not in SUPPORTED_MODULUS_BITS:
        return AuditVerdict.IMPOSTOR
    pair = keypair_for_chip(chip, state.index, bits, column)
    signature = sign(pair.secret_key, nonce)
    try:
        signature_ok = verify(expected_key, nonce, signature)
    except SignatureMalformed:
        signature_ok = False
    if signature_ok and pair.public_key == expected_key:
        return AuditVerdict.GENUINE
    return AuditVerdict.IMPOSTOR
