# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Native nonce-search kernel: OpenSSL SHA-256 inside a nogil loop.

Must stay bit-identical to chipchain._pow.pow_search_pure; the parity
tests drive both over the same inputs.
"""

from cpython.bytes cimport PyBytes_FromStringAndSize
from libc.stdint cimport uint8_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

cdef extern from "openssl/sha.h":
    # the direct digest routines skip OpenSSL 3's per-call EVP fetch
    ctypedef struct SHA256_CTX:
        pass
    int SHA256_Init(SHA256_CTX *c) nogil
    int SHA256_Update(SHA256_CTX *c, const void *data, size_t length) nogil
    int SHA256_Final(unsigned char *md, SHA256_CTX *c) nogil

cdef uint64_t _NONCE_MAX = <uint64_t> 0xFFFFFFFFFFFFFFFF


def pow_search(bytes body, object nonce_start=0, int difficulty_bits=0,
               object max_attempts=None):
    """Same contract as the pure kernel; see chipchain._pow."""
    if difficulty_bits < 0 or difficulty_bits > 256:
        raise ValueError("difficulty_bits must be in [0, 256]")
    start_py = int(nonce_start)
    if start_py < 0 or start_py > <object> _NONCE_MAX:
        raise ValueError("nonce_start must fit in 64 bits")
    if max_attempts is not None and max_attempts < 0:
        raise ValueError("max_attempts must be >= 0")

    # inclusive last nonce to try, clamped by the attempt cap
    last_py = <object> _NONCE_MAX
    if max_attempts is not None:
        if max_attempts == 0:
            return None
        capped = start_py + int(max_attempts) - 1
        if capped < last_py:
            last_py = capped

    cdef uint64_t nonce = <uint64_t> start_py
    cdef uint64_t last = <uint64_t> last_py
    cdef Py_ssize_t body_len = len(body)
    cdef int zero_bytes = difficulty_bits >> 3
    cdef int rem_bits = difficulty_bits & 7
    cdef uint8_t rem_mask = 0
    if rem_bits:
        rem_mask = <uint8_t> (0xFF << (8 - rem_bits))

    cdef uint8_t digest[32]
    cdef uint8_t *message = <uint8_t *> malloc(8 + body_len)
    if message == NULL:
        raise MemoryError()
    if body_len:
        memcpy(message + 8, <const unsigned char *> body, body_len)

    cdef bint found = False
    cdef bint qualifies
    cdef int i
    cdef SHA256_CTX ctx
    try:
        with nogil:
            while True:
                message[0] = <uint8_t> (nonce >> 56)
                message[1] = <uint8_t> (nonce >> 48)
                message[2] = <uint8_t> (nonce >> 40)
                message[3] = <uint8_t> (nonce >> 32)
                message[4] = <uint8_t> (nonce >> 24)
                message[5] = <uint8_t> (nonce >> 16)
                message[6] = <uint8_t> (nonce >> 8)
                message[7] = <uint8_t> nonce
                SHA256_Init(&ctx)
                SHA256_Update(&ctx, message, 8 + body_len)
                SHA256_Final(digest, &ctx)
                qualifies = True
                for i in range(zero_bytes):
                    if digest[i] != 0:
                        qualifies = False
                        break
                if qualifies and rem_bits and (digest[zero_bytes] & rem_mask):
                    qualifies = False
                if qualifies:
                    found = True
                    break
                if nonce == last:
                    break
                nonce += 1
        if not found:
            return None
        out = PyBytes_FromStringAndSize(<char *> digest, 32)
        attempts = int(nonce) - start_py + 1
        return int(nonce), out, attempts
    finally:
        free(message)
