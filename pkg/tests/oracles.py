"""Independent reference implementations used to pin library results.

Everything in this file is written the slow, obvious way and shares no
code with the package: binomials as explicit products cross-checked
against a Pascal recurrence, transfer schedules by repeated scanning,
root folds by replaying the byte rules over plain dicts.  Tests freeze
several outputs of these oracles as literals.
"""

import fractions
import hashlib
import struct


def binom_product(n: int, k: int) -> int:
    """C(n, k) as the explicit multiplicative product, exact at every step."""
    if n < 0 or k < 0:
        raise ValueError("negative argument")
    if k > n:
        raise ValueError("k exceeds n")
    k = min(k, n - k)
    acc = 1
    for i in range(k):
        acc = acc * (n - i) // (i + 1)
    return acc


def binom_pascal(n: int, k: int) -> int:
    """C(n, k) by building Pascal rows; quadratic, for cross-checking only."""
    if k > n or k < 0 or n < 0:
        raise ValueError("out of range")
    row = [1]
    for _ in range(n):
        row = [1] + [row[i] + row[i + 1] for i in range(len(row) - 1)] + [1]
    return row[k]


def is_prime_trial(n: int, witnesses=(2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)) -> bool:
    """Miller-Rabin with a fixed witness set, written independently."""
    if n < 2:
        return False
    for p in witnesses:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in witnesses:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def bruteforce_schedule(node_ids, edges):
    """Transfer order by repeatedly scanning for the smallest ready node.

    A node is ready once every edge pointing at it has been emitted.
    Returns (schedule, sink). Raises ValueError on cycles or when the
    edge set does not funnel into exactly one sink.
    """
    nodes = sorted(node_ids)
    pending_in = {n: 0 for n in nodes}
    out = {n: [] for n in nodes}
    for src, dst in edges:
        pending_in[dst] += 1
        out[src].append(dst)
    for n in nodes:
        out[n].sort()
    done = set()
    schedule = []
    while len(done) < len(nodes):
        ready = [n for n in nodes if n not in done and pending_in[n] == 0]
        if not ready:
            raise ValueError("cycle")
        n = ready[0]
        done.add(n)
        for dst in out[n]:
            schedule.append((n, dst))
            pending_in[dst] -= 1
    sinks = [n for n in nodes if not out[n]]
    if len(sinks) != 1:
        raise ValueError("want exactly one sink, got %d" % len(sinks))
    return schedule, sinks[0]


def oracle_root_fold(edges, public_keys, sign_fn):
    """Replay the ledger byte rules over flat dicts.

    public_keys maps node id to serialized public key bytes; sign_fn(node,
    payload) must produce the node's signature bytes.  Returns the final
    folded hash per node, computed without any package bookkeeping.
    """
    schedule, _sink = bruteforce_schedule(public_keys.keys(), edges)
    latest = {}
    latest_sig = {}
    for n, pk in public_keys.items():
        latest[n] = hashlib.sha256(pk + bytes(32) + b"").digest()
        latest_sig[n] = b""
    for src, dst in schedule:
        h = hashlib.sha256(public_keys[src] + latest[src] + latest_sig[src]).digest()
        sig = sign_fn(src, public_keys[dst] + h)
        latest[dst] = hashlib.sha256(public_keys[dst] + latest[dst] + h).digest()
        latest_sig[dst] = sig
    return latest


def random_tree_edges(rng, n: int):
    """Random converging topology over n nodes: node i>0 sends to a node < i.

    Node ids sort lexicographically ("n00".."n63"), node "n00" is the sink.
    """
    names = ["n%02d" % i for i in range(n)]
    edges = []
    for i in range(1, n):
        parent = int(rng.integers(0, i))
        edges.append((names[i], names[parent]))
    return names, edges


def geometric_median_bounds(p: fractions.Fraction, runs: int):
    """Sanity range for the median of `runs` geometric draws with success p.

    The median of a geometric distribution is about ln 2 / p; the wide
    [mean/4, mean*4] envelope used by the mining test comes from here.
    """
    mean = 1 / p
    return mean / 4, mean * 4


def hmac_sha256(key: bytes, msg: bytes) -> bytes:
    """Textbook HMAC written out from the RFC 2104 construction."""
    block = 64
    if len(key) > block:
        key = hashlib.sha256(key).digest()
    key = key + bytes(block - len(key))
    ipad = bytes(b ^ 0x36 for b in key)
    opad = bytes(b ^ 0x5C for b in key)
    inner = hashlib.sha256(ipad + msg).digest()
    return hashlib.sha256(opad + inner).digest()


def response_oracle(prn_rows, total_rows: int, challenge_data: bytes) -> bytes:
    """Recompute the 64-byte keyed response from first principles."""
    key = struct.pack(">II", total_rows, len(prn_rows))
    for r in sorted(prn_rows):
        key += struct.pack(">I", r)
    out = b""
    for counter in (0, 1):
        out += hmac_sha256(key, challenge_data + struct.pack(">I", counter))
    return out
