"""Compare the compiled hash-scan kernel against the pure-Python one.

Both kernels search the same nonce ranges over the same bodies, so the
attempt counts are identical and the figure of merit is nanoseconds
per hash attempt.  Run:

    python3 benchmarks/bench_pow.py [--attempts N]
"""

import argparse
import hashlib
import time

from chipchain import HAVE_NATIVE, pow_search_pure
from chipchain._pow import _FORCE_PURE


def timed_scan(kernel, body: bytes, attempts: int) -> float:
    """Seconds for an exhausted scan of `attempts` nonces."""
    started = time.perf_counter()
    result = kernel(body, nonce_start=0, difficulty_bits=256, max_attempts=attempts)
    elapsed = time.perf_counter() - started
    assert result is None  # difficulty 256 is unreachable; the scan runs dry
    return elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--attempts", type=int, default=300_000,
                        help="nonces per measured scan (default 300000)")
    args = parser.parse_args()

    body = hashlib.sha256(b"benchmark stamp").digest() * 4  # 128-byte body
    rows = []

    kernels = [("pure", pow_search_pure)]
    if HAVE_NATIVE and not _FORCE_PURE:
        from chipchain._powcore import pow_search as native
        kernels.append(("native", native))

    for name, kernel in kernels:
        timed_scan(kernel, body, 20_000)  # warm-up
        best = min(timed_scan(kernel, body, args.attempts) for _ in range(3))
        rows.append((name, best / args.attempts * 1e9))

    print(f"workload: {args.attempts} nonces over a {len(body)}-byte body, best of 3")
    for name, ns in rows:
        print(f"  {name:<7} {ns:8.1f} ns/attempt")
    if len(rows) == 2:
        print(f"  speedup {rows[0][1] / rows[1][1]:.1f}x")
    else:
        print("  (compiled kernel unavailable; only the pure path measured)")


if __name__ == "__main__":
    main()
