"""Command-line front end.

One executable, `chipchain`, with subcommands per module: chip fixtures
(chip new/prn), exact randomness tables (entropy), key operations
(id keygen/audit), transfer-tree and chain operations (ledger ...),
scripted network runs (scenario run), plus version and selftest.

Every subcommand accepts --seed (default 0; nothing ever falls back to
wall-clock randomness), --output text|records, and --modulus-bits.
Exit codes: 0 success, 1 failed operation or failed check, 2 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import os
import sys
from contextlib import redirect_stderr, redirect_stdout
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from . import __version__
from ._pow import active_kernel
from .chip_model import (
    ChipGeometry,
    FailureModel,
    extract_prn,
    format_chip_fixture,
    load_chip_fixture,
    new_chip,
    read_column_normal,
    write_column,
)
from .entropy_analysis import (
    collision_report,
    combinations,
    entropy_report,
    format_scientific,
    generation_table,
)
from .errors import ChipChainError, ConfigInvalid
from .identity import (
    AuditVerdict,
    PublicKey,
    SecurityState,
    crp_audit,
    key_fingerprint,
    keypair_for_chip,
    sign,
    verify,
)
from .ledger import (
    ZERO_HASH,
    build_tree,
    load_chain,
    mine_block,
    replace_chip,
    rotate_state_reproduce,
    save_chain,
    verify_chain,
    verify_tree,
)
from .network_sim import (
    bundled_scenario,
    check_invariants,
    load_scenario,
    run_scenario,
)


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    stdout_payload: str
    diagnostics: str


def _parse_population(raw: str) -> int:
    """Exact integer from plain or scientific notation (e.g. 1e14)."""
    try:
        value = Decimal(raw)
    except InvalidOperation:
        raise ValueError(f"population {raw!r} is not a number") from None
    if value != value.to_integral_value():
        raise ValueError(f"population must be an integer, got {raw!r}")
    return int(value)


def _load_topology_file(path):
    """Chips-and-edges config for the ledger commands.

    Sections: optional [params] (y, lambda, redundancy, min_failures
    defaults), [chips] with one `node_id seed=N [y= lambda= redundancy=
    min_failures=]` line per chip, and [topology] with `a -> b` edges.
    Returns (chips, topology, defaults).
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()

    defaults = {"y": 2000, "lambda": 10.0, "redundancy": 20, "min_failures": 1}
    chip_specs: dict[str, dict] = {}
    topology: list[tuple[str, str]] = []
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path} line {line_no}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("params", "chips", "topology"):
                raise ConfigInvalid(f"{where}: unknown section [{section}]")
            continue
        if section == "params":
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in defaults:
                raise ConfigInvalid(f"{where}: unknown parameter line {line!r}")
            defaults[key] = float(value) if key == "lambda" else int(value)
        elif section == "chips":
            parts = line.split()
            name, options = parts[0], {}
            for part in parts[1:]:
                key, sep, value = part.partition("=")
                if not sep or key not in ("seed", "y", "lambda", "redundancy",
                                          "min_failures"):
                    raise ConfigInvalid(f"{where}: bad chip option {part!r}")
                options[key] = value
            if "seed" not in options:
                raise ConfigInvalid(f"{where}: chip {name!r} needs seed=")
            if name in chip_specs:
                raise ConfigInvalid(f"{where}: duplicate chip {name!r}")
            chip_specs[name] = options
        elif section == "topology":
            if "->" not in line:
                raise ConfigInvalid(f"{where}: topology lines look like 'a -> b'")
            src, _, dst = line.partition("->")
            topology.append((src.strip(), dst.strip()))
        else:
            raise ConfigInvalid(f"{where}: content before any [section] header")

    chips = {}
    for name, options in chip_specs.items():
        geometry = ChipGeometry(
            rows=int(options.get("y", defaults["y"])),
            redundancy_rows=int(options.get("redundancy",
                                            defaults["redundancy"])))
        model = FailureModel(
            mean_failures=float(options.get("lambda", defaults["lambda"])),
            min_failures=int(options.get("min_failures",
                                         defaults["min_failures"])))
        chips[name] = new_chip(geometry, model, seed=int(options["seed"]),
                               chip_id=name)
    return chips, tuple(topology), defaults


def _fixture_path(args) -> str:
    if getattr(args, "fixture", None):
        return args.fixture
    if getattr(args, "id", None):
        return os.path.join(args.dir, f"{args.id}.chip")
    raise ValueError("give --fixture FILE or --id NAME (with --dir)")


# -- handlers (each returns payload lines, exit code, diagnostic lines) ----


def _cmd_chip_new(args):
    geometry = ChipGeometry(rows=args.y, redundancy_rows=args.redundancy)
    model = FailureModel(mean_failures=args.mean_failures,
                         min_failures=args.min_failures)
    chip = new_chip(geometry, model, seed=args.seed, chip_id=args.chip_id)
    record = format_chip_fixture(chip)
    os.makedirs(args.dir, exist_ok=True)
    path = os.path.join(args.dir, f"{chip.chip_id}.chip")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(record)
    if args.output == "records":
        rows = ",".join(str(r) for r in chip.failure_rows)
        return ([f"chip_id={chip.chip_id} rows={geometry.rows} "
                 f"failures={len(chip.failure_rows)} failure_rows={rows} "
                 f"path={path}"], 0, [])
    return record.rstrip("\n").splitlines() + [f"# saved to {path}"], 0, []


def _cmd_chip_prn(args):
    chip = load_chip_fixture(_fixture_path(args))
    prn = extract_prn(chip, args.column)
    rows = ",".join(str(r) for r in prn.rows)
    if args.output == "records":
        return ([f"chip_id={prn.chip_id} column={prn.column} "
                 f"count={len(prn.rows)} rows={rows} "
                 f"canonical={prn.canonical_bytes.hex()}"], 0, [])
    return ([f"chip {prn.chip_id}, column {prn.column}",
             f"  failure rows ({len(prn.rows)}): {rows}",
             f"  canonical bytes: {prn.canonical_bytes.hex()}"], 0, [])


def _entropy_lines(report, output):
    if output == "records":
        line = (f"y={report.rows} l={report.block_side} "
                f"m={report.failure_count} combinations={report.combinations} "
                f"entropy_nats={report.entropy_nats!r} "
                f"entropy_bits={report.entropy_bits!r}")
        if report.generation:
            line = f"generation={report.generation.replace(' ', '')} " + line
        return [line]
    label = f" ({report.generation})" if report.generation else ""
    return [
        f"rows (Y){label}: {report.rows}, block side (L): "
        f"{report.block_side}, failures (m): {report.failure_count}",
        f"  combinations: {report.combinations}",
        f"  entropy:      {report.entropy_nats:.6f} nats "
        f"({report.entropy_bits:.6f} bits)",
    ]


def _cmd_entropy(args):
    if args.mode == "table":
        names = (None if not args.generations
                 else [g.strip() for g in args.generations.split(",")])
        reports = generation_table(args.m, names, args.l)
        lines = []
        for report in reports:
            lines.extend(_entropy_lines(report, args.output))
        return lines, 0, []
    if args.mode == "collisions":
        population = _parse_population(args.n)
        report = collision_report(args.y, args.l, args.m, population)
        if args.output == "records":
            return ([f"y={report.rows} l={report.block_side} "
                     f"m={report.failure_count} population={report.population} "
                     f"per_pair={format_scientific(report.per_pair)} "
                     f"per_chip={format_scientific(report.per_chip)} "
                     f"expected_pairs={format_scientific(report.expected_pairs)}"],
                    0, [])
        return ([f"population: {report.population}",
                 f"  same-fingerprint chance, one given pair:  "
                 f"{format_scientific(report.per_pair)}",
                 f"  chance a given chip collides with any:    "
                 f"{format_scientific(report.per_chip)}",
                 f"  expected colliding pairs populationwide:  "
                 f"{format_scientific(report.expected_pairs)}"], 0, [])
    return _entropy_lines(entropy_report(args.y, args.l, args.m),
                          args.output), 0, []


def _cmd_id_keygen(args):
    chip = load_chip_fixture(args.chip)
    pair = keypair_for_chip(chip, args.l, args.modulus_bits, args.column)
    pk_hex = pair.public_key.to_bytes().hex()
    fingerprint = key_fingerprint(pair.public_key)
    if args.output == "records":
        lines = [f"chip_id={pair.chip_id} l={pair.state_index} "
                 f"modulus_bits={pair.modulus_bits} fingerprint={fingerprint} "
                 f"pk={pk_hex}"]
        if args.show_secret:
            lines.append(f"sk_exponent={pair.secret_key.exponent:x}")
        return lines, 0, []
    lines = [
        f"chip {pair.chip_id} at state {pair.state_index} "
        f"({pair.modulus_bits}-bit)",
        f"  fingerprint: {fingerprint}",
        f"  public key:  {pk_hex}",
    ]
    if args.show_secret:
        lines.append(f"  secret exp:  {pair.secret_key.exponent:x}")
    return lines, 0, []


def _cmd_id_audit(args):
    chip = load_chip_fixture(args.chip)
    expected = PublicKey.from_bytes(bytes.fromhex(args.pk))
    state = SecurityState(args.l, True)
    if args.nonce:
        nonce = bytes.fromhex(args.nonce)
    else:
        nonce = hashlib.sha256(
            b"chipchain/cli-audit-nonce" + args.seed.to_bytes(8, "big")).digest()
    verdict = crp_audit(chip, expected, state, nonce, args.column)
    genuine = verdict is AuditVerdict.GENUINE
    if args.output == "records":
        lines = [f"chip_id={chip.chip_id} l={args.l} "
                 f"verdict={verdict.value} nonce={nonce.hex()[:16]}"]
    else:
        lines = [f"verdict: {verdict.value}"]
    return lines, 0 if genuine else 1, []


def _cmd_ledger_build(args):
    chips, topology, _ = _load_topology_file(args.topology)
    tree = build_tree(topology, chips, args.l, args.modulus_bits)
    lines = []
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        lines.append(f"node={node_id} key={key_fingerprint(node.public_key)} "
                     f"incoming={len(node.incoming)} "
                     f"latest={node.latest_hash.hex()[:16]}")
    schedule = ",".join(f"{a}>{b}" for a, b in tree.schedule)
    lines.append(f"root={tree.root_id} root_hash={tree.root_hash.hex()[:16]} "
                 f"l={tree.state_index} schedule={schedule}")
    return lines, 0, []


def _cmd_ledger_mine(args):
    chips, topology, _ = _load_topology_file(args.topology)
    tree = build_tree(topology, chips, args.l, args.modulus_bits)
    chain = load_chain(args.chain) if os.path.exists(args.chain) else []
    stamp = tree.root_stamp()
    prev = chain[-1].block_hash if chain else ZERO_HASH
    block = mine_block(stamp, prev, args.difficulty,
                       nonce_start=args.nonce_start, height=len(chain))
    chain.append(block)
    save_chain(chain, args.chain)
    attempts = block.nonce - args.nonce_start + 1
    return ([f"height={block.height} difficulty={args.difficulty} "
             f"nonce={block.nonce} attempts={attempts} "
             f"block_hash={block.block_hash.hex()[:16]} "
             f"root={stamp.root_hash.hex()[:16]} "
             f"chain_length={len(chain)} chain={args.chain}"], 0, [])


def _cmd_ledger_verify(args):
    chain = load_chain(args.chain)
    ok = verify_chain(chain, args.difficulty)
    lines = [f"chain_length={len(chain)} difficulty={args.difficulty} "
             f"verified={'yes' if ok else 'no'}"]
    return lines, 0 if ok else 1, []


def _cmd_ledger_replace(args):
    chips, topology, defaults = _load_topology_file(args.topology)
    if args.old not in chips:
        raise ValueError(f"no chip {args.old!r} in {args.topology}")
    tree = build_tree(topology, chips, args.l, args.modulus_bits)
    old_geometry = chips[args.old].geometry
    replacement = new_chip(
        old_geometry,
        FailureModel(mean_failures=defaults["lambda"],
                     min_failures=defaults["min_failures"]),
        seed=args.new_seed, chip_id=f"{args.old}-replacement")
    repaired, recomputed = replace_chip(tree, args.old, replacement, args.l)

    # independent route: rebuild everything from scratch with the swap
    swapped = dict(chips)
    swapped[args.old] = replacement
    rebuilt = build_tree(topology, swapped, args.l, args.modulus_bits)
    match = (repaired.root_hash == rebuilt.root_hash
             and all(repaired.nodes[n].latest_hash == rebuilt.nodes[n].latest_hash
                     for n in repaired.nodes))
    lines = [
        f"replaced={args.old} new_seed={args.new_seed} "
        f"recomputed={','.join(recomputed)} "
        f"untouched={len(tree.nodes) - len(recomputed)}",
        f"old_root={tree.root_hash.hex()[:16]} "
        f"new_root={repaired.root_hash.hex()[:16]} "
        f"rebuild_match={'yes' if match else 'no'}",
    ]
    return lines, 0 if match else 1, [] if match else [
        "incremental repair diverged from the from-scratch rebuild"]


def _cmd_ledger_rotate(args):
    chips, topology, _ = _load_topology_file(args.topology)
    tree = build_tree(topology, chips, args.from_l, args.modulus_bits)
    rotated = rotate_state_reproduce(tree, args.new_l)
    changed = sum(
        1 for n in tree.nodes
        if tree.nodes[n].public_key != rotated.nodes[n].public_key)
    ok = verify_tree(rotated)
    lines = [
        f"from_l={args.from_l} new_l={args.new_l} "
        f"keys_changed={changed}/{len(tree.nodes)} "
        f"verified={'yes' if ok else 'no'}",
        f"old_root={tree.root_hash.hex()[:16]} "
        f"new_root={rotated.root_hash.hex()[:16]}",
    ]
    return lines, 0 if ok else 1, []


def _cmd_scenario_run(args):
    if os.path.exists(args.target):
        config = load_scenario(args.target)
    else:
        config = bundled_scenario(args.target)
    log = run_scenario(config, args.seed)
    problems = check_invariants(log)
    if args.output == "records":
        lines = log.to_records() + [log.final_line()]
    else:
        lines = log.summary().splitlines()
    return lines, 0 if not problems else 1, problems


def _cmd_version(args):
    return [f"chipchain {__version__} (pow kernel: {active_kernel()})"], 0, []


# frozen oracle anchors used by the embedded selftest
_COMBINATIONS_2000_10 = 275898785946005613288829800


def _selftest_checks():
    def chip_extraction():
        chip = new_chip(ChipGeometry(rows=512), FailureModel(), seed=7)
        prn = extract_prn(chip)
        assert prn.rows == chip.failure_rows, "extraction missed failure rows"
        for _ in range(50):
            assert extract_prn(chip).rows == prn.rows, "extraction unstable"
        write_column(chip, "special", 1, 1)
        write_column(chip, "normal", 1, 0)  # wrong order wipes the marks
        assert not read_column_normal(chip, 1).any(), \
            "wrong preprocess order should read all zero"

    def entropy_anchor():
        count = combinations(2000, 10)
        assert count == _COMBINATIONS_2000_10, "combination count drifted"
        assert count > 10 ** 25, "anchor bound violated"

    def collision_bound():
        from fractions import Fraction
        report = collision_report(2000, 1, 10, 10 ** 14)
        assert report.per_chip < Fraction(1, 10 ** 11), "collision bound violated"

    def sign_verify():
        chip = new_chip(ChipGeometry(rows=2000), FailureModel(), seed=11)
        pair = keypair_for_chip(chip, 0, 512)
        message = b"selftest message"
        signature = sign(pair.secret_key, message)
        assert verify(pair.public_key, message, signature), "roundtrip failed"
        assert not verify(pair.public_key, b"other message", signature), \
            "verify accepted the wrong message"
        other = keypair_for_chip(chip, 1, 512)
        assert not verify(other.public_key, message, signature), \
            "verify accepted a foreign key"

    def mine_verify():
        chips = {f"n{i}": new_chip(ChipGeometry(rows=256), FailureModel(),
                                   seed=20 + i, chip_id=f"n{i}")
                 for i in range(3)}
        tree = build_tree((("n1", "n0"), ("n2", "n0")), chips, 0, 512)
        first = mine_block(tree.root_stamp(), ZERO_HASH, 8, height=0)
        second = mine_block(tree.root_stamp(), first.block_hash, 8, height=1)
        chain = [first, second]
        assert verify_chain(chain, 8), "fresh chain failed verification"
        forged = second.block_hash[:-1] + bytes([second.block_hash[-1] ^ 1])
        import dataclasses
        assert not verify_chain([first, dataclasses.replace(
            second, block_hash=forged)], 8), "tampered chain verified"

    def scenario_run():
        log = run_scenario(bundled_scenario("fig10-coexistence"), 0)
        assert not check_invariants(log), "invariant violations"
        assert log.rejections >= 1, "attacker was never rejected"
        assert len(log.chain) == 3, "expected a three-block chain"
        assert not log.evicted, "rotation should not shed members"

    return [
        ("chip-extraction", chip_extraction),
        ("entropy-anchor", entropy_anchor),
        ("collision-bound", collision_bound),
        ("sign-verify", sign_verify),
        ("mine-verify", mine_verify),
        ("scenario-run", scenario_run),
    ]


def _cmd_selftest(args):
    lines = []
    passed = 0
    checks = _selftest_checks()
    for name, check in checks:
        try:
            check()
        except Exception as exc:
            lines.append(f"FAIL {name}: {exc}")
        else:
            passed += 1
            lines.append(f"ok {name}")
    lines.append(f"selftest: {passed}/{len(checks)} passed")
    return lines, 0 if passed == len(checks) else 1, []


# -- parser ----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="deterministic seed (default 0, never wall clock)")
    common.add_argument("--output", choices=("text", "records"),
                        default="text",
                        help="human text or one key=value record per line")
    common.add_argument("--modulus-bits", type=int, default=1024,
                        choices=(512, 1024, 2048),
                        help="RSA modulus size for derived keys")

    parser = argparse.ArgumentParser(
        prog="chipchain",
        description="Desk-scale simulation of memory-chip-rooted identity, "
                    "attestation, and a chip-stamped proof-of-work ledger.")
    sub = parser.add_subparsers(dest="command", required=True)

    chip = sub.add_parser("chip", help="manufacture and read chip fixtures")
    chip_sub = chip.add_subparsers(dest="subcommand", required=True)
    chip_new = chip_sub.add_parser("new", parents=[common],
                                   help="manufacture a chip fixture")
    chip_new.add_argument("--y", type=int, default=2000,
                          help="regular-array rows")
    chip_new.add_argument("--lambda", dest="mean_failures", type=float,
                          default=10.0, help="mean failure-row count")
    chip_new.add_argument("--redundancy", type=int, default=20,
                          help="spare rows")
    chip_new.add_argument("--min-failures", type=int, default=1)
    chip_new.add_argument("--chip-id", default=None,
                          help="default: chip-<seed>")
    chip_new.add_argument("--dir", default=".",
                          help="directory for the .chip fixture file")
    chip_new.set_defaults(handler=_cmd_chip_new)

    chip_prn = chip_sub.add_parser("prn", parents=[common],
                                   help="extract a fixture's fingerprint")
    chip_prn.add_argument("--id", help="chip id; reads <dir>/<id>.chip")
    chip_prn.add_argument("--dir", default=".")
    chip_prn.add_argument("--fixture", help="explicit fixture path")
    chip_prn.add_argument("--column", type=int, default=0)
    chip_prn.set_defaults(handler=_cmd_chip_prn)

    entropy = sub.add_parser("entropy", parents=[common],
                             help="exact fingerprint-space combinatorics")
    entropy.add_argument("mode", nargs="?", choices=("table", "collisions"),
                         help="omit for one configuration; 'table' for the "
                              "generation ladder; 'collisions' for "
                              "population odds")
    entropy.add_argument("--y", type=int, default=2000, help="rows")
    entropy.add_argument("--l", type=int, default=1, help="block side")
    entropy.add_argument("--m", type=int, default=10, help="failure count")
    entropy.add_argument("--n", default="1e14",
                         help="population size (collisions mode)")
    entropy.add_argument("--generations",
                         help="comma-separated subset for table mode")
    entropy.set_defaults(handler=_cmd_entropy)

    ident = sub.add_parser("id", help="chip-bound keys and audits")
    ident_sub = ident.add_subparsers(dest="subcommand", required=True)
    keygen = ident_sub.add_parser("keygen", parents=[common],
                                  help="derive the keypair of a chip fixture")
    keygen.add_argument("--chip", required=True, help="chip fixture path")
    keygen.add_argument("--l", type=int, default=0, help="state index")
    keygen.add_argument("--column", type=int, default=0)
    keygen.add_argument("--show-secret", action="store_true")
    keygen.set_defaults(handler=_cmd_id_keygen)

    audit = ident_sub.add_parser("audit", parents=[common],
                                 help="challenge a chip against a claimed key")
    audit.add_argument("--chip", required=True, help="chip fixture path")
    audit.add_argument("--pk", required=True,
                       help="claimed public key, hex as printed by keygen")
    audit.add_argument("--l", type=int, default=0, help="state index")
    audit.add_argument("--column", type=int, default=0)
    audit.add_argument("--nonce", help="hex nonce; default derives from --seed")
    audit.set_defaults(handler=_cmd_id_audit)

    ledger = sub.add_parser("ledger", help="transfer trees and the mined chain")
    ledger_sub = ledger.add_subparsers(dest="subcommand", required=True)

    build = ledger_sub.add_parser("build", parents=[common],
                                  help="execute a transfer topology")
    build.add_argument("--topology", required=True,
                       help="config file with [chips] and [topology]")
    build.add_argument("--l", type=int, default=0, help="state index")
    build.set_defaults(handler=_cmd_ledger_build)

    mine = ledger_sub.add_parser("mine", parents=[common],
                                 help="mine the tree's root stamp onto a chain")
    mine.add_argument("--topology", required=True)
    mine.add_argument("--l", type=int, default=0)
    mine.add_argument("--difficulty", type=int, required=True,
                      help="leading zero bits")
    mine.add_argument("--chain", required=True,
                      help="chain file; created if missing, else appended")
    mine.add_argument("--nonce-start", type=int, default=0)
    mine.set_defaults(handler=_cmd_ledger_mine)

    verify_cmd = ledger_sub.add_parser("verify", parents=[common],
                                       help="check a chain file")
    verify_cmd.add_argument("--chain", required=True)
    verify_cmd.add_argument("--difficulty", type=int, required=True)
    verify_cmd.set_defaults(handler=_cmd_ledger_verify)

    replace = ledger_sub.add_parser(
        "replace", parents=[common],
        help="swap one chip and repair only the dirtied path")
    replace.add_argument("--topology", required=True)
    replace.add_argument("--old", required=True, help="node id to replace")
    replace.add_argument("--new-seed", type=int, required=True,
                         help="manufacture seed of the replacement chip")
    replace.add_argument("--l", type=int, default=0)
    replace.set_defaults(handler=_cmd_ledger_replace)

    rotate = ledger_sub.add_parser("rotate", parents=[common],
                                   help="reproduce the tree at a new state")
    rotate.add_argument("--topology", required=True)
    rotate.add_argument("--from-l", type=int, default=0)
    rotate.add_argument("--new-l", type=int, required=True)
    rotate.set_defaults(handler=_cmd_ledger_rotate)

    scenario = sub.add_parser("scenario", help="scripted network runs")
    scenario_sub = scenario.add_subparsers(dest="subcommand", required=True)
    run = scenario_sub.add_parser("run", parents=[common],
                                  help="run a scenario config or bundled name")
    run.add_argument("target",
                     help="path to a .cfg file, or a bundled scenario name "
                          "(e.g. fig10-coexistence)")
    run.set_defaults(handler=_cmd_scenario_run)

    version = sub.add_parser("version", parents=[common],
                             help="print version and active kernels")
    version.set_defaults(handler=_cmd_version)

    selftest = sub.add_parser("selftest", parents=[common],
                              help="run the embedded end-to-end checks")
    selftest.set_defaults(handler=_cmd_selftest)

    return parser


def dispatch(argv) -> CommandResult:
    """Parse and execute one command line, capturing all output."""
    parser = _build_parser()
    out, err = io.StringIO(), io.StringIO()
    try:
        with redirect_stdout(out), redirect_stderr(err):
            args = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return CommandResult(code, out.getvalue().rstrip("\n"),
                             err.getvalue().rstrip("\n"))
    try:
        lines, code, problems = args.handler(args)
    except ChipChainError as exc:
        return CommandResult(1, "", f"{type(exc).__name__}: {exc}")
    except (ValueError, ArithmeticError, OSError) as exc:
        return CommandResult(1, "", f"{type(exc).__name__}: {exc}")
    return CommandResult(code, "\n".join(lines), "\n".join(problems))


def main(argv=None) -> int:
    result = dispatch(sys.argv[1:] if argv is None else argv)
    if result.stdout_payload:
        print(result.stdout_payload)
    if result.diagnostics:
        print(result.diagnostics, file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
