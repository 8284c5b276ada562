"""Scripted network simulation: central management over chip-rooted devices.

One management node admits devices into the trusted membership, one
security node owns the rotation state, device nodes hold chips, and
attacker nodes probe the boundary.  Entry and periodic sweeps both run
the physical chip audit; the transfer tree and its mined chain run
inside the membership.  Everything is driven by a plain-text scenario
config and an integer tick schedule, and a run is fully deterministic
for a given (config, seed): replaying yields byte-identical event
records except that audit nonces follow the seed.

Scenario config format (sections in any order, # comments allowed):

    [params]
    difficulty = 8          # mining difficulty in leading zero bits
    modulus_bits = 512      # key size for every derived pair
    y = 2000                # default chip rows
    lambda = 10             # default mean failure-row count
    redundancy = 20         # default spare rows

    [chips]
    c0 seed=100             # one manufactured chip per line
    c1 seed=101 y=4096      # per-chip overrides allowed

    [nodes]
    mgmt role=management
    sec role=security
    n0 role=device chip=c0
    eve role=attacker chip=c1 strategy=own_chip claims=n0

    [topology]
    n1 -> n0                # transfer edges between device nodes

    [schedule]
    1 enroll n0             # tick, action, arguments
    5 spoof eve n0
    7 build_tree
    8 mine
    9 rotate 1
    10 sweep

Schedule actions: enroll NODE, spoof ATTACKER VICTIM, build_tree,
mine [DIFFICULTY], rotate NEW_STATE [offline=a,b], sweep, and
tamper NODE seed=N (silent physical chip swap, caught by the next
sweep).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .chip_model import ChipGeometry, FailureModel, SimulatedChip, new_chip
from .errors import ConfigInvalid, SignatureMalformed
from .identity import (
    AuditVerdict,
    ISSUER_MANAGEMENT,
    PublicKey,
    SecurityState,
    crp_audit,
    key_fingerprint,
    keypair_for_chip,
    make_challenge,
    sign,
    verify,
)
from .ledger import (
    Block,
    ZERO_HASH,
    build_tree,
    mine_block,
    rotate_state_reproduce,
    verify_chain,
)

ROLE_MANAGEMENT = "management"
ROLE_SECURITY = "security"
ROLE_DEVICE = "device"
ROLE_ATTACKER = "attacker"
_ROLES = (ROLE_MANAGEMENT, ROLE_SECURITY, ROLE_DEVICE, ROLE_ATTACKER)

_STRATEGIES = ("own_chip", "replay")

_ACTIONS = ("enroll", "spoof", "build_tree", "mine", "rotate", "sweep",
            "tamper")


@dataclass(frozen=True)
class ChipSpec:
    """Manufacturing order for one chip."""

    name: str
    seed: int
    rows: int
    mean_failures: float
    redundancy_rows: int
    min_failures: int = 1

    def geometry(self) -> ChipGeometry:
        return ChipGeometry(rows=self.rows,
                            redundancy_rows=self.redundancy_rows)

    def model(self) -> FailureModel:
        return FailureModel(mean_failures=self.mean_failures,
                            min_failures=self.min_failures)


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: str
    chip: str | None = None
    claims: str | None = None
    strategy: str = "own_chip"
    blocked: bool = False


@dataclass(frozen=True)
class ScheduleItem:
    tick: int
    action: str
    args: Mapping[str, object]
    line_no: int


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    difficulty: int
    modulus_bits: int
    column: int
    chips: Mapping[str, ChipSpec]
    nodes: Mapping[str, NodeSpec]
    topology: tuple[tuple[str, str], ...]
    schedule: tuple[ScheduleItem, ...]
    management: str
    security: str


def _parse_bool(raw: str, where: str) -> bool:
    lowered = raw.lower()
    if lowered in ("yes", "true", "1"):
        return True
    if lowered in ("no", "false", "0"):
        return False
    raise ConfigInvalid(f"{where}: expected yes/no, got {raw!r}")


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigInvalid(f"{where}: expected integer, got {raw!r}") from None


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigInvalid(f"{where}: expected number, got {raw!r}") from None


def _split_options(parts: Sequence[str], where: str) -> dict[str, str]:
    options = {}
    for part in parts:
        if "=" not in part:
            raise ConfigInvalid(f"{where}: expected key=value, got {part!r}")
        key, _, value = part.partition("=")
        if not key or not value:
            raise ConfigInvalid(f"{where}: malformed option {part!r}")
        if key in options:
            raise ConfigInvalid(f"{where}: duplicate option {key!r}")
        options[key] = value
    return options


_PARAM_KEYS = ("difficulty", "modulus_bits", "column", "y", "lambda",
               "redundancy", "min_failures")


def parse_scenario(text: str, name: str = "<config>") -> ScenarioConfig:
    """Parse and validate a scenario config; errors carry line numbers."""
    params: dict[str, str] = {}
    chip_lines: list[tuple[int, str]] = []
    node_lines: list[tuple[int, str]] = []
    topology_lines: list[tuple[int, str]] = []
    schedule_lines: list[tuple[int, str]] = []
    buckets = {
        "params": None,  # handled inline
        "chips": chip_lines,
        "nodes": node_lines,
        "topology": topology_lines,
        "schedule": schedule_lines,
    }

    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in buckets:
                raise ConfigInvalid(
                    f"line {line_no}: unknown section [{section}]")
            continue
        if section is None:
            raise ConfigInvalid(
                f"line {line_no}: content before any [section] header")
        if section == "params":
            if "=" not in line:
                raise ConfigInvalid(
                    f"line {line_no}: params need key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _PARAM_KEYS:
                raise ConfigInvalid(
                    f"line {line_no}: unknown parameter {key!r}")
            if key in params:
                raise ConfigInvalid(f"line {line_no}: duplicate parameter {key!r}")
            params[key] = value
        else:
            buckets[section].append((line_no, line))

    difficulty = _parse_int(params.get("difficulty", "8"), "params.difficulty")
    modulus_bits = _parse_int(params.get("modulus_bits", "512"),
                              "params.modulus_bits")
    column = _parse_int(params.get("column", "0"), "params.column")
    default_rows = _parse_int(params.get("y", "2000"), "params.y")
    default_lambda = _parse_float(params.get("lambda", "10"), "params.lambda")
    default_redundancy = _parse_int(params.get("redundancy", "20"),
                                    "params.redundancy")
    default_min = _parse_int(params.get("min_failures", "1"),
                             "params.min_failures")
    if not 0 <= difficulty <= 32:
        raise ConfigInvalid("params.difficulty must be in [0, 32]")
    if modulus_bits not in (512, 1024, 2048):
        raise ConfigInvalid("params.modulus_bits must be 512, 1024, or 2048")

    chips: dict[str, ChipSpec] = {}
    for line_no, line in chip_lines:
        parts = line.split()
        where = f"line {line_no}"
        chip_name = parts[0]
        if chip_name in chips:
            raise ConfigInvalid(f"{where}: duplicate chip {chip_name!r}")
        options = _split_options(parts[1:], where)
        unknown = set(options) - {"seed", "y", "lambda", "redundancy",
                                  "min_failures"}
        if unknown:
            raise ConfigInvalid(f"{where}: unknown chip options {sorted(unknown)}")
        if "seed" not in options:
            raise ConfigInvalid(f"{where}: chip {chip_name!r} needs seed=")
        chips[chip_name] = ChipSpec(
            name=chip_name,
            seed=_parse_int(options["seed"], where),
            rows=_parse_int(options.get("y", str(default_rows)), where),
            mean_failures=_parse_float(options.get("lambda",
                                                   str(default_lambda)), where),
            redundancy_rows=_parse_int(options.get("redundancy",
                                                   str(default_redundancy)),
                                       where),
            min_failures=_parse_int(options.get("min_failures",
                                                str(default_min)), where),
        )

    nodes: dict[str, NodeSpec] = {}
    chip_owner: dict[str, str] = {}
    for line_no, line in node_lines:
        parts = line.split()
        where = f"line {line_no}"
        node_name = parts[0]
        if node_name in nodes:
            raise ConfigInvalid(f"{where}: duplicate node {node_name!r}")
        options = _split_options(parts[1:], where)
        unknown = set(options) - {"role", "chip", "claims", "strategy",
                                  "blocked"}
        if unknown:
            raise ConfigInvalid(f"{where}: unknown node options {sorted(unknown)}")
        role = options.get("role")
        if role not in _ROLES:
            raise ConfigInvalid(f"{where}: node {node_name!r} needs "
                                f"role= one of {', '.join(_ROLES)}")
        chip_ref = options.get("chip")
        if chip_ref is not None and chip_ref not in chips:
            raise ConfigInvalid(f"{where}: unknown chip {chip_ref!r}")
        if chip_ref is not None:
            if chip_ref in chip_owner:
                raise ConfigInvalid(
                    f"{where}: chip {chip_ref!r} already held by "
                    f"{chip_owner[chip_ref]!r}")
            chip_owner[chip_ref] = node_name
        if role == ROLE_DEVICE and chip_ref is None:
            raise ConfigInvalid(f"{where}: device {node_name!r} needs chip=")
        if role in (ROLE_MANAGEMENT, ROLE_SECURITY) and chip_ref is not None:
            raise ConfigInvalid(f"{where}: {role} node holds no device chip")
        strategy = options.get("strategy", "own_chip")
        if strategy not in _STRATEGIES:
            raise ConfigInvalid(f"{where}: strategy must be one of "
                                f"{', '.join(_STRATEGIES)}")
        claims = options.get("claims")
        if claims is not None and role != ROLE_ATTACKER:
            raise ConfigInvalid(f"{where}: only attackers claim other nodes")
        nodes[node_name] = NodeSpec(
            name=node_name, role=role, chip=chip_ref, claims=claims,
            strategy=strategy,
            blocked=_parse_bool(options.get("blocked", "no"), where),
        )

    managers = [n for n in nodes.values() if n.role == ROLE_MANAGEMENT]
    securities = [n for n in nodes.values() if n.role == ROLE_SECURITY]
    if len(managers) != 1:
        raise ConfigInvalid("config needs exactly one management node, "
                            f"found {len(managers)}")
    if len(securities) != 1:
        raise ConfigInvalid("config needs exactly one security node, "
                            f"found {len(securities)}")
    for spec in nodes.values():
        if spec.claims is not None and spec.claims not in nodes:
            raise ConfigInvalid(f"node {spec.name!r} claims unknown node "
                                f"{spec.claims!r}")

    topology: list[tuple[str, str]] = []
    for line_no, line in topology_lines:
        where = f"line {line_no}"
        if "->" not in line:
            raise ConfigInvalid(f"{where}: topology lines look like 'a -> b'")
        src, _, dst = line.partition("->")
        src, dst = src.strip(), dst.strip()
        for endpoint in (src, dst):
            if endpoint not in nodes:
                raise ConfigInvalid(f"{where}: unknown node {endpoint!r}")
            if nodes[endpoint].role != ROLE_DEVICE:
                raise ConfigInvalid(f"{where}: transfer endpoints must be "
                                    f"devices, {endpoint!r} is "
                                    f"{nodes[endpoint].role}")
        if src == dst:
            raise ConfigInvalid(f"{where}: self transfer {src!r}")
        if (src, dst) in topology:
            raise ConfigInvalid(f"{where}: duplicate edge {src} -> {dst}")
        topology.append((src, dst))

    schedule: list[ScheduleItem] = []
    last_tick = 0
    for line_no, line in schedule_lines:
        where = f"line {line_no}"
        parts = line.split()
        if len(parts) < 2:
            raise ConfigInvalid(f"{where}: schedule lines are 'TICK ACTION ...'")
        tick = _parse_int(parts[0], where)
        if tick < 1:
            raise ConfigInvalid(f"{where}: ticks start at 1")
        if tick < last_tick:
            raise ConfigInvalid(f"{where}: ticks must be non-decreasing")
        last_tick = tick
        action, rest = parts[1], parts[2:]
        if action not in _ACTIONS:
            raise ConfigInvalid(f"{where}: unknown action {action!r}")
        args = _parse_action_args(action, rest, nodes, where)
        schedule.append(ScheduleItem(tick, action, args, line_no))

    return ScenarioConfig(
        name=name, difficulty=difficulty, modulus_bits=modulus_bits,
        column=column, chips=chips, nodes=nodes,
        topology=tuple(topology), schedule=tuple(schedule),
        management=managers[0].name, security=securities[0].name,
    )


def _parse_action_args(action: str, rest: Sequence[str],
                       nodes: Mapping[str, NodeSpec], where: str):
    def need(count: int, usage: str):
        if len(rest) < count:
            raise ConfigInvalid(f"{where}: usage: {usage}")

    def node_of_role(name: str, *roles: str) -> str:
        if name not in nodes:
            raise ConfigInvalid(f"{where}: unknown node {name!r}")
        if nodes[name].role not in roles:
            raise ConfigInvalid(f"{where}: {name!r} must be "
                                f"{' or '.join(roles)}, is {nodes[name].role}")
        return name

    if action == "enroll":
        need(1, "TICK enroll NODE")
        return {"node": node_of_role(rest[0], ROLE_DEVICE, ROLE_ATTACKER)}
    if action == "spoof":
        need(2, "TICK spoof ATTACKER VICTIM")
        return {"attacker": node_of_role(rest[0], ROLE_ATTACKER),
                "victim": node_of_role(rest[1], ROLE_DEVICE)}
    if action == "mine":
        if rest:
            difficulty = _parse_int(rest[0], where)
            if not 0 <= difficulty <= 32:
                raise ConfigInvalid(f"{where}: difficulty must be in [0, 32]")
            return {"difficulty": difficulty}
        return {}
    if action == "rotate":
        need(1, "TICK rotate NEW_STATE [offline=a,b]")
        args: dict[str, object] = {"state": _parse_int(rest[0], where)}
        if args["state"] < 0:
            raise ConfigInvalid(f"{where}: state index must be >= 0")
        if len(rest) > 1:
            options = _split_options(rest[1:], where)
            if set(options) - {"offline"}:
                raise ConfigInvalid(f"{where}: rotate accepts only offline=")
            offline = tuple(
                node_of_role(n.strip(), ROLE_DEVICE, ROLE_ATTACKER)
                for n in options["offline"].split(",") if n.strip())
            args["offline"] = offline
        return args
    if action == "tamper":
        need(2, "TICK tamper NODE seed=N")
        options = _split_options(rest[1:], where)
        if set(options) != {"seed"}:
            raise ConfigInvalid(f"{where}: tamper needs exactly seed=N")
        return {"node": node_of_role(rest[0], ROLE_DEVICE),
                "seed": _parse_int(options["seed"], where)}
    # build_tree and sweep take no arguments
    if rest:
        raise ConfigInvalid(f"{where}: {action} takes no arguments")
    return {}


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, name=str(path))


def bundled_scenario(name: str) -> ScenarioConfig:
    """Load a scenario shipped inside the package."""
    root = importlib.resources.files("chipchain") / "scenarios"
    resource = root / f"{name}.cfg"
    if not resource.is_file():
        known = sorted(p.name[:-4] for p in root.iterdir()
                       if p.name.endswith(".cfg"))
        raise ConfigInvalid(f"no bundled scenario {name!r}; "
                            f"available: {', '.join(known)}")
    return parse_scenario(resource.read_text(encoding="utf-8"), name=name)


def list_bundled_scenarios() -> list[str]:
    root = importlib.resources.files("chipchain") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir()
                  if p.name.endswith(".cfg"))


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    fields: tuple[tuple[str, str], ...]

    def to_record(self) -> str:
        parts = [f"tick={self.tick}", f"kind={self.kind}"]
        parts.extend(f"{key}={value}" for key, value in self.fields)
        return " ".join(parts)


@dataclass
class _NetworkNode:
    spec: NodeSpec
    chip: SimulatedChip | None = None
    address: PublicKey | None = None


@dataclass(frozen=True)
class EventLog:
    """Immutable outcome of one scenario run."""

    scenario: str
    seed: int
    difficulty: int
    management: str
    security: str
    events: tuple[Event, ...]
    chain: tuple[Block, ...]
    members: tuple[str, ...]
    admitted: tuple[str, ...]
    denied: tuple[str, ...]
    evicted: tuple[tuple[int, str], ...]
    rejections: int
    state_index: int
    root_hash: bytes | None

    def to_records(self) -> list[str]:
        return [event.to_record() for event in self.events]

    def chain_ok(self) -> bool:
        return verify_chain(self.chain, self.difficulty)

    def final_line(self) -> str:
        return (f"chain_length={len(self.chain)} "
                f"verified={'yes' if self.chain_ok() else 'no'} "
                f"members={len(self.members)} "
                f"evictions={len(self.evicted)} "
                f"rejections={self.rejections}")

    def summary(self) -> str:
        lines = [
            f"scenario {self.scenario} (seed {self.seed})",
            f"  events:     {len(self.events)}",
            f"  admitted:   {', '.join(self.admitted) or '-'}",
            f"  denied:     {', '.join(self.denied) or '-'}",
            f"  members:    {', '.join(self.members) or '-'}",
            f"  evicted:    "
            f"{', '.join(f'{n}@{t}' for t, n in self.evicted) or '-'}",
            f"  rejections: {self.rejections}",
            f"  state:      {self.state_index}",
            f"  chain:      {len(self.chain)} blocks, "
            f"{'verified' if self.chain_ok() else 'BROKEN'} "
            f"at difficulty {self.difficulty}",
        ]
        if self.root_hash is not None:
            lines.append(f"  tree root:  {self.root_hash.hex()[:16]}")
        lines.append(f"  {self.final_line()}")
        return "\n".join(lines)


def check_invariants(log: EventLog) -> list[str]:
    """Structural violations in a finished run; empty means healthy."""
    problems = []
    if not log.chain_ok():
        problems.append("chain failed verification")
    last_tick = 0
    for event in log.events:
        if event.tick < last_tick:
            problems.append(f"event ticks go backward at {event.to_record()}")
        last_tick = event.tick
        fields = dict(event.fields)
        if event.kind in ("Verdict", "Evict") \
                and fields.get("actor") != log.management:
            problems.append(f"{event.kind} issued by non-management actor "
                            f"{fields.get('actor')!r}")
        if event.kind == "Rotate" and fields.get("actor") != log.security:
            problems.append(f"Rotate issued by non-security actor "
                            f"{fields.get('actor')!r}")
        if event.kind == "Verdict" and fields.get("verdict") == "Accepted":
            problems.append(f"impersonation accepted: {event.to_record()}")
    evicted_names = {name for _, name in log.evicted}
    for member in log.members:
        if member not in log.admitted:
            problems.append(f"member {member!r} was never admitted")
        if member in evicted_names:
            problems.append(f"member {member!r} was evicted but remains")
    return problems


class Simulation:
    """Deterministic event-driven run of one scenario."""

    def __init__(self, config: ScenarioConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.clock = 0
        self.events: list[Event] = []
        self.state = SecurityState(0, True)
        self.chips = {
            spec.name: new_chip(spec.geometry(), spec.model(),
                                seed=spec.seed, chip_id=spec.name)
            for spec in config.chips.values()
        }
        self.nodes = {
            spec.name: _NetworkNode(
                spec, self.chips[spec.chip] if spec.chip else None)
            for spec in config.nodes.values()
        }
        self.members: set[str] = set()
        self.registry: dict[str, PublicKey] = {}
        self.transcripts: dict[str, tuple[bytes, bytes]] = {}
        self.admitted: list[str] = []
        self.denied: list[str] = []
        self.evicted: list[tuple[int, str]] = []
        self.rejections = 0
        self.tree = None
        self.chain: list[Block] = []
        self._emit("Genesis", scenario=config.name, seed=seed,
                   state=self.state.index)

    def _emit(self, kind: str, **fields):
        self.events.append(Event(
            self.clock, kind,
            tuple((key, str(value)) for key, value in fields.items())))

    def _fresh_nonce(self) -> bytes:
        return self.rng.bytes(32)

    def _device_keypair(self, node: _NetworkNode):
        return keypair_for_chip(node.chip, self.state.index,
                                self.config.modulus_bits, self.config.column)

    # -- schedule actions -------------------------------------------------

    def enroll(self, name: str) -> bool:
        """Entry request: blocklist gate, then the physical chip audit."""
        node = self.nodes[name]
        if name in self.members:
            raise ValueError(f"{name} is already a member")
        self._emit("EntryRequest", node=name, role=node.spec.role)
        if node.spec.blocked:
            self._emit("Verdict", actor=self.config.management, node=name,
                       verdict="Denied", reason="blocklist")
            self.denied.append(name)
            return False
        nonce = self._fresh_nonce()
        self._emit("Challenge", actor=self.config.management, node=name,
                   issuer=ISSUER_MANAGEMENT, state=self.state.index,
                   nonce=nonce.hex()[:16])
        if node.chip is None:
            claimed = (self.registry.get(node.spec.claims)
                       if node.spec.claims else None)
            self._emit("Response", node=name,
                       key="none" if claimed is None else key_fingerprint(claimed))
            reason = "no_chip" if claimed is None else "audit_failed"
            self._emit("Verdict", actor=self.config.management, node=name,
                       verdict="Denied", reason=reason)
            self.denied.append(name)
            return False
        pair = self._device_keypair(node)
        claimed_key = pair.public_key
        self._emit("Response", node=name, key=key_fingerprint(claimed_key))
        verdict = crp_audit(node.chip, claimed_key, self.state, nonce,
                            self.config.column)
        if verdict is AuditVerdict.GENUINE:
            self.members.add(name)
            self.registry[name] = claimed_key
            node.address = claimed_key
            self.transcripts[name] = (nonce, sign(pair.secret_key, nonce))
            self.admitted.append(name)
            self._emit("Verdict", actor=self.config.management, node=name,
                       verdict="Admitted")
            return True
        self.denied.append(name)
        self._emit("Verdict", actor=self.config.management, node=name,
                   verdict="Denied", reason="audit_failed")
        return False

    def spoof(self, attacker_name: str, victim_name: str) -> bool:
        """Impersonation attempt against a registered address.

        Returns True when the attempt was (correctly) rejected.
        """
        attacker = self.nodes[attacker_name]
        victim_key = self.registry.get(victim_name)
        if victim_key is None:
            raise ValueError(f"{victim_name} holds no registered address")
        self._emit("EntryRequest", node=attacker_name, claims=victim_name)
        nonce = self._fresh_nonce()
        self._emit("Challenge", actor=self.config.management,
                   node=attacker_name, issuer=ISSUER_MANAGEMENT,
                   state=self.state.index, nonce=nonce.hex()[:16])
        if attacker.spec.strategy == "replay":
            transcript = self.transcripts.get(victim_name)
            if transcript is None:
                signature = bytes(victim_key.byte_size)
                method = "replay_blind"
            else:
                signature = transcript[1]
                method = "replay"
        elif attacker.chip is not None:
            pair = self._device_keypair(attacker)
            signature = sign(pair.secret_key, nonce)
            method = "own_chip"
        else:
            signature = bytes(victim_key.byte_size)
            method = "noise"
        self._emit("Response", node=attacker_name, method=method)
        try:
            accepted = verify(victim_key, nonce, signature)
        except SignatureMalformed:
            accepted = False
        verdict = "Accepted" if accepted else "Rejected"
        if not accepted:
            self.rejections += 1
        self._emit("Verdict", actor=self.config.management,
                   node=attacker_name, verdict=verdict, target=victim_name)
        return not accepted

    def sweep(self) -> tuple[str, ...]:
        """Re-audit every member against its registered address."""
        failed = []
        for name in sorted(self.members):
            node = self.nodes[name]
            nonce = self._fresh_nonce()
            self._emit("Challenge", actor=self.config.management, node=name,
                       issuer=ISSUER_MANAGEMENT, state=self.state.index,
                       nonce=nonce.hex()[:16])
            verdict = crp_audit(node.chip, self.registry[name], self.state,
                                nonce, self.config.column)
            retained = verdict is AuditVerdict.GENUINE
            self._emit("Verdict", actor=self.config.management, node=name,
                       verdict="Retained" if retained else "AuditFailed")
            if retained:
                pair = self._device_keypair(node)
                self.transcripts[name] = (nonce, sign(pair.secret_key, nonce))
            else:
                failed.append(name)
        for name in failed:
            self.members.discard(name)
            self.registry.pop(name, None)
            self.evicted.append((self.clock, name))
            self._emit("Evict", actor=self.config.management, node=name)
        return tuple(failed)

    def rotate(self, new_state_index: int, offline: Iterable[str] = ()):
        """Security node advances the state; members re-bind their keys.

        Members listed offline miss the re-binding, so their registry
        entries go stale and the next sweep removes them.
        """
        if new_state_index == self.state.index:
            raise ValueError("rotation must change the state index")
        offline = set(offline)
        self.state.active = False
        self.state = SecurityState(new_state_index, True)
        self._emit("Rotate", actor=self.config.security,
                   state=new_state_index)
        for name in sorted(self.members):
            if name in offline:
                continue
            pair = self._device_keypair(self.nodes[name])
            self.registry[name] = pair.public_key
            self.nodes[name].address = pair.public_key
        if self.tree is not None:
            self.tree = rotate_state_reproduce(self.tree, new_state_index)
            for src, dst in self.tree.schedule:
                self._emit("Transfer", src=src, dst=dst, state=new_state_index)

    def build_transfer_tree(self):
        """Execute the configured topology among admitted members."""
        if self.tree is not None:
            raise ValueError("transfer tree already built; rotate reproduces it")
        participants = sorted({n for edge in self.config.topology
                               for n in edge})
        if not participants:
            raise ValueError("no transfer topology configured")
        outsiders = [n for n in participants if n not in self.members]
        if outsiders:
            raise ValueError("transfer participants not admitted: "
                             + ", ".join(outsiders))
        chips = {name: self.nodes[name].chip for name in participants}
        self.tree = build_tree(self.config.topology, chips, self.state.index,
                               self.config.modulus_bits, self.config.column)
        for src, dst in self.tree.schedule:
            self._emit("Transfer", src=src, dst=dst, state=self.state.index)

    def mine(self, difficulty: int | None = None):
        """Seal the current root stamp into the next block."""
        if self.tree is None:
            raise ValueError("no transfer tree to stamp")
        bits = self.config.difficulty if difficulty is None else difficulty
        stamp = self.tree.root_stamp()
        prev = self.chain[-1].block_hash if self.chain else ZERO_HASH
        block = mine_block(stamp, prev, bits, nonce_start=0,
                           height=len(self.chain))
        self.chain.append(block)
        self._emit("Mine", height=block.height, difficulty=bits,
                   nonce=block.nonce, attempts=block.nonce + 1,
                   hash=block.block_hash.hex()[:16],
                   root=stamp.root_hash.hex()[:16])
        return block

    def tamper(self, name: str, new_seed: int):
        """Silently swap a device's physical chip (a scripted fault).

        No event fires; the network only notices at the next audit.
        """
        node = self.nodes[name]
        spec = self.config.chips[node.spec.chip]
        node.chip = new_chip(spec.geometry(), spec.model(), seed=new_seed,
                             chip_id=f"{spec.name}-swapped")

    # ----------------------------------------------------------------------

    def _dispatch(self, item: ScheduleItem):
        args = item.args
        if item.action == "enroll":
            self.enroll(args["node"])
        elif item.action == "spoof":
            self.spoof(args["attacker"], args["victim"])
        elif item.action == "build_tree":
            self.build_transfer_tree()
        elif item.action == "mine":
            self.mine(args.get("difficulty"))
        elif item.action == "rotate":
            self.rotate(args["state"], args.get("offline", ()))
        elif item.action == "sweep":
            self.sweep()
        elif item.action == "tamper":
            self.tamper(args["node"], args["seed"])
        else:  # unreachable after config validation
            raise ConfigInvalid(f"unknown action {item.action!r}")

    def run(self) -> EventLog:
        for item in self.config.schedule:
            self.clock = item.tick
            self._dispatch(item)
        return EventLog(
            scenario=self.config.name,
            seed=self.seed,
            difficulty=self.config.difficulty,
            management=self.config.management,
            security=self.config.security,
            events=tuple(self.events),
            chain=tuple(self.chain),
            members=tuple(sorted(self.members)),
            admitted=tuple(self.admitted),
            denied=tuple(self.denied),
            evicted=tuple(self.evicted),
            rejections=self.rejections,
            state_index=self.state.index,
            root_hash=self.tree.root_hash if self.tree else None,
        )


def run_scenario(config: ScenarioConfig, seed: int = 0) -> EventLog:
    """Run one scenario to completion; see Simulation for the verbs."""
    return Simulation(config, seed).run()
