"""Transfer tree of chips and the proof-of-work chain above it.

Enrolled chips pass value along a directed topology that must funnel
into a single final receiver, the root chip.  Each transfer hashes the
sender's public key together with the sender's latest record and signs
the result toward the receiver; each receiver folds incoming record
hashes into its own running digest.  The root chip's fold therefore
commits to every public key and every transfer below it, which is what
makes substituting any chip in the structure detectable.

The root's stamp (public key, final fold, state index) is the payload
miners seal into blocks.  Blocks chain by hash with a leading-zero-bit
difficulty, so rewriting one stamp forces re-mining the whole suffix.
"""

from __future__ import annotations

import dataclasses
import hashlib
import heapq
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ._pow import pow_search
from .chip_model import Prn, SimulatedChip, extract_prn
from .errors import (
    CycleDetected,
    MultipleSinks,
    NonceExhausted,
    StateMismatch,
    UnknownChip,
)
from .identity import (
    ChipKeyPair,
    ISSUER_MANAGEMENT,
    PublicKey,
    derive_keypair,
    make_challenge,
    respond,
    sign,
    verify,
)

ZERO_HASH = bytes(32)
GENESIS_SIGNATURE = b""

MAX_MINING_DIFFICULTY = 32  # desk scale; verification accepts up to 256


def record_hash(sender_key: PublicKey, prev_hash: bytes,
                prev_signature: bytes) -> bytes:
    """Digest binding a sender's key to its latest record."""
    return hashlib.sha256(
        sender_key.to_bytes() + prev_hash + prev_signature).digest()


def signed_payload(receiver_key: PublicKey, hash_value: bytes) -> bytes:
    """What the sender signs: the receiver's key plus the new hash."""
    return receiver_key.to_bytes() + hash_value


def fold_hash(receiver_key: PublicKey, latest: bytes,
              incoming_hash: bytes) -> bytes:
    """Receiver-side accumulation of one incoming record."""
    return hashlib.sha256(
        receiver_key.to_bytes() + latest + incoming_hash).digest()


@dataclass(frozen=True)
class TransactionRecord:
    """One chip-to-chip transfer.

    seq is the record's 1-based position among the receiver's incoming
    records; genesis records use seq 0 and an empty signature.
    """

    sender_key: PublicKey
    receiver_key: PublicKey
    prev_hash: bytes
    prev_signature: bytes
    hash_value: bytes
    signature: bytes
    seq: int


def genesis_record(owner_key: PublicKey) -> TransactionRecord:
    """Self-record every chip starts from; nothing to sign yet."""
    h = record_hash(owner_key, ZERO_HASH, GENESIS_SIGNATURE)
    return TransactionRecord(owner_key, owner_key, ZERO_HASH,
                             GENESIS_SIGNATURE, h, GENESIS_SIGNATURE, 0)


def verify_record(record: TransactionRecord) -> bool:
    """Recompute the record hash and check the transfer signature.

    Genesis records (seq 0) carry no signature; their hash rule and
    self-addressing are all there is to check.
    """
    expected = record_hash(record.sender_key, record.prev_hash,
                           record.prev_signature)
    if record.hash_value != expected:
        return False
    if record.seq == 0:
        return (record.sender_key == record.receiver_key
                and record.prev_hash == ZERO_HASH
                and record.prev_signature == GENESIS_SIGNATURE
                and record.signature == GENESIS_SIGNATURE)
    try:
        return verify(record.sender_key,
                      signed_payload(record.receiver_key, record.hash_value),
                      record.signature)
    except Exception:
        return False


@dataclass
class ChipNode:
    """A chip's position in the transfer tree, with its running fold."""

    node_id: str
    chip: SimulatedChip
    prn: Prn
    keypair: ChipKeyPair
    genesis: TransactionRecord
    incoming: list[TransactionRecord]
    latest_hash: bytes
    latest_signature: bytes

    @property
    def public_key(self) -> PublicKey:
        return self.keypair.public_key


def enroll_chip(node_id: str, chip: SimulatedChip, state_index: int,
                modulus_bits: int = 1024, column: int = 0) -> ChipNode:
    """Derive a chip's keys at the state index and seat it at genesis."""
    prn = extract_prn(chip, column)
    challenge = make_challenge(state_index, ISSUER_MANAGEMENT)
    keypair = derive_keypair(respond(prn, challenge), modulus_bits)
    genesis = genesis_record(keypair.public_key)
    return ChipNode(node_id, chip, prn, keypair, genesis, [],
                    genesis.hash_value, GENESIS_SIGNATURE)


def transfer(sender: ChipNode, receiver: ChipNode,
             state_index: int) -> TransactionRecord:
    """Execute one transfer and fold it into the receiver."""
    if sender.keypair.state_index != state_index:
        raise StateMismatch(
            f"sender {sender.node_id} keyed at state "
            f"{sender.keypair.state_index}, transfer wants {state_index}")
    if receiver.keypair.state_index != state_index:
        raise StateMismatch(
            f"receiver {receiver.node_id} keyed at state "
            f"{receiver.keypair.state_index}, transfer wants {state_index}")
    h = record_hash(sender.public_key, sender.latest_hash,
                    sender.latest_signature)
    signature = sign(sender.keypair.secret_key,
                     signed_payload(receiver.public_key, h))
    record = TransactionRecord(sender.public_key, receiver.public_key,
                               sender.latest_hash, sender.latest_signature,
                               h, signature, len(receiver.incoming) + 1)
    receiver.incoming.append(record)
    receiver.latest_hash = fold_hash(receiver.public_key,
                                     receiver.latest_hash, h)
    receiver.latest_signature = signature
    return record


def _refold(node: ChipNode) -> None:
    latest = node.genesis.hash_value
    for record in node.incoming:
        latest = fold_hash(node.public_key, latest, record.hash_value)
    node.latest_hash = latest
    node.latest_signature = (node.incoming[-1].signature if node.incoming
                             else GENESIS_SIGNATURE)


def _topological_schedule(node_ids: Iterable[str],
                          edges: Sequence[tuple[str, str]]):
    """Deterministic transfer order plus the root (unique sink).

    Ready nodes are processed smallest id first; a node's outgoing
    edges fire together, ordered by receiver id.
    """
    node_ids = sorted(set(node_ids))
    outgoing: dict[str, list[str]] = {n: [] for n in node_ids}
    indegree: dict[str, int] = {n: 0 for n in node_ids}
    for src, dst in edges:
        outgoing[src].append(dst)
        indegree[dst] += 1

    sinks = [n for n in node_ids if not outgoing[n]]
    if not sinks:
        raise CycleDetected("every node sends onward; the topology loops")
    if len(sinks) > 1:
        raise MultipleSinks(
            f"transfer topology must funnel into one chip, found sinks: "
            f"{', '.join(sinks)}")

    schedule: list[tuple[str, str]] = []
    ready = [n for n in node_ids if indegree[n] == 0]
    heapq.heapify(ready)
    processed = 0
    while ready:
        node = heapq.heappop(ready)
        processed += 1
        for dst in sorted(outgoing[node]):
            schedule.append((node, dst))
            indegree[dst] -= 1
            if indegree[dst] == 0:
                heapq.heappush(ready, dst)
    if processed != len(node_ids):
        raise CycleDetected("transfer topology contains a cycle")
    return tuple(schedule), sinks[0]


@dataclass(frozen=True)
class RootStamp:
    """What the root chip publishes for mining."""

    root_key: PublicKey
    root_hash: bytes
    state_index: int

    def to_bytes(self) -> bytes:
        return (self.root_key.to_bytes() + self.root_hash
                + self.state_index.to_bytes(8, "big"))

    @classmethod
    def parse(cls, data: bytes, offset: int = 0) -> tuple["RootStamp", int]:
        key, offset = PublicKey.parse(data, offset)
        if offset + 40 > len(data):
            raise ValueError("truncated root stamp")
        root_hash = data[offset:offset + 32]
        state_index = int.from_bytes(data[offset + 32:offset + 40], "big")
        return cls(key, root_hash, state_index), offset + 40


@dataclass(frozen=True)
class ChipMerkleTree:
    """Executed transfer structure: nodes, schedule, and the root."""

    nodes: Mapping[str, ChipNode]
    edges: tuple[tuple[str, str], ...]
    schedule: tuple[tuple[str, str], ...]
    root_id: str
    state_index: int
    modulus_bits: int
    column: int

    @property
    def root_hash(self) -> bytes:
        return self.nodes[self.root_id].latest_hash

    def root_stamp(self) -> RootStamp:
        root = self.nodes[self.root_id]
        return RootStamp(root.public_key, root.latest_hash, self.state_index)

    def chips(self) -> dict[str, SimulatedChip]:
        return {node_id: node.chip for node_id, node in self.nodes.items()}


def _normalized_edges(topology: Iterable[tuple[str, str]]):
    edges = [(str(a), str(b)) for a, b in topology]
    if len(set(edges)) != len(edges):
        raise ValueError("duplicate edge in transfer topology")
    return tuple(edges)


def build_tree(topology: Iterable[tuple[str, str]],
               chips: Mapping[str, SimulatedChip], state_index: int,
               modulus_bits: int = 1024, column: int = 0) -> ChipMerkleTree:
    """Enroll every chip and run all transfers in deterministic order."""
    edges = _normalized_edges(topology)
    for src, dst in edges:
        for endpoint in (src, dst):
            if endpoint not in chips:
                raise UnknownChip(f"edge endpoint {endpoint!r} has no chip")
    schedule, root_id = _topological_schedule(chips.keys(), edges)
    nodes = {
        node_id: enroll_chip(node_id, chips[node_id], state_index,
                             modulus_bits, column)
        for node_id in sorted(chips)
    }
    for src, dst in schedule:
        transfer(nodes[src], nodes[dst], state_index)
    return ChipMerkleTree(nodes, edges, schedule, root_id, state_index,
                          modulus_bits, column)


def verify_tree(tree: ChipMerkleTree) -> bool:
    """Full structural check: every record, fold, and seat position."""
    for node in tree.nodes.values():
        if node.genesis.receiver_key != node.public_key:
            return False
        if not verify_record(node.genesis):
            return False
        latest = node.genesis.hash_value
        signature = GENESIS_SIGNATURE
        for position, record in enumerate(node.incoming, start=1):
            if record.seq != position:
                return False
            if record.receiver_key != node.public_key:
                return False
            if not verify_record(record):
                return False
            latest = fold_hash(node.public_key, latest, record.hash_value)
            signature = record.signature
        if node.latest_hash != latest or node.latest_signature != signature:
            return False
    return True


def _arrival_index(schedule: Sequence[tuple[str, str]]):
    """Position of each edge's record in its receiver's incoming list."""
    counts: dict[str, int] = {}
    arrival: dict[tuple[str, str], int] = {}
    for src, dst in schedule:
        arrival[(src, dst)] = counts.get(dst, 0)
        counts[dst] = counts.get(dst, 0) + 1
    return arrival


def replace_chip(tree: ChipMerkleTree, node_id: str, new_chip: SimulatedChip,
                 state_index: int):
    """Seat a replacement chip and repair only what its change dirties.

    Returns (new_tree, recomputed_ids).  The replaced node's keys,
    genesis, and incoming signatures change, then the change propagates
    along the schedule through every node downstream toward the root;
    siblings off that path are untouched, which is the repair-cost win
    this structure exists for.
    """
    if node_id not in tree.nodes:
        raise UnknownChip(f"no node {node_id!r} in the tree")
    if state_index != tree.state_index:
        raise StateMismatch(
            f"tree is bound to state {tree.state_index}, not {state_index}")

    nodes = {
        nid: dataclasses.replace(node, incoming=list(node.incoming))
        for nid, node in tree.nodes.items()
    }
    key_owner = {node.public_key: node for node in nodes.values()}

    target = nodes[node_id]
    target.chip = new_chip
    target.prn = extract_prn(new_chip, tree.column)
    challenge = make_challenge(state_index, ISSUER_MANAGEMENT)
    target.keypair = derive_keypair(respond(target.prn, challenge),
                                    tree.modulus_bits)
    target.genesis = genesis_record(target.public_key)

    # senders into the replaced node must re-address their records
    reissued = []
    for record in target.incoming:
        sender = key_owner[record.sender_key]
        signature = sign(sender.keypair.secret_key,
                         signed_payload(target.public_key, record.hash_value))
        reissued.append(dataclasses.replace(
            record, receiver_key=target.public_key, signature=signature))
    target.incoming = reissued
    _refold(target)

    arrival = _arrival_index(tree.schedule)
    dirty = {node_id}
    recomputed = [node_id]
    for src, dst in tree.schedule:
        if src not in dirty:
            continue
        sender, receiver = nodes[src], nodes[dst]
        h = record_hash(sender.public_key, sender.latest_hash,
                        sender.latest_signature)
        signature = sign(sender.keypair.secret_key,
                         signed_payload(receiver.public_key, h))
        position = arrival[(src, dst)]
        receiver.incoming[position] = TransactionRecord(
            sender.public_key, receiver.public_key, sender.latest_hash,
            sender.latest_signature, h, signature, position + 1)
        _refold(receiver)
        if dst not in dirty:
            dirty.add(dst)
            recomputed.append(dst)

    new_tree = ChipMerkleTree(nodes, tree.edges, tree.schedule, tree.root_id,
                              tree.state_index, tree.modulus_bits, tree.column)
    return new_tree, recomputed


def rotate_state_reproduce(tree: ChipMerkleTree,
                           new_state_index: int) -> ChipMerkleTree:
    """Re-derive every key at a new state index and replay the tree.

    Same chips, same topology, entirely new keys and folds.  Because
    everything is deterministic, rotating back to the old index
    reproduces the old tree exactly.
    """
    if new_state_index == tree.state_index:
        raise ValueError("new state index equals the tree's current index")
    return build_tree(tree.edges, tree.chips(), new_state_index,
                      tree.modulus_bits, tree.column)


@dataclass(frozen=True)
class Block:
    height: int
    nonce: int
    stamp: RootStamp
    prev_block_hash: bytes
    block_hash: bytes

    def to_bytes(self) -> bytes:
        return (struct.pack(">QQ", self.height, self.nonce)
                + self.stamp.to_bytes() + self.prev_block_hash
                + self.block_hash)

    @classmethod
    def parse(cls, data: bytes) -> "Block":
        if len(data) < 16:
            raise ValueError("truncated block header")
        height, nonce = struct.unpack_from(">QQ", data, 0)
        stamp, offset = RootStamp.parse(data, 16)
        if offset + 64 != len(data):
            raise ValueError("block length does not match its stamp")
        prev_block_hash = data[offset:offset + 32]
        block_hash = data[offset + 32:offset + 64]
        return cls(height, nonce, stamp, prev_block_hash, block_hash)


def block_hash(nonce: int, stamp: RootStamp, prev_block_hash: bytes) -> bytes:
    return hashlib.sha256(nonce.to_bytes(8, "big") + stamp.to_bytes()
                          + prev_block_hash).digest()


def leading_zero_bits(digest: bytes) -> int:
    return 8 * len(digest) - int.from_bytes(digest, "big").bit_length()


def mine_block(stamp: RootStamp, prev_block_hash: bytes = ZERO_HASH,
               difficulty_bits: int = 8, nonce_start: int = 0,
               height: int = 0, max_attempts: int | None = None) -> Block:
    """Scan nonces until the block hash clears the difficulty.

    The scan is linear from nonce_start, so mining is deterministic and
    the attempt count is block.nonce - nonce_start + 1.
    """
    if not 0 <= difficulty_bits <= MAX_MINING_DIFFICULTY:
        raise ValueError(
            f"difficulty_bits must be in [0, {MAX_MINING_DIFFICULTY}] for mining")
    body = stamp.to_bytes() + prev_block_hash
    result = pow_search(body, nonce_start, difficulty_bits, max_attempts)
    if result is None:
        raise NonceExhausted(
            f"no qualifying nonce at difficulty {difficulty_bits} "
            f"within the attempt budget")
    nonce, digest, _attempts = result
    return Block(height, nonce, stamp, prev_block_hash, digest)


def verify_chain(blocks: Sequence[Block], difficulty_bits: int) -> bool:
    """Check hashes, difficulty, linkage, and height numbering."""
    prev = ZERO_HASH
    for position, block in enumerate(blocks):
        if block.height != position:
            return False
        if block.prev_block_hash != prev:
            return False
        if block_hash(block.nonce, block.stamp, block.prev_block_hash) \
                != block.block_hash:
            return False
        if leading_zero_bits(block.block_hash) < difficulty_bits:
            return False
        prev = block.block_hash
    return True


def serialize_chain(blocks: Sequence[Block]) -> bytes:
    out = bytearray()
    for block in blocks:
        raw = block.to_bytes()
        out += len(raw).to_bytes(4, "big") + raw
    return bytes(out)


def parse_chain(data: bytes) -> list[Block]:
    blocks = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise ValueError("truncated block length prefix")
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise ValueError("truncated block")
        blocks.append(Block.parse(data[offset:offset + length]))
        offset += length
    return blocks


def save_chain(blocks: Sequence[Block], path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_chain(blocks))


def load_chain(path) -> list[Block]:
    with open(path, "rb") as fh:
        return parse_chain(fh.read())
