"""Simulated memory chip with a spare-row redundancy array.

Mass-produced memory parts ship with a few failed rows in the regular
cell array.  A row decoder hides them: each failure row is permanently
swapped to a spare row in a small redundancy array, and the swap map is
burned into the part at test time.  Those failure-row addresses are
random per part and fixed for its lifetime, which makes them usable as
a per-chip fingerprint.

The fingerprint is read out with two writes and one read on a column:

1. normal-mode write of 0: lands on regular cells, except that failure
   rows are rerouted to their spare rows;
2. special-mode write of 1: addresses the redundancy array directly,
   setting every spare cell;
3. normal-mode read: non-failure rows return the regular cell (0),
   failure rows return their spare cell (1).

The positions that read 1 are exactly the failure rows.  Running the
writes in the other order leaves the spares rewritten to 0 and the
readout is all zero, so the order is part of the protocol.  The row
set, packed in a canonical byte form, is the chip's physical random
number (PRN).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CapacityExceeded,
    ColumnOutOfRange,
    GeometryInvalid,
    PreprocessMissing,
    UnknownGeneration,
)

ACCESS_NORMAL = "normal"
ACCESS_SPECIAL = "special"

_MBIT = 1 << 20
_GBIT = 1 << 30

# Capacity ladder with row counts anchored at 2000 rows for a 4 Mb part
# and 100000 rows for a 16 Gb part; intermediate generations are placed
# geometrically between the anchors.
_GENERATION_CAPACITY: tuple[tuple[str, int], ...] = (
    ("4 Mb", 4 * _MBIT),
    ("16 Mb", 16 * _MBIT),
    ("64 Mb", 64 * _MBIT),
    ("128 Mb", 128 * _MBIT),
    ("256 Mb", 256 * _MBIT),
    ("512 Mb", 512 * _MBIT),
    ("1 Gb", 1 * _GBIT),
    ("2 Gb", 2 * _GBIT),
    ("4 Gb", 4 * _GBIT),
    ("8 Gb", 8 * _GBIT),
    ("16 Gb", 16 * _GBIT),
)

_ROWS_SMALLEST = 2_000
_ROWS_LARGEST = 100_000


def _interpolated_rows(capacity_bits: int) -> int:
    low = 4 * _MBIT
    high = 16 * _GBIT
    exponent = math.log(_ROWS_LARGEST / _ROWS_SMALLEST) / math.log(high / low)
    return round(_ROWS_SMALLEST * (capacity_bits / low) ** exponent)


GENERATION_ROWS: Mapping[str, int] = MappingProxyType(
    {name: _interpolated_rows(cap) for name, cap in _GENERATION_CAPACITY}
)
GENERATION_CAPACITY: Mapping[str, int] = MappingProxyType(dict(_GENERATION_CAPACITY))
GENERATIONS: tuple[str, ...] = tuple(name for name, _ in _GENERATION_CAPACITY)


@dataclass(frozen=True)
class ChipGeometry:
    """Static layout of one simulated part.

    rows is the regular-array row count of a column block, cols the
    number of independent columns, and redundancy_rows the size of the
    spare array that absorbs failure rows.  block_count is the number
    of column blocks; the simulator models a single block.
    """

    rows: int
    cols: int = 8
    block_count: int = 1
    redundancy_rows: int = 20

    def __post_init__(self):
        if self.rows < 1:
            raise GeometryInvalid(f"rows must be positive, got {self.rows}")
        if self.cols < 1:
            raise GeometryInvalid(f"cols must be positive, got {self.cols}")
        if self.block_count != 1:
            raise GeometryInvalid(
                "only single-block chips are simulated, "
                f"got block_count={self.block_count}")
        if self.redundancy_rows < 0:
            raise GeometryInvalid("redundancy_rows must be >= 0")
        if self.redundancy_rows > self.rows:
            raise GeometryInvalid(
                f"redundancy_rows={self.redundancy_rows} exceeds rows={self.rows}")


def generation_geometry(name: str) -> ChipGeometry:
    """Geometry preset for a named capacity generation."""
    if name not in GENERATION_ROWS:
        raise UnknownGeneration(f"unknown generation {name!r}; "
                                f"known: {', '.join(GENERATIONS)}")
    return ChipGeometry(rows=GENERATION_ROWS[name])


@dataclass(frozen=True)
class FailureModel:
    """Manufacturing defect model.

    The failure-row count of a part is Poisson(mean_failures) clipped
    to [min_failures, redundancy_rows].  redundancy_failure_rate is the
    chance that an individual spare row is itself unusable, in which
    case the swap map routes around it.
    """

    mean_failures: float = 10.0
    min_failures: int = 1
    redundancy_failure_rate: float = 0.0

    def __post_init__(self):
        if self.mean_failures <= 0:
            raise ValueError("mean_failures must be positive")
        if self.min_failures < 0:
            raise ValueError("min_failures must be >= 0")
        if not 0.0 <= self.redundancy_failure_rate < 1.0:
            raise ValueError("redundancy_failure_rate must be in [0, 1)")


def prn_canonical_bytes(rows: Sequence[int], total_rows: int) -> bytes:
    """Canonical packed form: total row count, then the sorted failure
    row indices, each as a 4-byte big-endian word."""
    ordered = sorted(int(r) for r in rows)
    out = bytearray(struct.pack(">II", total_rows, len(ordered)))
    for r in ordered:
        out += struct.pack(">I", r)
    return bytes(out)


@dataclass(frozen=True)
class Prn:
    """A chip's physical random number: its failure-row set."""

    chip_id: str
    column: int
    rows: tuple[int, ...]
    total_rows: int

    @cached_property
    def canonical_bytes(self) -> bytes:
        return prn_canonical_bytes(self.rows, self.total_rows)


class SimulatedChip:
    """One manufactured part: geometry, hidden failure map, cell state.

    Cell arrays are materialized per column on first touch.  The
    failure rows and the swap map are fixed at construction, the way a
    real part fixes them at production test.
    """

    def __init__(self, chip_id: str, geometry: ChipGeometry,
                 failure_rows: Iterable[int],
                 swap_map: Mapping[int, int] | None = None,
                 seed: int | None = None):
        rows = tuple(sorted(int(r) for r in failure_rows))
        if len(set(rows)) != len(rows):
            raise ValueError("failure rows must be distinct")
        if rows and (rows[0] < 0 or rows[-1] >= geometry.rows):
            raise ValueError(f"failure row out of range for rows={geometry.rows}")
        if len(rows) > geometry.redundancy_rows:
            raise CapacityExceeded(
                f"{len(rows)} failure rows exceed "
                f"{geometry.redundancy_rows} spare rows")
        if swap_map is None:
            swap_map = {r: i for i, r in enumerate(rows)}
        else:
            swap_map = {int(k): int(v) for k, v in swap_map.items()}
            if set(swap_map) != set(rows):
                raise ValueError("swap map keys must equal the failure rows")
            targets = set(swap_map.values())
            if len(targets) != len(rows):
                raise ValueError("swap map targets must be distinct")
            if targets and (min(targets) < 0
                            or max(targets) >= geometry.redundancy_rows):
                raise ValueError("swap map target outside the redundancy array")

        self.chip_id = chip_id
        self.geometry = geometry
        self.seed = seed
        self.access_mode = ACCESS_NORMAL
        self._failure_rows = rows
        self._swap_map = swap_map
        self._regular: dict[int, np.ndarray] = {}
        self._redundancy: dict[int, np.ndarray] = {}
        self._normal_written: set[int] = set()
        self._special_written: set[int] = set()

    @property
    def failure_rows(self) -> tuple[int, ...]:
        return self._failure_rows

    @property
    def swap_map(self) -> Mapping[int, int]:
        return MappingProxyType(self._swap_map)

    def _check_column(self, column: int):
        if not 0 <= column < self.geometry.cols:
            raise ColumnOutOfRange(
                f"column {column} outside 0..{self.geometry.cols - 1}")

    def _regular_column(self, column: int) -> np.ndarray:
        arr = self._regular.get(column)
        if arr is None:
            arr = np.zeros(self.geometry.rows, dtype=np.uint8)
            self._regular[column] = arr
        return arr

    def _redundancy_column(self, column: int) -> np.ndarray:
        arr = self._redundancy.get(column)
        if arr is None:
            arr = np.zeros(self.geometry.redundancy_rows, dtype=np.uint8)
            self._redundancy[column] = arr
        return arr

    def __repr__(self):
        return (f"SimulatedChip(chip_id={self.chip_id!r}, "
                f"rows={self.geometry.rows}, "
                f"failures={len(self._failure_rows)})")


def new_chip(geometry: ChipGeometry, failure_model: FailureModel | None = None,
             seed: int = 0, chip_id: str | None = None) -> SimulatedChip:
    """Manufacture one part deterministically from a seed.

    Draws the failure-row count from the clipped Poisson of the model,
    places the rows uniformly without replacement, then assigns each to
    a usable spare row.  The same (geometry, model, seed) triple always
    yields the identical part.
    """
    model = failure_model or FailureModel()
    rng = np.random.default_rng(seed)

    count = int(rng.poisson(model.mean_failures))
    count = max(model.min_failures, min(count, geometry.redundancy_rows))
    rows = np.sort(rng.choice(geometry.rows, size=count, replace=False))

    if model.redundancy_failure_rate > 0.0:
        broken = rng.random(geometry.redundancy_rows) < model.redundancy_failure_rate
        usable = [i for i in range(geometry.redundancy_rows) if not broken[i]]
    else:
        usable = list(range(geometry.redundancy_rows))
    if count > len(usable):
        raise CapacityExceeded(
            f"{count} failure rows but only {len(usable)} usable spare rows")
    swap_map = {int(r): usable[i] for i, r in enumerate(rows)}

    return SimulatedChip(chip_id or f"chip-{seed}", geometry,
                         (int(r) for r in rows), swap_map, seed=seed)


def write_column(chip: SimulatedChip, mode: str, column: int,
                 value: int) -> SimulatedChip:
    """Write one bit value to a whole column in the given access mode.

    Normal mode addresses the regular array with the decoder active:
    failure rows are rerouted to their spare rows, so the dead regular
    cells stay untouched.  Special mode addresses the redundancy array
    directly and sets every spare cell of the column.
    """
    if mode not in (ACCESS_NORMAL, ACCESS_SPECIAL):
        raise ValueError(f"mode must be {ACCESS_NORMAL!r} or {ACCESS_SPECIAL!r}")
    if value not in (0, 1):
        raise ValueError("cell value must be 0 or 1")
    chip._check_column(column)
    chip.access_mode = mode
    if mode == ACCESS_NORMAL:
        regular = chip._regular_column(column)
        spare = chip._redundancy_column(column)
        dead = regular[list(chip.failure_rows)].copy() if chip.failure_rows else None
        regular[:] = value
        if dead is not None:
            regular[list(chip.failure_rows)] = dead
        for row in chip.failure_rows:
            spare[chip._swap_map[row]] = value
        chip._normal_written.add(column)
    else:
        chip._redundancy_column(column)[:] = value
        chip._special_written.add(column)
    return chip


def read_column_normal(chip: SimulatedChip, column: int) -> np.ndarray:
    """Read a column through the normal (decoder-active) path.

    Requires both preprocessing writes on the column first; the write
    order decides what comes back, it is not checked here.
    """
    chip._check_column(column)
    if column not in chip._normal_written or column not in chip._special_written:
        raise PreprocessMissing(
            f"column {column} needs a normal-mode and a special-mode write "
            "before it can be read")
    chip.access_mode = ACCESS_NORMAL
    out = chip._regular_column(column).copy()
    spare = chip._redundancy_column(column)
    for row in chip.failure_rows:
        out[row] = spare[chip._swap_map[row]]
    return out


def extract_prn(chip: SimulatedChip, column: int = 0) -> Prn:
    """Run the two-write preprocess on a column and read the PRN out.

    Overwrites the column's contents.  Extraction is repeatable: the
    same chip yields the same PRN every time.
    """
    write_column(chip, ACCESS_NORMAL, column, 0)
    write_column(chip, ACCESS_SPECIAL, column, 1)
    bits = read_column_normal(chip, column)
    rows = tuple(int(r) for r in np.flatnonzero(bits == 1))
    return Prn(chip.chip_id, column, rows, chip.geometry.rows)


def format_chip_fixture(chip: SimulatedChip) -> str:
    """Plain-text record of a part's identity-relevant state."""
    targets = ", ".join(str(chip._swap_map[r]) for r in chip.failure_rows)
    lines = [
        f"chip_id = {chip.chip_id}",
        f"rows = {chip.geometry.rows}",
        f"cols = {chip.geometry.cols}",
        f"redundancy_rows = {chip.geometry.redundancy_rows}",
        f"seed = {'' if chip.seed is None else chip.seed}",
        f"failure_rows = {', '.join(str(r) for r in chip.failure_rows)}",
        f"swap_targets = {targets}",
    ]
    return "\n".join(lines) + "\n"


def parse_chip_fixture(text: str) -> SimulatedChip:
    """Rebuild a part from its fixture record.

    The recorded failure rows are authoritative; nothing is re-sampled.
    """
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"fixture line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    required = ("chip_id", "rows", "redundancy_rows", "failure_rows")
    for key in required:
        if key not in fields:
            raise ValueError(f"fixture missing field {key!r}")

    def int_list(raw: str) -> list[int]:
        return [int(part) for part in raw.split(",") if part.strip()]

    rows = int_list(fields["failure_rows"])
    geometry = ChipGeometry(
        rows=int(fields["rows"]),
        cols=int(fields.get("cols", "8")),
        redundancy_rows=int(fields["redundancy_rows"]),
    )
    targets_raw = fields.get("swap_targets", "")
    if targets_raw:
        targets = int_list(targets_raw)
        if len(targets) != len(rows):
            raise ValueError("swap_targets length must match failure_rows")
        swap_map = dict(zip(sorted(rows), targets))
    else:
        swap_map = None
    seed_raw = fields.get("seed", "")
    return SimulatedChip(fields["chip_id"], geometry, rows, swap_map,
                         seed=int(seed_raw) if seed_raw else None)


def save_chip_fixture(chip: SimulatedChip, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_chip_fixture(chip))


def load_chip_fixture(path) -> SimulatedChip:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_chip_fixture(fh.read())
