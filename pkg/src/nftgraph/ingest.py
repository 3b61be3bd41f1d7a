"""Decode exported Ethereum event logs into a normalized NFT transfer file.

Raw inputs are JSONL (one log object per line) or CSV with the same columns:
block_number, block_timestamp, transaction_hash, log_index, address, topics,
data.  In CSV form `topics` is pipe-separated.  The output is the canonical
interchange file of the whole package: a CSV sorted by
(timestamp, block_number, log_index) with header

    timestamp,block_number,tx_hash,log_index,contract,from,to,token_id
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .errors import MalformedRecord

NULL_ADDRESS = "0x" + "00" * 20

# keccak256("Transfer(address,address,uint256)") -- topics[0] of every
# ERC-721/ERC-20 Transfer log.
TRANSFER_TOPIC = "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"

# Block timestamps earlier than this (or later than the ingest wall clock)
# are rejected as malformed.
EARLIEST_TIMESTAMP = 1438269973

NORMALIZED_HEADER = [
    "timestamp", "block_number", "tx_hash", "log_index",
    "contract", "from", "to", "token_id",
]

RAW_CSV_COLUMNS = [
    "block_number", "block_timestamp", "transaction_hash",
    "log_index", "address", "topics", "data",
]

_HEX_RE = re.compile(r"0x[0-9a-f]*\Z")


@dataclass(frozen=True)
class RawLog:
    block_number: int
    block_timestamp: int
    tx_hash: str
    log_index: int
    contract: str
    topics: tuple[str, ...]
    data: str


@dataclass(frozen=True)
class TransferEvent:
    block_number: int
    timestamp: int
    tx_hash: str
    log_index: int
    contract: str
    from_addr: str
    to_addr: str
    token_id: int

    @property
    def is_mint(self) -> bool:
        return self.from_addr == NULL_ADDRESS

    @property
    def is_burn(self) -> bool:
        return self.to_addr == NULL_ADDRESS


class SkipReason(Enum):
    WRONG_TOPIC = "wrong_topic"
    ARITY = "arity"


@dataclass(frozen=True)
class Skip:
    reason: SkipReason


@dataclass(frozen=True)
class ContractClass:
    contract: str
    erc721: bool
    log_count: int


@dataclass
class IngestStats:
    records_read: int = 0
    transfers_emitted: int = 0
    skipped_wrong_topic: int = 0
    skipped_non_conforming: int = 0
    skipped_duplicate: int = 0
    skipped_malformed: int = 0

    def balances(self) -> bool:
        return self.records_read == (
            self.transfers_emitted + self.skipped_wrong_topic
            + self.skipped_non_conforming + self.skipped_duplicate
            + self.skipped_malformed
        )

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _norm_hex(value, nbytes: int, what: str) -> str:
    if not isinstance(value, str):
        raise MalformedRecord(f"{what} not a string")
    v = value.strip().lower()
    if not v.startswith("0x"):
        v = "0x" + v
    if len(v) != 2 + 2 * nbytes:
        raise MalformedRecord(f"{what} length")
    if not _HEX_RE.match(v):
        raise MalformedRecord(f"{what} not hex")
    return v


def _norm_data(value) -> str:
    if value is None:
        return "0x"
    if not isinstance(value, str):
        raise MalformedRecord("data not a string")
    v = value.strip().lower()
    if not v.startswith("0x"):
        v = "0x" + v
    if len(v) % 2 != 0 or not _HEX_RE.match(v):
        raise MalformedRecord("data not hex")
    return v


def _norm_int(value, what: str) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise MalformedRecord(f"{what} not numeric") from None
    if n < 0:
        raise MalformedRecord(f"{what} negative")
    return n


def parse_log_line(line: str, *, now: int | None = None) -> RawLog:
    """Parse one raw JSONL or CSV line into a RawLog.

    Raises MalformedRecord for missing keys, bad hex lengths, non-numeric
    block fields or out-of-range timestamps.
    """
    stripped = line.strip()
    if not stripped:
        raise MalformedRecord("empty line")
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError:
            raise MalformedRecord("bad json") from None
        missing = [k for k in RAW_CSV_COLUMNS if k not in obj]
        if missing:
            raise MalformedRecord(f"missing key {missing[0]}")
        topics = obj["topics"]
        if not isinstance(topics, list):
            raise MalformedRecord("topics not a list")
    else:
        row = next(csv.reader([stripped]))
        if len(row) != len(RAW_CSV_COLUMNS):
            raise MalformedRecord("column count")
        obj = dict(zip(RAW_CSV_COLUMNS, row))
        topics = [t for t in obj["topics"].split("|") if t]

    if not 1 <= len(topics) <= 4:
        raise MalformedRecord("topic count")
    ts = _norm_int(obj["block_timestamp"], "block_timestamp")
    upper = now if now is not None else int(time.time())
    if ts < EARLIEST_TIMESTAMP or ts > upper:
        raise MalformedRecord("timestamp out of range")
    return RawLog(
        block_number=_norm_int(obj["block_number"], "block_number"),
        block_timestamp=ts,
        tx_hash=_norm_hex(obj["transaction_hash"], 32, "tx_hash"),
        log_index=_norm_int(obj["log_index"], "log_index"),
        contract=_norm_hex(obj["address"], 20, "address"),
        topics=tuple(_norm_hex(t, 32, "topic") for t in topics),
        data=_norm_data(obj.get("data")),
    )


def decode_transfer(raw: RawLog) -> TransferEvent | Skip:
    """Decode a RawLog into a TransferEvent, or Skip it.

    A conforming ERC-721 Transfer carries 4 topics: the event hash plus
    indexed from/to/tokenId.  The 3-topic variant is the ERC-20 shape
    (value lives in `data`) and marks the contract as non-conforming.
    """
    if raw.topics[0] != TRANSFER_TOPIC:
        return Skip(SkipReason.WRONG_TOPIC)
    if len(raw.topics) != 4:
        return Skip(SkipReason.ARITY)
    from_addr = "0x" + raw.topics[1][-40:]
    to_addr = "0x" + raw.topics[2][-40:]
    if from_addr == NULL_ADDRESS and to_addr == NULL_ADDRESS:
        raise MalformedRecord("null-to-null transfer")
    return TransferEvent(
        block_number=raw.block_number,
        timestamp=raw.block_timestamp,
        tx_hash=raw.tx_hash,
        log_index=raw.log_index,
        contract=raw.contract,
        from_addr=from_addr,
        to_addr=to_addr,
        token_id=int(raw.topics[3], 16),
    )


def classify_contracts(
    outcomes: Iterable[tuple[str, TransferEvent | Skip]],
) -> list[ContractClass]:
    """Classify every contract that emitted at least one Transfer-topic log.

    A single 3-topic Transfer log disqualifies the whole contract.
    Non-Transfer logs carry no information here and are ignored.
    """
    counts: dict[str, int] = {}
    violated: set[str] = set()
    for contract, outcome in outcomes:
        if isinstance(outcome, TransferEvent):
            counts[contract] = counts.get(contract, 0) + 1
        elif outcome.reason is SkipReason.ARITY:
            counts[contract] = counts.get(contract, 0) + 1
            violated.add(contract)
    return [
        ContractClass(contract=c, erc721=c not in violated, log_count=n)
        for c, n in sorted(counts.items())
    ]


def _iter_raw_lines(path: str) -> Iterator[str]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            # Tolerate (and skip) a CSV header row.
            if line.split(",", 1)[0].strip() == "block_number":
                continue
            yield line


def normalize_stream(
    inputs: Sequence[str],
    output: str,
    *,
    now: int | None = None,
) -> tuple[IngestStats, list[ContractClass]]:
    """Run the full ingest pass over raw log files.

    Survivors are deduplicated on (tx_hash, log_index) keeping the first
    occurrence, restricted to conforming contracts, sorted by
    (timestamp, block_number, log_index) and written as normalized CSV.
    On I/O failure the partial output file is removed.
    """
    stats = IngestStats()
    wall = now if now is not None else int(time.time())
    seen: set[tuple[str, int]] = set()
    events: list[TransferEvent] = []
    arity_by_contract: dict[str, int] = {}
    transfer_counts: dict[str, int] = {}

    for path in inputs:
        for line in _iter_raw_lines(path):
            stats.records_read += 1
            try:
                raw = parse_log_line(line, now=wall)
            except MalformedRecord:
                stats.skipped_malformed += 1
                continue
            key = (raw.tx_hash, raw.log_index)
            if key in seen:
                stats.skipped_duplicate += 1
                continue
            seen.add(key)
            try:
                outcome = decode_transfer(raw)
            except MalformedRecord:
                stats.skipped_malformed += 1
                continue
            if isinstance(outcome, Skip):
                if outcome.reason is SkipReason.WRONG_TOPIC:
                    stats.skipped_wrong_topic += 1
                else:
                    stats.skipped_non_conforming += 1
                    arity_by_contract[raw.contract] = (
                        arity_by_contract.get(raw.contract, 0) + 1)
                continue
            transfer_counts[raw.contract] = transfer_counts.get(raw.contract, 0) + 1
            events.append(outcome)

    bad_contracts = set(arity_by_contract)
    survivors = []
    for ev in events:
        if ev.contract in bad_contracts:
            stats.skipped_non_conforming += 1
        else:
            survivors.append(ev)
    survivors.sort(key=lambda e: (e.timestamp, e.block_number, e.log_index))
    stats.transfers_emitted = len(survivors)

    classes = []
    for contract in sorted(set(transfer_counts) | bad_contracts):
        n = transfer_counts.get(contract, 0) + arity_by_contract.get(contract, 0)
        classes.append(ContractClass(contract=contract,
                                     erc721=contract not in bad_contracts,
                                     log_count=n))
    try:
        write_transfers(output, survivors)
    except OSError:
        if os.path.exists(output):
            os.remove(output)
        raise
    return stats, classes


def write_transfers(path: str, events: Iterable[TransferEvent]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NORMALIZED_HEADER)
        for e in events:
            w.writerow([e.timestamp, e.block_number, e.tx_hash, e.log_index,
                        e.contract, e.from_addr, e.to_addr, str(e.token_id)])


def read_transfers(source) -> Iterator[TransferEvent]:
    """Yield TransferEvents from a normalized CSV path or open text stream."""
    if isinstance(source, (str, os.PathLike)):
        fh = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        fh, close = source, False
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and header != NORMALIZED_HEADER:
            raise MalformedRecord("bad normalized header")
        for row in reader:
            if not row:
                continue
            if len(row) != len(NORMALIZED_HEADER):
                raise MalformedRecord("bad normalized row")
            yield TransferEvent(
                timestamp=int(row[0]), block_number=int(row[1]),
                tx_hash=row[2], log_index=int(row[3]), contract=row[4],
                from_addr=row[5], to_addr=row[6], token_id=int(row[7]))
    finally:
        if close:
            fh.close()


def transfers_to_csv_string(events: Iterable[TransferEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(NORMALIZED_HEADER)
    for e in events:
        w.writerow([e.timestamp, e.block_number, e.tx_hash, e.log_index,
                    e.contract, e.from_addr, e.to_addr, str(e.token_id)])
    return buf.getvalue()
