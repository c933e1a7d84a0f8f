"""DBC-subset parsing and raw CAN frame <-> physical signal codec.

Supports the two statement types needed to decode drive signals: ``BO_``
(message definitions) and ``SG_`` (signal definitions). Everything else in a
DBC file is skipped and counted, never an error. Physical conversion follows
the usual linear rule ``physical = raw * scale + offset``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field


class DbcParseError(ValueError):
    """Malformed BO_/SG_ statement. Carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class CatalogError(ValueError):
    """Catalog-level invariant violation (duplicate names, overlapping bits)."""


class UnknownMessageError(LookupError):
    """Frame's message id has no definition in the catalog."""


class EncodeError(ValueError):
    """Signal value cannot be represented in its bit layout."""


LITTLE_ENDIAN = "little_endian"
BIG_ENDIAN = "big_endian"


@dataclass(frozen=True)
class SignalDef:
    name: str
    start_bit: int
    bit_length: int
    byte_order: str
    signed: bool
    scale: float
    offset: float
    min_phys: float
    max_phys: float

    def __post_init__(self):
        if not 0 <= self.start_bit <= 63:
            raise CatalogError(f"{self.name}: start_bit {self.start_bit} outside [0, 63]")
        if not 1 <= self.bit_length <= 64:
            raise CatalogError(f"{self.name}: bit_length {self.bit_length} outside [1, 64]")
        if self.byte_order not in (LITTLE_ENDIAN, BIG_ENDIAN):
            raise CatalogError(f"{self.name}: unknown byte order {self.byte_order!r}")
        if self.scale == 0:
            raise CatalogError(f"{self.name}: scale must be nonzero")
        if self.min_phys > self.max_phys:
            raise CatalogError(f"{self.name}: min_phys > max_phys")
        self.bit_positions()  # extent must fit in 64 bits

    def bit_positions(self) -> tuple[int, ...]:
        """Payload bit indices occupied by this signal, MSB first.

        Bit ``k`` of byte ``B`` sits at index ``8*B + k``. Little-endian
        signals ascend from start_bit (the LSB); big-endian signals follow
        Motorola ordering, descending within a byte then wrapping to the
        top bit of the next byte.
        """
        if self.byte_order == LITTLE_ENDIAN:
            end = self.start_bit + self.bit_length
            if end > 64:
                raise CatalogError(f"{self.name}: extent {end} exceeds 64 bits")
            return tuple(range(end - 1, self.start_bit - 1, -1))
        positions = []
        pos = self.start_bit
        for _ in range(self.bit_length):
            if not 0 <= pos < 64:
                raise CatalogError(f"{self.name}: big-endian walk leaves the 8-byte payload")
            positions.append(pos)
            pos = pos + 15 if pos % 8 == 0 else pos - 1
        return tuple(positions)

    def raw_bounds(self) -> tuple[int, int]:
        if self.signed:
            return -(1 << (self.bit_length - 1)), (1 << (self.bit_length - 1)) - 1
        return 0, (1 << self.bit_length) - 1

    def to_physical(self, raw: int) -> float:
        return raw * self.scale + self.offset

    def to_raw(self, physical: float) -> int:
        raw = round((physical - self.offset) / self.scale)
        lo, hi = self.raw_bounds()
        if not lo <= raw <= hi:
            raise EncodeError(
                f"{self.name}: value {physical} needs raw count {raw}, outside [{lo}, {hi}]"
            )
        return raw


@dataclass(frozen=True)
class MessageDef:
    message_id: int
    name: str
    dlc: int
    signals: tuple[SignalDef, ...]

    def __post_init__(self):
        if not 0 <= self.dlc <= 8:
            raise CatalogError(f"{self.name}: dlc {self.dlc} outside [0, 8]")
        for family in (LITTLE_ENDIAN, BIG_ENDIAN):
            used: dict[int, str] = {}
            for sig in self.signals:
                if sig.byte_order != family:
                    continue
                if max(sig.bit_positions()) >= 8 * self.dlc:
                    raise CatalogError(f"{sig.name}: layout exceeds dlc={self.dlc} payload")
                for pos in sig.bit_positions():
                    if pos in used:
                        raise CatalogError(
                            f"{self.name}: bit {pos} shared by {used[pos]} and {sig.name}"
                        )
                    used[pos] = sig.name

    def signal(self, name: str) -> SignalDef:
        for sig in self.signals:
            if sig.name == name:
                return sig
        raise KeyError(name)


@dataclass
class SignalCatalog:
    messages: dict[int, MessageDef]
    skipped_lines: int = 0
    signal_index: dict[str, tuple[int, int]] = field(init=False)

    def __post_init__(self):
        index: dict[str, tuple[int, int]] = {}
        for mid, message in self.messages.items():
            for pos, sig in enumerate(message.signals):
                if sig.name in index:
                    raise CatalogError(f"duplicate signal name {sig.name!r}")
                index[sig.name] = (mid, pos)
        self.signal_index = index

    @property
    def signal_names(self) -> list[str]:
        return list(self.signal_index)

    @property
    def n_signals(self) -> int:
        return len(self.signal_index)

    def signal(self, name: str) -> SignalDef:
        mid, pos = self.signal_index[name]
        return self.messages[mid].signals[pos]

    def range_of(self, name: str) -> tuple[float, float]:
        sig = self.signal(name)
        return sig.min_phys, sig.max_phys

    def ranges(self, names: list[str] | None = None) -> tuple[list[float], list[float]]:
        names = self.signal_names if names is None else names
        pairs = [self.range_of(n) for n in names]
        return [p[0] for p in pairs], [p[1] for p in pairs]


@dataclass(frozen=True)
class CanFrame:
    can_id: int
    timestamp: float
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != 8:
            raise ValueError(f"payload must be 8 bytes, got {len(self.payload)}")


_BO_RE = re.compile(r"^BO_\s+(\d+)\s+(\w+)\s*:\s*(\d+)(?:\s+\w+)?\s*$")
_SG_RE = re.compile(
    r"^SG_\s+(\w+)\s*(m\d+|M|m\d+M)?\s*:\s*"
    r"(\d+)\|(\d+)@([01])([+-])\s*"
    r"\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)\s*"
    r"\[\s*([^|\s]+)\s*\|\s*([^\]\s]+)\s*\]\s*"
    r'"([^"]*)"'
)


def parse_dbc(text: str) -> SignalCatalog:
    """Parse BO_/SG_ statements into a catalog.

    Unsupported line types (and multiplexed SG_ entries, which are out of
    scope) are skipped and counted in ``catalog.skipped_lines``. Malformed
    BO_/SG_ syntax raises :class:`DbcParseError` with the offending line.
    """
    messages: dict[int, dict] = {}
    current: dict | None = None
    skipped = 0
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line:
            continue
        if line.startswith("BO_ "):
            m = _BO_RE.match(line)
            if m is None:
                raise DbcParseError(lineno, f"malformed BO_ statement: {line!r}")
            mid = int(m.group(1))
            if mid in messages:
                raise DbcParseError(lineno, f"duplicate message id {mid}")
            current = {"id": mid, "name": m.group(2), "dlc": int(m.group(3)), "signals": []}
            messages[mid] = current
        elif line.startswith("SG_ "):
            if current is None:
                raise DbcParseError(lineno, "SG_ before any BO_ statement")
            m = _SG_RE.match(line)
            if m is None:
                raise DbcParseError(lineno, f"malformed SG_ statement: {line!r}")
            if m.group(2):  # multiplexed signals are out of scope
                skipped += 1
                continue
            scale = float(m.group(7))
            offset = float(m.group(8))
            lo, hi = float(m.group(9)), float(m.group(10))
            sig = dict(
                name=m.group(1),
                start_bit=int(m.group(3)),
                bit_length=int(m.group(4)),
                byte_order=LITTLE_ENDIAN if m.group(5) == "1" else BIG_ENDIAN,
                signed=m.group(6) == "-",
                scale=scale,
                offset=offset,
            )
            if lo == 0.0 and hi == 0.0:
                # [0|0] means "unspecified"; fall back to the representable span
                try:
                    probe = SignalDef(min_phys=0.0, max_phys=0.0, **sig)
                except CatalogError as exc:
                    raise DbcParseError(lineno, str(exc)) from exc
                rlo, rhi = probe.raw_bounds()
                lo, hi = sorted((probe.to_physical(rlo), probe.to_physical(rhi)))
            try:
                current["signals"].append(SignalDef(min_phys=lo, max_phys=hi, **sig))
            except CatalogError as exc:
                raise DbcParseError(lineno, str(exc)) from exc
        else:
            skipped += 1
    defs = {
        mid: MessageDef(mid, m["name"], m["dlc"], tuple(m["signals"]))
        for mid, m in messages.items()
    }
    return SignalCatalog(messages=defs, skipped_lines=skipped)


def cid_to_mid(cid_hex: str) -> int:
    """Convert a hexadecimal CAN id token to its decimal message id."""
    token = cid_hex.strip()
    if token.lower().startswith("0x"):
        token = token[2:]
    try:
        return int(token, 16)
    except ValueError:
        raise ValueError(f"invalid hex CAN id: {cid_hex!r}") from None


def extract_raw(payload: bytes, sig: SignalDef) -> int:
    if sig.byte_order == LITTLE_ENDIAN:
        raw = (int.from_bytes(payload, "little") >> sig.start_bit) & (
            (1 << sig.bit_length) - 1
        )
    else:
        raw = 0
        for pos in sig.bit_positions():
            raw = (raw << 1) | ((payload[pos // 8] >> (pos % 8)) & 1)
    if sig.signed and raw >= 1 << (sig.bit_length - 1):
        raw -= 1 << sig.bit_length
    return raw


def decode_frame(frame: CanFrame, catalog: SignalCatalog) -> dict[str, float]:
    """Decode one frame into ``{signal_name: physical_value}``."""
    message = catalog.messages.get(frame.can_id)
    if message is None:
        raise UnknownMessageError(f"no message definition for id {frame.can_id}")
    return {
        sig.name: sig.to_physical(extract_raw(frame.payload, sig))
        for sig in message.signals
    }


def encode_signals(values: dict[str, float], message: MessageDef) -> bytes:
    """Pack physical values into an 8-byte payload (inverse of decode)."""
    acc = 0
    for sig in message.signals:
        if sig.name not in values:
            raise EncodeError(f"{sig.name}: no value supplied")
        raw = sig.to_raw(values[sig.name]) & ((1 << sig.bit_length) - 1)
        positions = sig.bit_positions()  # MSB first
        for k, pos in enumerate(positions):
            bit = (raw >> (sig.bit_length - 1 - k)) & 1
            acc = (acc & ~(1 << pos)) | (bit << pos)
    return acc.to_bytes(8, "little")


def read_raw_trace(path) -> list[CanFrame]:
    """Read a raw trace CSV with columns ``timestamp,can_id_hex,b0..b7``."""
    frames = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return frames
        for row in reader:
            if not row:
                continue
            payload = bytes(int(b, 16) for b in row[2:10])
            frames.append(CanFrame(cid_to_mid(row[1]), float(row[0]), payload))
    return frames


def write_raw_trace(path, frames: list[CanFrame]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "can_id_hex", *[f"b{i}" for i in range(8)]])
        for fr in frames:
            writer.writerow([repr(fr.timestamp), f"{fr.can_id:X}", *[f"{b:02X}" for b in fr.payload]])


def decode_frames(
    frames: list[CanFrame], catalog: SignalCatalog
) -> tuple[list[tuple[float, str, float]], int]:
    """Decode a frame list to ``(timestamp, signal, value)`` rows.

    Frames with unknown message ids are skipped, not fatal; the second
    return value counts them.
    """
    rows = []
    skipped = 0
    for frame in frames:
        try:
            decoded = decode_frame(frame, catalog)
        except UnknownMessageError:
            skipped += 1
            continue
        for name, value in decoded.items():
            rows.append((frame.timestamp, name, value))
    return rows, skipped
