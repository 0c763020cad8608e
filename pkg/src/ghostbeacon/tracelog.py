"""Packet log serialization, TX/RX reconciliation and feature extraction.

One record per line, space separated:

    interface_id node_id signal_name sequence_no start_time x1 y1 end_time x2 y2 [rssi]

TX lines carry 10 fields, RX lines the same 10 plus the measured RSSI.
``signal_name sequence_no`` together identify one transmission event (one
TX record, any number of RX records).  Numbers are written with Python's
shortest round-trip float representation, so parse(write(r)) == r holds
bit-exactly.  Text fields must not contain whitespace.

Feature vectors are [x_r, y_r, rssi, x_t, y_t]: receiver position at
reception end, received power, and the transmitter position reported at
transmission start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TX = 0
RX = 1
SIDE_NAMES = ("TX", "RX")

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1
LABEL_NAMES = ("normal", "anomalous")

FEATURE_CSV_HEADER = "x_r,y_r,rssi,x_t,y_t,label,d_true"

_FIELDS = (
    "interface_id",
    "node_id",
    "signal_name",
    "sequence_no",
    "start_time",
    "start_x",
    "start_y",
    "end_time",
    "end_x",
    "end_y",
    "rssi",
)

_SEQ_BITS = 44  # reconciliation packs (signal code, sequence) into int64


class LogParseError(ValueError):
    pass


class ReconcileError(ValueError):
    pass


@dataclass
class PacketRecord:
    side: str  # "TX" or "RX"
    interface_id: str
    node_id: int
    signal_name: str
    sequence_no: int
    start_time: float
    start_pos: tuple[float, float]
    end_time: float
    end_pos: tuple[float, float]
    rssi: float | None = None

    def validate(self) -> None:
        if self.side not in SIDE_NAMES:
            raise ValueError(f"side must be TX or RX, got {self.side!r}")
        if (self.rssi is None) != (self.side == "TX"):
            raise ValueError("rssi must be present exactly on RX records")
        if self.end_time < self.start_time:
            raise ValueError("end_time must be >= start_time")
        if self.sequence_no < 0:
            raise ValueError("sequence_no must be >= 0")
        for name in (self.interface_id, self.signal_name):
            if not name or any(c.isspace() for c in name):
                raise ValueError(f"text field {name!r} must be non-empty and whitespace-free")


def write_record(record: PacketRecord) -> str:
    """Render one record as a log line (no trailing newline)."""
    record.validate()
    parts = [
        record.interface_id,
        str(record.node_id),
        record.signal_name,
        str(record.sequence_no),
        repr(float(record.start_time)),
        repr(float(record.start_pos[0])),
        repr(float(record.start_pos[1])),
        repr(float(record.end_time)),
        repr(float(record.end_pos[0])),
        repr(float(record.end_pos[1])),
    ]
    if record.side == "RX":
        parts.append(repr(float(record.rssi)))
    return " ".join(parts)


def _fail(field_idx: int, reason: str):
    raise LogParseError(f"field '{_FIELDS[field_idx]}' at column {field_idx + 1}: {reason}")


def _parse_int(tokens, idx):
    try:
        value = int(tokens[idx])
    except ValueError:
        _fail(idx, f"expected an integer, got {tokens[idx]!r}")
    if value < 0:
        _fail(idx, "must be >= 0")
    return value


def _parse_float(tokens, idx):
    try:
        return float(tokens[idx])
    except ValueError:
        _fail(idx, f"expected a number, got {tokens[idx]!r}")


def parse_record(line: str) -> PacketRecord:
    """Inverse of write_record; malformed lines raise LogParseError naming
    the offending field and column."""
    tokens = line.split()
    if len(tokens) == 0:
        raise LogParseError("empty line")
    if len(tokens) not in (10, 11):
        raise LogParseError(f"expected 10 (TX) or 11 (RX) fields, got {len(tokens)}")
    node_id = _parse_int(tokens, 1)
    seq = _parse_int(tokens, 3)
    start_time = _parse_float(tokens, 4)
    start_pos = (_parse_float(tokens, 5), _parse_float(tokens, 6))
    end_time = _parse_float(tokens, 7)
    if end_time < start_time:
        _fail(7, "end_time must be >= start_time")
    end_pos = (_parse_float(tokens, 8), _parse_float(tokens, 9))
    rssi = _parse_float(tokens, 10) if len(tokens) == 11 else None
    return PacketRecord(
        side="RX" if rssi is not None else "TX",
        interface_id=tokens[0],
        node_id=node_id,
        signal_name=tokens[2],
        sequence_no=seq,
        start_time=start_time,
        start_pos=start_pos,
        end_time=end_time,
        end_pos=end_pos,
        rssi=rssi,
    )


class PacketLog:
    """Columnar packet log; record order is the file order."""

    def __init__(self, side, iface_code, iface_names, node, sig_code, sig_names, seq, t0, p0, t1, p1, rssi):
        self.side = np.asarray(side, dtype=np.int8)
        self.iface_code = np.asarray(iface_code, dtype=np.int32)
        self.iface_names = list(iface_names)
        self.node = np.asarray(node, dtype=np.int64)
        self.sig_code = np.asarray(sig_code, dtype=np.int32)
        self.sig_names = list(sig_names)
        self.seq = np.asarray(seq, dtype=np.int64)
        self.t0 = np.asarray(t0, dtype=np.float64)
        self.p0 = np.asarray(p0, dtype=np.float64).reshape(-1, 2)
        self.t1 = np.asarray(t1, dtype=np.float64)
        self.p1 = np.asarray(p1, dtype=np.float64).reshape(-1, 2)
        self.rssi = np.asarray(rssi, dtype=np.float64)  # NaN on TX records

    def __len__(self) -> int:
        return self.side.shape[0]

    @property
    def n_tx(self) -> int:
        return int(np.sum(self.side == TX))

    @property
    def n_rx(self) -> int:
        return int(np.sum(self.side == RX))

    def record(self, i: int) -> PacketRecord:
        side = SIDE_NAMES[self.side[i]]
        return PacketRecord(
            side=side,
            interface_id=self.iface_names[self.iface_code[i]],
            node_id=int(self.node[i]),
            signal_name=self.sig_names[self.sig_code[i]],
            sequence_no=int(self.seq[i]),
            start_time=float(self.t0[i]),
            start_pos=(float(self.p0[i, 0]), float(self.p0[i, 1])),
            end_time=float(self.t1[i]),
            end_pos=(float(self.p1[i, 0]), float(self.p1[i, 1])),
            rssi=float(self.rssi[i]) if side == "RX" else None,
        )

    def records(self):
        for i in range(len(self)):
            yield self.record(i)

    @classmethod
    def from_records(cls, records) -> "PacketLog":
        builder = _LogBuilder()
        for r in records:
            r.validate()
            builder.add(
                TX if r.side == "TX" else RX,
                r.interface_id,
                r.node_id,
                r.signal_name,
                r.sequence_no,
                r.start_time,
                r.start_pos[0],
                r.start_pos[1],
                r.end_time,
                r.end_pos[0],
                r.end_pos[1],
                np.nan if r.rssi is None else r.rssi,
            )
        return builder.build()


class _LogBuilder:
    def __init__(self):
        self.side = []
        self.iface_code = []
        self.iface_names = []
        self._iface_idx = {}
        self.node = []
        self.sig_code = []
        self.sig_names = []
        self._sig_idx = {}
        self.seq = []
        self.t0 = []
        self.x0 = []
        self.y0 = []
        self.t1 = []
        self.x1 = []
        self.y1 = []
        self.rssi = []

    def _code(self, table, names, key):
        idx = table.get(key)
        if idx is None:
            idx = len(names)
            table[key] = idx
            names.append(key)
        return idx

    def add(self, side, iface, node, sig, seq, t0, x0, y0, t1, x1, y1, rssi):
        self.side.append(side)
        self.iface_code.append(self._code(self._iface_idx, self.iface_names, iface))
        self.node.append(node)
        self.sig_code.append(self._code(self._sig_idx, self.sig_names, sig))
        self.seq.append(seq)
        self.t0.append(t0)
        self.x0.append(x0)
        self.y0.append(y0)
        self.t1.append(t1)
        self.x1.append(x1)
        self.y1.append(y1)
        self.rssi.append(rssi)

    def build(self) -> PacketLog:
        p0 = np.column_stack([self.x0, self.y0]) if self.x0 else np.empty((0, 2))
        p1 = np.column_stack([self.x1, self.y1]) if self.x1 else np.empty((0, 2))
        return PacketLog(
            self.side,
            self.iface_code,
            self.iface_names,
            self.node,
            self.sig_code,
            self.sig_names,
            self.seq,
            self.t0,
            p0,
            self.t1,
            p1,
            self.rssi,
        )


def write_log(log: PacketLog, path) -> None:
    with open(path, "w") as fh:
        chunk = []
        iface_names = log.iface_names
        sig_names = log.sig_names
        for i in range(len(log)):
            parts = [
                iface_names[log.iface_code[i]],
                str(int(log.node[i])),
                sig_names[log.sig_code[i]],
                str(int(log.seq[i])),
                repr(float(log.t0[i])),
                repr(float(log.p0[i, 0])),
                repr(float(log.p0[i, 1])),
                repr(float(log.t1[i])),
                repr(float(log.p1[i, 0])),
                repr(float(log.p1[i, 1])),
            ]
            if log.side[i] == RX:
                parts.append(repr(float(log.rssi[i])))
            chunk.append(" ".join(parts))
            if len(chunk) >= 65536:
                fh.write("\n".join(chunk))
                fh.write("\n")
                chunk = []
        if chunk:
            fh.write("\n".join(chunk))
            fh.write("\n")


def read_log(path) -> PacketLog:
    builder = _LogBuilder()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                if len(tokens) not in (10, 11):
                    raise LogParseError(f"expected 10 (TX) or 11 (RX) fields, got {len(tokens)}")
                node = _parse_int(tokens, 1)
                seq = _parse_int(tokens, 3)
                t0 = _parse_float(tokens, 4)
                x0 = _parse_float(tokens, 5)
                y0 = _parse_float(tokens, 6)
                t1 = _parse_float(tokens, 7)
                if t1 < t0:
                    _fail(7, "end_time must be >= start_time")
                x1 = _parse_float(tokens, 8)
                y1 = _parse_float(tokens, 9)
                if len(tokens) == 11:
                    rssi = _parse_float(tokens, 10)
                    side = RX
                else:
                    rssi = np.nan
                    side = TX
            except LogParseError as exc:
                raise LogParseError(f"line {lineno}: {exc}") from None
            builder.add(side, tokens[0], node, tokens[2], seq, t0, x0, y0, t1, x1, y1, rssi)
    return builder.build()


@dataclass
class LinkedPacket:
    tx: PacketRecord
    rx: PacketRecord


class LinkedPackets:
    """RX records paired with their TX records, in RX log order."""

    def __init__(self, log: PacketLog, tx_idx: np.ndarray, rx_idx: np.ndarray):
        self.log = log
        self.tx_idx = tx_idx
        self.rx_idx = rx_idx

    def __len__(self) -> int:
        return self.tx_idx.shape[0]

    def __getitem__(self, i: int) -> LinkedPacket:
        return LinkedPacket(tx=self.log.record(self.tx_idx[i]), rx=self.log.record(self.rx_idx[i]))

    def subset(self, indices) -> "LinkedPackets":
        idx = np.asarray(indices)
        return LinkedPackets(self.log, self.tx_idx[idx], self.rx_idx[idx])

    @property
    def tx_pos(self) -> np.ndarray:
        """Reported transmitter positions (position at transmission start)."""
        return self.log.p0[self.tx_idx]

    @property
    def rx_pos(self) -> np.ndarray:
        """Receiver positions (position at reception end)."""
        return self.log.p1[self.rx_idx]

    @property
    def rssi(self) -> np.ndarray:
        return self.log.rssi[self.rx_idx]


def _pack_keys(sig_code: np.ndarray, seq: np.ndarray) -> np.ndarray:
    if np.any(seq >= (1 << _SEQ_BITS)):
        raise ReconcileError(f"sequence numbers must fit in {_SEQ_BITS} bits")
    return (sig_code.astype(np.int64) << _SEQ_BITS) | seq.astype(np.int64)


def reconcile(log: PacketLog) -> LinkedPackets:
    """Pair every RX record with its TX record via (signal_name, sequence_no).

    Unmatched TX records are allowed (lost packets); an RX without a TX or
    duplicate TX keys raise ReconcileError.
    """
    tx_rows = np.flatnonzero(log.side == TX)
    rx_rows = np.flatnonzero(log.side == RX)
    tx_keys = _pack_keys(log.sig_code[tx_rows], log.seq[tx_rows])
    order = np.argsort(tx_keys, kind="stable")
    tx_keys_sorted = tx_keys[order]
    dup = np.flatnonzero(np.diff(tx_keys_sorted) == 0)
    if dup.size:
        row = tx_rows[order[dup[0]]]
        raise ReconcileError(
            f"duplicate TX key ({log.sig_names[log.sig_code[row]]}, {log.seq[row]})"
        )
    rx_keys = _pack_keys(log.sig_code[rx_rows], log.seq[rx_rows])
    pos = np.searchsorted(tx_keys_sorted, rx_keys)
    bad = (pos >= tx_keys_sorted.size) | (tx_keys_sorted[np.minimum(pos, tx_keys_sorted.size - 1)] != rx_keys)
    if np.any(bad):
        row = rx_rows[int(np.flatnonzero(bad)[0])]
        raise ReconcileError(
            f"RX record with no matching TX: ({log.sig_names[log.sig_code[row]]}, {log.seq[row]})"
        )
    tx_for_rx = tx_rows[order[pos]]
    return LinkedPackets(log, tx_for_rx, rx_rows)


@dataclass
class FeatureVector:
    l_r: tuple[float, float]
    v_rssi: float
    l_t: tuple[float, float]
    label: str = "normal"
    d_true: float = np.nan

    def flatten(self) -> np.ndarray:
        return np.array([self.l_r[0], self.l_r[1], self.v_rssi, self.l_t[0], self.l_t[1]])


def extract_features(lp: LinkedPacket) -> FeatureVector:
    """Normal (anomaly-free) feature vector for one linked packet."""
    l_r = lp.rx.end_pos
    l_t = lp.tx.start_pos
    d = float(np.hypot(l_r[0] - l_t[0], l_r[1] - l_t[1]))
    return FeatureVector(l_r=l_r, v_rssi=float(lp.rx.rssi), l_t=l_t, label="normal", d_true=d)


@dataclass
class FeatureSet:
    x: np.ndarray  # (n, 5) [x_r, y_r, rssi, x_t, y_t]
    label: np.ndarray  # (n,) 0 normal / 1 anomalous
    d_true: np.ndarray  # (n,) true TX-RX distance, diagnostics only

    def __len__(self) -> int:
        return self.x.shape[0]

    def subset(self, indices) -> "FeatureSet":
        idx = np.asarray(indices)
        return FeatureSet(self.x[idx], self.label[idx], self.d_true[idx])


def extract_features_bulk(linked: LinkedPackets) -> FeatureSet:
    rx = linked.rx_pos
    tx = linked.tx_pos
    x = np.column_stack([rx[:, 0], rx[:, 1], linked.rssi, tx[:, 0], tx[:, 1]])
    d = np.hypot(rx[:, 0] - tx[:, 0], rx[:, 1] - tx[:, 1])
    return FeatureSet(x=x, label=np.zeros(len(linked), dtype=np.int8), d_true=d)


def write_features(fs: FeatureSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(FEATURE_CSV_HEADER + "\n")
        for i in range(len(fs)):
            row = fs.x[i]
            fh.write(
                f"{float(row[0])!r},{float(row[1])!r},{float(row[2])!r},"
                f"{float(row[3])!r},{float(row[4])!r},"
                f"{LABEL_NAMES[fs.label[i]]},{float(fs.d_true[i])!r}\n"
            )


def read_features(path) -> FeatureSet:
    xs, labels, dt = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != FEATURE_CSV_HEADER:
            raise LogParseError(f"unexpected feature CSV header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise LogParseError(f"line {lineno}: expected 7 columns, got {len(parts)}")
            try:
                xs.append([float(parts[k]) for k in (0, 1, 2, 3, 4)])
                dt.append(float(parts[6]))
            except ValueError as exc:
                raise LogParseError(f"line {lineno}: {exc}") from None
            if parts[5] not in LABEL_NAMES:
                raise LogParseError(f"line {lineno}: unknown label {parts[5]!r}")
            labels.append(LABEL_NAMES.index(parts[5]))
    return FeatureSet(
        x=np.asarray(xs, dtype=np.float64).reshape(-1, 5),
        label=np.asarray(labels, dtype=np.int8),
        d_true=np.asarray(dt, dtype=np.float64),
    )


@dataclass
class Scaler:
    mins: np.ndarray
    maxs: np.ndarray


def fit_scaler(data) -> Scaler:
    """Per-dimension min-max statistics from training data only."""
    x = data.x if isinstance(data, FeatureSet) else np.asarray(data, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot fit a scaler on empty data")
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    degenerate = np.flatnonzero(maxs <= mins)
    if degenerate.size:
        raise ValueError(f"degenerate dimensions (max == min): {degenerate.tolist()}")
    return Scaler(mins=mins, maxs=maxs)


def apply_scaler(scaler: Scaler, x):
    """Map to [0, 1] on the training range; out-of-range values extrapolate
    linearly rather than clip."""
    return (np.asarray(x, dtype=np.float64) - scaler.mins) / (scaler.maxs - scaler.mins)


def split(data, ratio: float = 0.8, seed=0):
    """Seeded uniform split into (train, validation)."""
    n = len(data)
    if n == 0:
        raise ValueError("cannot split empty data")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(n * ratio + 0.5)
    tr, va = perm[:n_train], perm[n_train:]
    if isinstance(data, FeatureSet):
        return data.subset(tr), data.subset(va)
    arr = np.asarray(data)
    return arr[tr], arr[va]
