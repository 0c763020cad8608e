"""Log format round trips, reconciliation, features, scaler and split."""

import numpy as np
import pytest

from ghostbeacon.tracelog import (
    FeatureSet,
    LogParseError,
    PacketLog,
    PacketRecord,
    ReconcileError,
    Scaler,
    apply_scaler,
    extract_features,
    extract_features_bulk,
    fit_scaler,
    parse_record,
    read_features,
    read_log,
    reconcile,
    split,
    write_features,
    write_log,
    write_record,
)


def tx_record(seq=1027, node=1, t=50.0):
    return PacketRecord(
        side="TX",
        interface_id=f"GridScenario.node[{node}].wlan[0].radio",
        node_id=node,
        signal_name="UDPData-140",
        sequence_no=seq,
        start_time=t,
        start_pos=(123.5, 456.25),
        end_time=t + 0.0002,
        end_pos=(123.5, 456.25),
    )


def rx_record(seq=1027, node=2, t=50.0, rssi=-71.25):
    return PacketRecord(
        side="RX",
        interface_id=f"GridScenario.node[{node}].wlan[0].radio",
        node_id=node,
        signal_name="UDPData-140",
        sequence_no=seq,
        start_time=t + 1e-6,
        start_pos=(200.0, 456.25),
        end_time=t + 0.0002,
        end_pos=(200.0, 456.25),
        rssi=rssi,
    )


class TestRecordRoundTrip:
    def test_tx_round_trip_exact(self):
        r = tx_record()
        assert parse_record(write_record(r)) == r

    def test_rx_round_trip_exact(self):
        r = rx_record()
        assert parse_record(write_record(r)) == r

    def test_rx_has_one_extra_field(self):
        assert len(write_record(rx_record()).split()) == len(write_record(tx_record()).split()) + 1

    def test_signal_field_renders_name_then_sequence(self):
        tokens = write_record(tx_record(seq=1027)).split()
        assert tokens[2] == "UDPData-140"
        assert tokens[3] == "1027"

    def test_fuzzed_round_trip_identity(self):
        # 10^4 random valid records; parse(write(r)) must equal r exactly
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            side = "RX" if rng.random() < 0.5 else "TX"
            t0 = float(rng.uniform(0, 1e4))
            record = PacketRecord(
                side=side,
                interface_id=f"net.node[{int(rng.integers(0, 500))}].wlan[0].radio",
                node_id=int(rng.integers(0, 500)),
                signal_name=f"UDPData-{int(rng.integers(1, 2000))}",
                sequence_no=int(rng.integers(0, 2**40)),
                start_time=t0,
                start_pos=(float(rng.normal() * 1e3), float(rng.normal() * 1e3)),
                end_time=t0 + float(rng.uniform(0, 10)),
                end_pos=(float(rng.normal() * 1e3), float(rng.normal() * 1e3)),
                rssi=float(rng.normal(-80, 20)) if side == "RX" else None,
            )
            assert parse_record(write_record(record)) == record


class TestParseErrors:
    def test_empty_line(self):
        with pytest.raises(LogParseError, match="empty"):
            parse_record("")

    def test_wrong_field_count(self):
        with pytest.raises(LogParseError, match="expected 10"):
            parse_record("a b c")

    def test_non_numeric_timestamp_names_field_and_column(self):
        line = write_record(tx_record()).split()
        line[4] = "oops"
        with pytest.raises(LogParseError, match=r"start_time.*column 5"):
            parse_record(" ".join(line))

    def test_non_numeric_rssi_named(self):
        line = write_record(rx_record()).split()
        line[10] = "x"
        with pytest.raises(LogParseError, match=r"rssi.*column 11"):
            parse_record(" ".join(line))

    def test_end_before_start_rejected(self):
        line = write_record(tx_record()).split()
        line[7] = "1.0"
        with pytest.raises(LogParseError, match="end_time"):
            parse_record(" ".join(line))


class TestLogIO:
    def test_file_round_trip(self, tmp_path):
        records = [tx_record(seq=i) for i in range(5)] + [rx_record(seq=3), rx_record(seq=4, node=7)]
        log = PacketLog.from_records(records)
        path = tmp_path / "t.log"
        write_log(log, path)
        back = read_log(path)
        assert len(back) == len(records)
        assert [back.record(i) for i in range(len(back))] == [
            log.record(i) for i in range(len(log))
        ]

    def test_read_log_reports_line_numbers(self, tmp_path):
        path = tmp_path / "bad.log"
        path.write_text(write_record(tx_record()) + "\nnot a record\n")
        with pytest.raises(LogParseError, match="line 2"):
            read_log(path)


class TestReconcile:
    def test_broadcast_matches_all_receivers(self):
        log = PacketLog.from_records(
            [tx_record(seq=5)] + [rx_record(seq=5, node=n) for n in (2, 3, 4)]
        )
        linked = reconcile(log)
        assert len(linked) == 3
        assert all(linked[i].tx.sequence_no == 5 for i in range(3))

    def test_unmatched_tx_allowed(self):
        log = PacketLog.from_records([tx_record(seq=1), tx_record(seq=2), rx_record(seq=1)])
        assert len(reconcile(log)) == 1

    def test_rx_without_tx_raises(self):
        log = PacketLog.from_records([tx_record(seq=1), rx_record(seq=99)])
        with pytest.raises(ReconcileError, match="no matching TX"):
            reconcile(log)

    def test_duplicate_tx_key_raises(self):
        log = PacketLog.from_records([tx_record(seq=1), tx_record(seq=1, node=3)])
        with pytest.raises(ReconcileError, match="duplicate"):
            reconcile(log)

    def test_conservation(self):
        txs = [tx_record(seq=i) for i in range(20)]
        rxs = [rx_record(seq=i, node=50 + i) for i in range(0, 20, 2)]
        log = PacketLog.from_records(txs + rxs)
        linked = reconcile(log)
        assert len(linked) == log.n_rx
        assert len(linked) + (log.n_tx - len(set(l.tx.sequence_no for l in linked))) == log.n_tx


class TestFeatures:
    def test_extract_single(self):
        log = PacketLog.from_records([tx_record(seq=5), rx_record(seq=5)])
        fv = extract_features(reconcile(log)[0])
        flat = fv.flatten()
        assert flat.shape == (5,)
        assert flat.tolist() == [200.0, 456.25, -71.25, 123.5, 456.25]
        assert fv.label == "normal"
        assert fv.d_true == pytest.approx(np.hypot(200.0 - 123.5, 0.0))

    def test_bulk_matches_single(self):
        log = PacketLog.from_records(
            [tx_record(seq=5), rx_record(seq=5), tx_record(seq=6, node=3), rx_record(seq=6, node=4)]
        )
        linked = reconcile(log)
        fs = extract_features_bulk(linked)
        for i in range(len(linked)):
            assert np.array_equal(fs.x[i], extract_features(linked[i]).flatten())
        assert np.all(fs.label == 0)

    def test_feature_csv_round_trip(self, tmp_path):
        x = np.array([[1.0, 2.0, -70.5, 3.0, 4.0], [5.0, 6.0, -80.25, 7.0, 8.0]])
        fs = FeatureSet(x=x, label=np.array([0, 1], dtype=np.int8), d_true=np.array([10.0, 20.0]))
        path = tmp_path / "f.csv"
        write_features(fs, path)
        back = read_features(path)
        assert np.array_equal(back.x, fs.x)
        assert np.array_equal(back.label, fs.label)
        assert np.array_equal(back.d_true, fs.d_true)


class TestScaler:
    def test_column_example(self):
        x = np.array([[0.0], [5.0], [10.0]]) * np.ones((1, 5))
        s = fit_scaler(x)
        scaled = apply_scaler(s, x)
        assert np.allclose(scaled[:, 0], [0.0, 0.5, 1.0])

    def test_train_extrema_map_to_unit_interval(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(100, 5)) * [1, 10, 100, 3, 7]
        s = fit_scaler(x)
        scaled = apply_scaler(s, x)
        assert np.allclose(scaled.min(axis=0), 0.0)
        assert np.allclose(scaled.max(axis=0), 1.0)
        assert np.all(scaled >= 0.0) and np.all(scaled <= 1.0)

    def test_out_of_range_extrapolates(self):
        x = np.tile(np.array([[0.0], [10.0]]), (1, 5))
        s = fit_scaler(x)
        out = apply_scaler(s, np.full((1, 5), 20.0))
        assert np.allclose(out, 2.0)
        out = apply_scaler(s, np.full((1, 5), -10.0))
        assert np.allclose(out, -1.0)

    def test_degenerate_dimension_reported(self):
        x = np.ones((10, 5))
        x[:, 0] = np.arange(10)
        with pytest.raises(ValueError, match=r"\[1, 2, 3, 4\]"):
            fit_scaler(x)


class TestSplit:
    def test_ratio_sizes(self):
        data = np.arange(1000.0).reshape(-1, 1)
        tr, va = split(data, 0.8, seed=5)
        assert len(tr) == 800
        assert len(va) == 200

    def test_partition_property(self):
        data = np.arange(257.0).reshape(-1, 1)
        tr, va = split(data, 0.8, seed=5)
        merged = np.sort(np.concatenate([tr, va]).ravel())
        assert np.array_equal(merged, np.arange(257.0))

    def test_same_seed_same_split(self):
        data = np.arange(100.0).reshape(-1, 1)
        a = split(data, 0.8, seed=9)
        b = split(data, 0.8, seed=9)
        assert np.array_equal(a[0], b[0])
