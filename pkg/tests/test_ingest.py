"""
Tests for log parsing, alignment and dataset round trips.
"""

import pytest

from xraim.exceptions import FormatError, InvalidArgumentError, RowError
from xraim.ingest import (
    AnchorRegistry,
    DatasetFiles,
    align_epochs,
    load_anchor_db,
    load_dataset,
    parse_gnss_log,
    parse_labels,
    parse_network_log,
    parse_reports,
    write_reports,
)
from xraim.models import (
    Anchor,
    DetectionReport,
    EnuPoint,
    Epoch,
    GeoPoint,
    Infrastructure,
    MotionSample,
    RangingMeasurement,
    ValueKind,
)
from xraim.simulator import ScenarioGenerator

NETWORK_HEADER = "time_ms,infra,anchor_id,rssi_dbm_or_rtt_m,value_kind,freq_hz\n"
ANCHOR_HEADER = "infra,id,lat_deg,lon_deg,alt_m,metadata_json\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def wifi(time, anchor_id="ap01", value=-60.0):
    return RangingMeasurement(
        time=time, anchor_id=anchor_id, infrastructure=Infrastructure.WIFI, value=value, value_kind=ValueKind.RSSI
    )


class TestParsers:
    """Row validation with file and line context."""

    def test_missing_column(self, tmp_path):
        path = write(tmp_path / "net.csv", "time_ms,infra,anchor_id\n1000,WIFI,ap01\n")
        with pytest.raises(FormatError) as exc_info:
            parse_network_log(path)
        assert "rssi_dbm_or_rtt_m" in str(exc_info.value)

    def test_empty_file(self, tmp_path):
        with pytest.raises(FormatError):
            parse_network_log(write(tmp_path / "net.csv", ""))

    def test_bad_number_reports_line(self, tmp_path):
        path = write(tmp_path / "net.csv", NETWORK_HEADER + "1000,WIFI,ap01,-60,RSSI,\n1000,WIFI,ap02,abc,RSSI,\n")
        with pytest.raises(RowError) as exc_info:
            parse_network_log(path)
        assert exc_info.value.line == 3

    def test_positive_rssi_rejected(self, tmp_path):
        path = write(tmp_path / "net.csv", NETWORK_HEADER + "1000,WIFI,ap01,5,RSSI,\n")
        with pytest.raises(RowError):
            parse_network_log(path)

    def test_gnss_in_network_log_rejected(self, tmp_path):
        path = write(tmp_path / "net.csv", NETWORK_HEADER + "1000,GNSS,G01,2e7,PSEUDORANGE,\n")
        with pytest.raises(RowError):
            parse_network_log(path)

    def test_network_fragments_by_time(self, tmp_path):
        path = write(
            tmp_path / "net.csv",
            NETWORK_HEADER
            + "1000,wifi,ap01,-60,rssi,2412000000\n1000,CELL,cell01,-80,RSSI,\n2000,GEOIP,ip01,1e5,RTT_DISTANCE,\n",
        )
        epochs = parse_network_log(path)
        assert [epoch.time for epoch in epochs] == [1000, 2000]
        assert epochs[0].infrastructures() == [Infrastructure.WIFI, Infrastructure.CELL]
        assert epochs[0].measurements[Infrastructure.WIFI][0].frequency_hz == 2.412e9

    def test_duplicate_satellite(self, tmp_path):
        row = "1000,G01,L1,2.1e7,2.0,1.5e7,1.0e7,1.8e7\n"
        header = "time_ms,sat_id,signal_type,pseudorange_m,pr_sigma_m,sat_x_ecef_m,sat_y_ecef_m,sat_z_ecef_m\n"
        with pytest.raises(RowError):
            parse_gnss_log(write(tmp_path / "gnss.csv", header + row + row))

    def test_duplicate_anchor(self, tmp_path):
        path = write(tmp_path / "anchors.csv", ANCHOR_HEADER + "WIFI,ap01,59.4,17.9,30,\nWIFI,ap01,59.4,17.9,30,\n")
        with pytest.raises(FormatError):
            load_anchor_db(path)

    def test_anchor_metadata(self, tmp_path):
        path = write(tmp_path / "anchors.csv", ANCHOR_HEADER + 'WIFI,ap01,59.4,17.9,30,"{""ssid"": ""net""}"\n')
        registry = load_anchor_db(path)
        assert registry.get(Infrastructure.WIFI, "ap01").metadata == {"ssid": "net"}

    def test_invalid_metadata(self, tmp_path):
        path = write(tmp_path / "anchors.csv", ANCHOR_HEADER + "WIFI,ap01,59.4,17.9,30,not-json\n")
        with pytest.raises(RowError):
            load_anchor_db(path)

    def test_label_flag(self, tmp_path):
        path = write(tmp_path / "labels.csv", "time_ms,attacked,infra,anchor_id\n1000,2,,\n")
        with pytest.raises(RowError):
            parse_labels(path)


class TestRegistry:
    def test_duplicate_rejected(self):
        anchor = Anchor(id="ap01", infrastructure=Infrastructure.WIFI, position=GeoPoint(latitude=0.0, longitude=0.0))
        with pytest.raises(FormatError):
            AnchorRegistry([anchor, anchor])

    def test_same_id_in_two_infrastructures(self, origin):
        anchors = [
            Anchor(id="x1", infrastructure=Infrastructure.WIFI, position=origin),
            Anchor(id="x1", infrastructure=Infrastructure.CELL, position=origin),
        ]
        registry = AnchorRegistry(anchors)
        assert len(registry) == 2
        assert (Infrastructure.CELL, "x1") in registry
        assert registry.enu_positions(origin)[(Infrastructure.WIFI, "x1")].as_array() == pytest.approx(
            [0.0, 0.0, 0.0], abs=1e-6
        )


class TestAlignment:
    """Merging log fragments into epochs."""

    def test_scan_joins_nearest_epoch(self):
        gnss = [Epoch(time=1000), Epoch(time=2000)]
        network = [Epoch(time=1200, measurements={Infrastructure.WIFI: [wifi(1200)]})]
        epochs = align_epochs(gnss, network, window_ms=500)
        assert [epoch.time for epoch in epochs] == [1000, 2000]
        assert epochs[0].measurements[Infrastructure.WIFI][0].time == 1200

    def test_distant_scan_forms_own_epoch(self):
        gnss = [Epoch(time=1000), Epoch(time=2000)]
        network = [Epoch(time=3000, measurements={Infrastructure.WIFI: [wifi(3000)]})]
        epochs = align_epochs(gnss, network, window_ms=500)
        assert [epoch.time for epoch in epochs] == [1000, 2000, 3000]

    def test_closest_measurement_wins(self):
        gnss = [Epoch(time=1000)]
        network = [
            Epoch(time=1400, measurements={Infrastructure.WIFI: [wifi(1400, value=-70.0)]}),
            Epoch(time=1100, measurements={Infrastructure.WIFI: [wifi(1100, value=-50.0)]}),
        ]
        epochs = align_epochs(gnss, network, window_ms=500)
        assert epochs[0].measurements[Infrastructure.WIFI][0].value == -50.0

    def test_motion_and_lbs_attached(self, origin):
        gnss = [Epoch(time=1000), Epoch(time=5000)]
        epochs = align_epochs(gnss, motion=[MotionSample(time=1100)], lbs={900: origin}, window_ms=500)
        assert epochs[0].motion.time == 1100
        assert epochs[0].lbs_position == origin
        assert epochs[1].motion is None
        assert epochs[1].lbs_position is None

    def test_negative_window(self):
        with pytest.raises(InvalidArgumentError):
            align_epochs([], window_ms=-1)


class TestDatasetRoundTrip:
    """Simulator export read back by the loader."""

    def test_export_and_load(self, tmp_path, benign_run, straight_scenario):
        files = ScenarioGenerator(straight_scenario).export(benign_run, tmp_path)
        assert {"gnss", "network", "motion", "anchors", "labels", "truth", "lbs", "scenario"} <= set(files)

        dataset = load_dataset(tmp_path)
        assert dataset.origin == straight_scenario.origin
        assert [epoch.time for epoch in dataset.epochs] == benign_run.times
        assert len(dataset.registry) == len(benign_run.anchors)
        assert len(dataset.labels) == len(benign_run.times)

        original = benign_run.epochs[2]
        loaded = dataset.epochs[2]
        assert loaded.motion is not None and loaded.lbs_position is not None
        for infrastructure in original.infrastructures():
            expected = sorted(m.value for m in original.measurements[infrastructure])
            actual = sorted(m.value for m in loaded.measurements[infrastructure])
            assert actual == pytest.approx(expected, rel=1e-12)

        truth = dataset.truth_enu()[benign_run.times[5]]
        assert truth.as_array() == pytest.approx(benign_run.truth[5].as_array(), abs=1e-6)

    def test_missing_required_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path)

    def test_origin_required(self, tmp_path, benign_run, straight_scenario):
        ScenarioGenerator(straight_scenario).export(benign_run, tmp_path)
        (tmp_path / DatasetFiles.SCENARIO).unlink()
        with pytest.raises(InvalidArgumentError):
            load_dataset(tmp_path)
        assert load_dataset(tmp_path, origin=straight_scenario.origin).scenario is None

    def test_reports_round_trip(self, tmp_path):
        reports = [
            DetectionReport(time=1000, lambda_f=0.5, status="no_data"),
            DetectionReport(
                time=2000,
                score=0.7,
                alarm=True,
                lambda_f=0.5,
                benign_index_sets={Infrastructure.WIFI: [0, 2]},
                recovered=EnuPoint(east=1.0, north=2.0),
            ),
        ]
        jsonl, csv = write_reports(reports, tmp_path)
        assert csv.exists()
        assert parse_reports(jsonl) == reports
