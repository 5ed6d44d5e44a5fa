import dataclasses
import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evdemand.errors import ParseError, SchemaError, ValidationError
from evdemand.ingest import (VED_DYNAMIC_SCHEMA, VED_STATIC_SCHEMA, IngestReport, Powertrain, RawRecord,
                             VehicleInfo, filter_by_powertrain, parse_dynamic, parse_powertrain,
                             parse_static, serialize_dynamic, serialize_static)

VED_HEADER = "DayNum,VehId,Trip,Timestamp(ms),Latitude[deg],Longitude[deg],HV Battery SOC[%]\n"
SYNTH_HEADER = "day_num,vehicle_id,trip_no,timestamp_ms,lat,lon,soc_pct\n"


def test_table_one_row():
    recs = parse_dynamic(io.StringIO(VED_HEADER + "5.5602,371,1288,0,42.2776,-83.7537,94.344\n"),
                         VED_DYNAMIC_SCHEMA)
    assert recs == [RawRecord(5.5602, 371, 1288, 0, 42.2776, -83.7537, 94.344)]


def test_header_only_is_empty():
    assert parse_dynamic(io.StringIO(SYNTH_HEADER)) == []


def test_latitude_out_of_bounds_names_field():
    with pytest.raises(ValidationError) as err:
        parse_dynamic(io.StringIO(SYNTH_HEADER + "5.5,1,1,0,91.0,-83.0,50\n"))
    assert err.value.field == "lat"
    assert err.value.line == 2
    assert str(err.value).startswith("lat:")


@pytest.mark.parametrize("row, field", [
    ("0,1,1,0,42,-83,50", "day_num"),
    ("5.5,1,1,-5,42,-83,50", "timestamp_ms"),
    ("5.5,1,1,0,42,-183,50", "lon"),
    ("5.5,1,1,0,42,-83,100.5", "soc_pct"),
])
def test_other_bounds(row, field):
    with pytest.raises(ValidationError) as err:
        parse_dynamic(io.StringIO(SYNTH_HEADER + row + "\n"))
    assert err.value.field == field


def test_malformed_number_reports_line_and_column():
    text = SYNTH_HEADER + "5.5,1,1,0,42,-83,50\n5.5,1,1,abc,42,-83,50\n"
    with pytest.raises(ParseError) as err:
        parse_dynamic(io.StringIO(text))
    assert err.value.line == 3
    assert err.value.column == "timestamp_ms"


def test_missing_mandatory_column():
    with pytest.raises(SchemaError):
        parse_dynamic(io.StringIO("day_num,vehicle_id,trip_no,timestamp_ms,lat\n"))


def test_missing_soc_is_absent_not_dropped():
    text = SYNTH_HEADER + "5.5,1,1,0,42,-83,\n5.5,1,1,10,42,-83,NaN\n"
    report = IngestReport()
    recs = parse_dynamic(io.StringIO(text), report=report)
    assert [r.soc_pct for r in recs] == [None, None]
    assert report.missing_soc == 2


def test_soc_column_may_be_absent():
    recs = parse_dynamic(io.StringIO("day_num,vehicle_id,trip_no,timestamp_ms,lat,lon\n5.5,1,1,0,42,-83\n"))
    assert recs[0].soc_pct is None


def test_gps_less_rows_dropped_and_counted():
    report = IngestReport()
    text = SYNTH_HEADER + "5.5,1,1,0,,,50\n5.5,1,1,10,42,-83,50\n"
    recs = parse_dynamic(io.StringIO(text), report=report)
    assert len(recs) == 1
    assert report.missing_gps == 1
    assert report.rows == 2


def test_static_mapping_table():
    assert parse_powertrain("PHEV") is Powertrain.PHEV_EV
    assert parse_powertrain("EV") is Powertrain.PHEV_EV
    assert parse_powertrain("ICE") is Powertrain.ICEV
    assert parse_powertrain("HEV") is Powertrain.HEV
    assert parse_powertrain("hydrogen") is None


def test_parse_static_phev_row():
    infos, rejected = parse_static(io.StringIO("VehId,Vehicle Type\n371,PHEV\n"), VED_STATIC_SCHEMA)
    assert infos == [VehicleInfo(371, Powertrain.PHEV_EV)]
    assert rejected == 0


def test_parse_static_empty_file():
    assert parse_static(io.StringIO("")) == ([], 0)


def test_parse_static_duplicate_id_names_it():
    with pytest.raises(ValidationError, match="371"):
        parse_static(io.StringIO("vehicle_id,vehicle_type\n371,PHEV\n371,ICE\n"))


def test_parse_static_unknown_type_rejected_and_reported():
    report = IngestReport()
    infos, rejected = parse_static(io.StringIO("vehicle_id,vehicle_type\n1,PHEV\n2,Steam\n3,ICE\n"),
                                   report=report)
    assert [i.vehicle_id for i in infos] == [1, 3]
    assert rejected == 1
    assert report.static_rejects == [(3, 2, "Steam")]


def _records():
    return [RawRecord(5.5, 371, 1, 0, 42.0, -83.0, 90.0), RawRecord(5.5, 12, 2, 0, 42.0, -83.0, None),
            RawRecord(5.5, 371, 1, 10, 42.1, -83.0, 89.0), RawRecord(5.5, 999, 3, 0, 42.0, -83.0, None)]


INFOS = [VehicleInfo(371, Powertrain.PHEV_EV), VehicleInfo(12, Powertrain.ICEV)]


def test_filter_keeps_wanted_in_order():
    kept, unknown = filter_by_powertrain(_records(), INFOS, {Powertrain.PHEV_EV})
    assert [r.timestamp_ms for r in kept] == [0, 10]
    assert all(r.vehicle_id == 371 for r in kept)
    assert unknown == 1


def test_filter_all_types_drops_only_unknown():
    kept, unknown = filter_by_powertrain(_records(), INFOS, set(Powertrain))
    assert kept == [r for r in _records() if r.vehicle_id != 999]
    assert unknown == 1


# ---- properties

finite = dict(allow_nan=False, allow_infinity=False)
raw_records = st.builds(
    RawRecord,
    day_num=st.floats(min_value=1e-6, max_value=400, **finite),
    vehicle_id=st.integers(0, 10_000),
    trip_no=st.integers(0, 10_000),
    timestamp_ms=st.integers(0, 10**9),
    lat=st.floats(-90, 90, **finite),
    lon=st.floats(-180, 180, **finite),
    soc_pct=st.none() | st.floats(0, 100, **finite),
)


@given(st.lists(raw_records, max_size=30))
def test_round_trip(records):
    buf = io.StringIO()
    serialize_dynamic(records, buf)
    assert parse_dynamic(io.StringIO(buf.getvalue())) == records


@given(st.lists(raw_records, max_size=30))
def test_round_trip_ved_headers(records):
    buf = io.StringIO()
    serialize_dynamic(records, buf, VED_DYNAMIC_SCHEMA)
    assert parse_dynamic(io.StringIO(buf.getvalue()), VED_DYNAMIC_SCHEMA) == records


@given(st.dictionaries(st.integers(0, 50), st.sampled_from(list(Powertrain)), max_size=20))
def test_static_round_trip(mapping):
    infos = [VehicleInfo(k, v) for k, v in mapping.items()]
    buf = io.StringIO()
    serialize_static(infos, buf)
    assert parse_static(io.StringIO(buf.getvalue()))[0] == infos


@given(st.lists(raw_records, max_size=40),
       st.dictionaries(st.integers(0, 10_000), st.sampled_from(list(Powertrain)), max_size=30))
def test_filter_partitions(records, mapping):
    # ids drawn from a small pool so some vehicles are known
    records = [dataclasses.replace(r, vehicle_id=r.vehicle_id % 40) for r in records]
    infos = [VehicleInfo(k % 40, v) for k, v in mapping.items()]
    infos = list({i.vehicle_id: i for i in infos}.values())
    total = 0
    unknown = None
    for p in Powertrain:
        kept, unknown = filter_by_powertrain(records, infos, {p})
        it = iter(records)
        assert all(any(r is x for x in it) for r in kept)  # subsequence
        total += len(kept)
    assert total == len(records) - unknown
