"""File ingestion: schema police, cross-checks, and byte-stable round trips."""

from datetime import date

import numpy as np
import pytest

from flexbid.errors import DanglingReference, GridMismatch, SchemaError
from flexbid.ingest import (
    ingest,
    read_buildings,
    read_prices,
    read_weather,
    write_buildings,
    write_network,
    write_prices,
    write_profiles,
    write_weather,
)
from flexbid.synthetic import SyntheticSpec, generate_synthetic

D1, D2 = "2025-01-06", "2025-01-07"


def day_rows(day, value_cols, hours=range(24)):
    return "".join(f"{day},{h},{value_cols}\n" for h in hours)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def minimal_files(tmp_path, weather_hours=range(24)):
    b = write(
        tmp_path, "buildings.csv",
        "id,x_m,y_m,r_th_K_per_kW,c_th_kWh_per_K,p_hp_rated_kW,p_pv_rated_kW,has_hp\n"
        "b001,0.00,0.00,5.0,10.0,3.0,0.0,true\n",
    )
    w = write(
        tmp_path, "weather.csv",
        "date,hour,t_out_C\n"
        + day_rows(D1, "2.00", weather_hours) + day_rows(D2, "3.00"),
    )
    p = write(
        tmp_path, "prices.csv",
        "date,hour,realized_eur_mwh,forecast_eur_mwh\n"
        + day_rows(D1, "50.0000,52.0000") + day_rows(D2, "60.0000,59.0000"),
    )
    f = write(
        tmp_path, "profiles.csv",
        "date,hour,slf,cf\n"
        + day_rows(D1, "0.600000,0.000000") + day_rows(D2, "0.650000,0.100000"),
    )
    return b, w, p, f


def test_minimal_bundle_ingests(tmp_path):
    bundle = ingest(*minimal_files(tmp_path))
    assert [b.id for b in bundle.buildings] == ["b001"]
    assert bundle.dates == [date(2025, 1, 6), date(2025, 1, 7)]
    assert bundle.network is None
    assert np.allclose(bundle.realized[date(2025, 1, 6)], 50.0)
    assert np.allclose(bundle.forecast[date(2025, 1, 7)], 59.0)


def test_missing_hour_names_the_date(tmp_path):
    files = minimal_files(tmp_path, weather_hours=[h for h in range(24) if h != 13])
    with pytest.raises(GridMismatch, match=r"2025-01-06.*missing 13"):
        ingest(*files)


def test_duplicate_hour_reports_both_lines(tmp_path):
    write(
        tmp_path, "weather.csv",
        "date,hour,t_out_C\n" + day_rows(D1, "2.00") + f"{D1},5,9.99\n",
    )
    with pytest.raises(SchemaError, match=r"weather.csv:26: duplicate.*first at line 7"):
        read_weather(tmp_path / "weather.csv")


def test_bad_number_points_at_cell(tmp_path):
    write(
        tmp_path, "buildings.csv",
        "id,x_m,y_m,r_th_K_per_kW,c_th_kWh_per_K,p_hp_rated_kW,p_pv_rated_kW,has_hp\n"
        "b001,0.0,0.0,5.0,oops,3.0,0.0,true\n",
    )
    with pytest.raises(SchemaError, match=r"buildings.csv:2: column 'c_th_kWh_per_K'.*'oops'"):
        read_buildings(tmp_path / "buildings.csv")


def test_wrong_header_is_rejected_up_front(tmp_path):
    write(tmp_path, "weather.csv", "date,hour,temperature\n")
    with pytest.raises(SchemaError, match=r"weather.csv:1: header"):
        read_weather(tmp_path / "weather.csv")


def test_empty_file_is_a_schema_error(tmp_path):
    write(tmp_path, "weather.csv", "")
    with pytest.raises(SchemaError, match="file is empty"):
        read_weather(tmp_path / "weather.csv")


def test_hour_out_of_range(tmp_path):
    write(tmp_path, "weather.csv", "date,hour,t_out_C\n2025-01-06,24,2.0\n")
    with pytest.raises(SchemaError, match=r"column 'hour': 24 outside 0..23"):
        read_weather(tmp_path / "weather.csv")


def test_duplicate_building_id(tmp_path):
    write(
        tmp_path, "buildings.csv",
        "id,x_m,y_m,r_th_K_per_kW,c_th_kWh_per_K,p_hp_rated_kW,p_pv_rated_kW,has_hp\n"
        "b001,0,0,5,10,3,0,true\nb001,1,1,5,10,3,0,false\n",
    )
    with pytest.raises(SchemaError, match=r"duplicate building id 'b001' \(first at line 2\)"):
        read_buildings(tmp_path / "buildings.csv")


def test_date_sets_must_agree(tmp_path):
    b, w, p, f = minimal_files(tmp_path)
    (tmp_path / "prices.csv").write_text(
        "date,hour,realized_eur_mwh,forecast_eur_mwh\n" + day_rows(D1, "50.0,51.0")
    )
    with pytest.raises(GridMismatch, match="present in only one of weather and prices"):
        ingest(b, w, p, f)


def test_slf_outside_unit_interval(tmp_path):
    b, w, p, f = minimal_files(tmp_path)
    (tmp_path / "profiles.csv").write_text(
        "date,hour,slf,cf\n" + day_rows(D1, "1.200000,0.0") + day_rows(D2, "0.6,0.0")
    )
    with pytest.raises(SchemaError, match=r"column 'slf': 1.2 outside"):
        ingest(b, w, p, f)


def test_prices_without_forecast_column(tmp_path):
    write(
        tmp_path, "prices.csv",
        "date,hour,realized_eur_mwh\n" + day_rows(D1, "50.0") + day_rows(D2, "61.5"),
    )
    realized, forecast = read_prices(tmp_path / "prices.csv")
    assert forecast is None
    assert np.allclose(realized[date(2025, 1, 7)], 61.5)


def test_price_series_falls_back_to_naive(tmp_path):
    b, w, p, f = minimal_files(tmp_path)
    (tmp_path / "prices.csv").write_text(
        "date,hour,realized_eur_mwh\n" + day_rows(D1, "50.0") + day_rows(D2, "61.5")
    )
    bundle = ingest(b, w, p, f)
    series = bundle.price_series("column")  # no column to use: persistence
    assert date(2025, 1, 6) not in series.forecast  # nothing before the first day
    assert np.allclose(series.forecast[date(2025, 1, 7)], 50.0)
    with pytest.raises(ValueError):
        bundle.price_series("lstm")


def test_network_files_come_in_pairs(tmp_path):
    b, w, p, f = minimal_files(tmp_path)
    nodes = write(tmp_path, "nodes.csv", "id,ancestor_id,x_m,y_m,p_cap_kW,"
                  "is_substation,s_rating_kVA,v_nom_pu\n")
    with pytest.raises(SchemaError, match="supplied together"):
        ingest(b, w, p, f, nodes=nodes)


def test_alloc_must_resolve(tmp_path):
    b, w, p, f = minimal_files(tmp_path)
    nodes = write(
        tmp_path, "nodes.csv",
        "id,ancestor_id,x_m,y_m,p_cap_kW,is_substation,s_rating_kVA,v_nom_pu\n"
        "0,,0,0,0,true,100,1.0\n1,0,1,0,10,false,0,1.0\n",
    )
    edges = write(
        tmp_path, "edges.csv",
        "from_id,to_id,r_pu,x_pu,s_rating_pu\n1,0,0.01,0.005,1.0\n",
    )
    alloc = write(tmp_path, "alloc.json", '{"b001": 7}\n')
    with pytest.raises(DanglingReference, match="unknown node 7"):
        ingest(b, w, p, f, nodes=nodes, edges=edges, alloc=alloc)
    alloc.write_text('{"ghost": 1}\n')
    with pytest.raises(DanglingReference, match="unknown building 'ghost'"):
        ingest(b, w, p, f, nodes=nodes, edges=edges, alloc=alloc)


def test_edge_to_unknown_node(tmp_path):
    b, w, p, f = minimal_files(tmp_path)
    nodes = write(
        tmp_path, "nodes.csv",
        "id,ancestor_id,x_m,y_m,p_cap_kW,is_substation,s_rating_kVA,v_nom_pu\n"
        "0,,0,0,0,true,100,1.0\n1,0,1,0,10,false,0,1.0\n",
    )
    edges = write(
        tmp_path, "edges.csv",
        "from_id,to_id,r_pu,x_pu,s_rating_pu\n1,0,0.01,0.005,1.0\n9,0,0.01,0.005,1.0\n",
    )
    with pytest.raises(DanglingReference, match=r"edges.csv:3: unknown from_id 9"):
        ingest(b, w, p, f, nodes=nodes, edges=edges)


def test_boolean_spellings(tmp_path):
    write(
        tmp_path, "buildings.csv",
        "id,x_m,y_m,r_th_K_per_kW,c_th_kWh_per_K,p_hp_rated_kW,p_pv_rated_kW,has_hp\n"
        "b001,0,0,5,10,3,0,1\nb002,0,0,5,10,3,0,false\nb003,0,0,5,10,0,0,maybe\n",
    )
    with pytest.raises(SchemaError, match=r"column 'has_hp': not a boolean: 'maybe'"):
        read_buildings(tmp_path / "buildings.csv")


# ----------------------------------------------------------- round trips

def test_generated_instance_roundtrips_byte_identical(tmp_path):
    spec = SyntheticSpec(n_buildings=8, hp_share_pct=50.0, n_days=4, seed=21,
                         branching=2, depth=2)
    first = generate_synthetic(spec, tmp_path / "a")
    bundle = ingest(
        first["buildings"], first["weather"], first["prices"],
        first["profiles"], nodes=first["nodes"], edges=first["edges"],
    )
    out = tmp_path / "b"
    out.mkdir()
    write_buildings(out / "buildings.csv", bundle.buildings)
    write_weather(out / "weather.csv", bundle.weather)
    write_prices(out / "prices.csv", bundle.realized, bundle.forecast)
    write_profiles(out / "profiles.csv", bundle.slf, bundle.cf)
    write_network(out / "nodes.csv", out / "edges.csv", bundle.network)
    for name in ("buildings", "weather", "prices", "profiles", "nodes", "edges"):
        a = (tmp_path / "a" / f"{name}.csv").read_bytes()
        b = (out / f"{name}.csv").read_bytes()
        assert a == b, f"{name}.csv changed across a read/write cycle"


def test_same_seed_is_byte_identical(tmp_path):
    spec = SyntheticSpec(n_buildings=6, hp_share_pct=30.0, n_days=3, seed=5,
                         branching=2, depth=2)
    one = generate_synthetic(spec, tmp_path / "one")
    two = generate_synthetic(spec, tmp_path / "two")
    for key, p in one.items():
        assert p.read_bytes() == two[key].read_bytes(), f"{key} differs under one seed"
