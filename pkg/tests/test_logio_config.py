from __future__ import annotations

import math

import pytest

from peresim import (
    ImperfectionSpec,
    MeasurementLog,
    config_json_schema,
    dump_log,
    parse_config,
    parse_log,
    read_config,
    read_log,
    simulate_measurement,
    write_log,
)
from peresim.errors import ConfigurationError, DataError
from peresim.logio import LOG_COLUMNS


@pytest.fixture
def small_log(source, corrected_23c):
    from peresim import FluctuationSpec

    spec = ImperfectionSpec(fluctuations=FluctuationSpec(sigma_pin_rel=0.01))
    return simulate_measurement(source, corrected_23c, spec, 3, 2, seed=8)


class TestLogIO:
    def test_round_trip_text(self, small_log):
        assert parse_log(dump_log(small_log)) == MeasurementLog(records=small_log.records)

    def test_round_trip_file(self, small_log, tmp_path):
        path = tmp_path / "log.csv"
        write_log(small_log, path)
        assert read_log(path) == MeasurementLog(records=small_log.records)

    def test_header_is_mandatory(self):
        with pytest.raises(DataError, match="line 1"):
            parse_log("1,A,0.1,0,1,23,1,0\n")

    def test_empty_file(self):
        with pytest.raises(DataError, match="empty"):
            parse_log("")

    def test_header_only(self):
        with pytest.raises(DataError, match="no records"):
            parse_log(",".join(LOG_COLUMNS) + "\n")

    def test_duplicate_pair_reports_line(self, small_log):
        text = dump_log(small_log)
        lines = text.splitlines()
        dup = next(l for l in lines[1:] if l.startswith("1,AB"))
        broken = "\n".join(lines + [dup]) + "\n"
        with pytest.raises(DataError, match=r"line 26.*cycle=1, config=AB"):
            parse_log(broken)

    def test_non_numeric_field_reports_line(self, small_log):
        lines = dump_log(small_log).splitlines()
        parts = lines[3].split(",")
        parts[2] = "oops"
        lines[3] = ",".join(parts)
        with pytest.raises(DataError, match="line 4"):
            parse_log("\n".join(lines) + "\n")

    def test_unknown_config_label(self, small_log):
        lines = dump_log(small_log).splitlines()
        parts = lines[2].split(",")
        parts[1] = "AC"
        lines[2] = ",".join(parts)
        with pytest.raises(DataError, match="line 3"):
            parse_log("\n".join(lines) + "\n")

    def test_missing_column_rejected(self, small_log):
        lines = dump_log(small_log).splitlines()
        lines[0] = ",".join(LOG_COLUMNS[:-1])
        with pytest.raises(DataError, match="header"):
            parse_log("\n".join(lines) + "\n")

    def test_seventeen_digit_round_trip(self):
        value = 0.1234567890123456789
        from peresim.logio import _fmt

        assert float(_fmt(value)) == value


MINIMAL = {
    "phases": {"dphi_bc": 2.509, "dphi_ca": -0.279, "dphi_ab": -2.230},
    "source": {"p_in_w": 1.0, "t_a": 0.26, "t_b": 0.52, "t_c": 0.22},
}


class TestRunConfig:
    def test_minimal_config_defaults_disabled(self):
        cfg = parse_config(MINIMAL)
        source, phases, imperfections = cfg.domain_specs()
        assert imperfections == ImperfectionSpec.disabled()
        assert cfg.protocol.n_cycles == 100
        assert cfg.seed == 0

    def test_negative_tau_rejected_with_path(self):
        data = dict(MINIMAL, imperfections={"residual": {"tau": -1.0}})
        with pytest.raises(ConfigurationError, match=r"imperfections\.residual\.tau"):
            parse_config(data)

    def test_unknown_key_rejected(self):
        data = dict(MINIMAL, shutters={"speed": 3})
        with pytest.raises(ConfigurationError, match="shutters"):
            parse_config(data)

    def test_nested_unknown_key_rejected(self):
        data = dict(MINIMAL, source=dict(MINIMAL["source"], gain=2.0))
        with pytest.raises(ConfigurationError, match="gain"):
            parse_config(data)

    def test_full_config_round_trip(self, tmp_path):
        full = {
            "phases": {"dphi_bc": 2.509, "dphi_ca": -0.279, "dphi_ab": -2.230},
            "source": {"p_in_w": 1.0, "t_a": 0.26, "t_b": 0.52, "t_c": 0.22,
                       "p_dark_w": 2e-9},
            "imperfections": {
                "residual": {"tau": 2.2e-4, "phi_sh": math.pi},
                "crosstalk": {"dphi_dh": -0.017, "convention": "comoving_plus"},
                "fluctuations": {"sigma_pin_rel": 0.0032, "sigma_phase": 0.01,
                                 "sigma_phase_fast": 0.002},
                "nonlinearity": {"c2_per_w": 1e-4, "c3_per_w2": 0.0},
                "polarization": {"h_fraction_a": 0.9, "h_fraction_b": 0.95,
                                 "h_fraction_c": 0.92,
                                 "phases_v": {"dphi_bc": 2.4, "dphi_ca": -0.2,
                                              "dphi_ab": -2.2},
                                 "polarizer_enabled": True},
            },
            "protocol": {"n_cycles": 50, "samples_per_setting": 5,
                         "setting_duration_s": 13.0, "housing_temp_c": 23.0},
            "seed": 1234,
            "analysis": {"sweep_points": 721, "mc_samples": 100000},
        }
        cfg = parse_config(full)
        path = tmp_path / "cfg.json"
        path.write_text(cfg.model_dump_json(), encoding="utf-8")
        again = read_config(path)
        assert again == cfg

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="not valid JSON"):
            read_config(path)

    def test_schema_is_published(self):
        schema = config_json_schema()
        assert schema["title"] == "RunConfig"
        assert "phases" in schema["properties"]
        assert schema.get("additionalProperties") is False

    def test_bad_convention_rejected(self):
        data = dict(MINIMAL, imperfections={"crosstalk": {"convention": "sideways"}})
        cfg = parse_config(data)
        with pytest.raises(ConfigurationError, match="convention"):
            cfg.domain_specs()
