import math

import pytest

from photon_router.errors import ConfigError
from photon_router.params import (
    FIG1_PARAMS,
    SystemParams,
    angular,
    parse_kv_lines,
    read_params_file,
    write_params_file,
)


def test_angular_conversion():
    assert angular(1.0) == pytest.approx(2.0 * math.pi)
    assert angular(0.0) == 0.0


def test_kappa_and_delta_cp():
    p = SystemParams(kappa_ex=300.0, kappa_i=20.0, delta_ac=5.0, delta_ap=12.0)
    assert p.kappa == 320.0
    assert p.delta_cp == pytest.approx(7.0)


def test_kx_wraps_into_principal_range():
    p = SystemParams(kx=7.0)
    assert 0.0 <= p.kx < 2.0 * math.pi
    assert p.kx == pytest.approx(7.0 - 2.0 * math.pi)


def test_negative_rate_rejected():
    with pytest.raises(ConfigError):
        SystemParams(gamma=-1.0)
    with pytest.raises(ConfigError):
        SystemParams(kappa_ex=0.0, kappa_i=0.0)


def test_mapping_round_trip():
    p = FIG1_PARAMS.with_(drive_ep=3.5, kx=1.2)
    assert SystemParams.from_mapping(p.to_mapping()) == p


def test_from_mapping_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        SystemParams.from_mapping({"g_tw": 50.0, "bogus": 1.0})


def test_parse_kv_lines():
    got = parse_kv_lines(["# comment", "", "g_tw = 42.5", "h=1  # inline"])
    assert got == {"g_tw": 42.5, "h": 1.0}


def test_parse_kv_lines_reports_line_number():
    with pytest.raises(ConfigError, match="line 2"):
        parse_kv_lines(["a = 1", "nonsense"])
    with pytest.raises(ConfigError, match="line 1"):
        parse_kv_lines(["a = fish"])


def test_params_file_round_trip(tmp_path):
    path = tmp_path / "p.cfg"
    write_params_file(path, {"g_tw": 50.0, "kappa_ex": 123.456789})
    assert read_params_file(path) == {"g_tw": 50.0, "kappa_ex": 123.456789}
