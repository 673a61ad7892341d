import dataclasses

import pytest

from lvadbench.params import (CvsParameters, PumpParameters, dyn_to_mmhg,
                              load_parameters, mmhg_to_dyn, save_parameters)

# Hand-copied published roster; the defaults must reproduce it bit-exactly.
TABLE_VALUES = {
    "Eeslvf": 3.54, "Eesrvf": 1.75, "Eao": 1.04, "Eesla": 0.2, "Eesra": 0.2,
    "Epa": 0.15, "Epu": 0.04, "Esa": 0.37, "Esv": 0.013, "Evc": 0.03,
    "Rao": 0.2, "Rra": 0.012, "Rpv": 0.02, "Rsv": 0.12, "Tc": 1.0,
    "Tsys0": 0.5, "V0la": 20.0, "V0lvf": 40.0, "V0ra": 20.0, "V0rvf": 50.0,
    "Vdla": 10.0, "Vdlvf": 16.77, "Vdra": 10.0, "Vdrvf": 40.0, "Rmt": 0.01,
    "Rav": 0.02, "Vuao": 230.88, "Vupa": 91.67, "Vupu": 132.39,
    "Vusa": 231.04, "Vusv": 1976.1, "Vuvc": 136.17, "P0la": 0.5,
    "P0lvf": 0.98, "P0ra": 0.5, "P0rvf": 0.91, "Vtotal": 5200.0,
    "λla": 0.025, "λlvf": 0.028, "λra": 0.025, "λrvf": 0.028,
    "Lao": 0.0001, "Lpa": 7.70e-05,
}


def test_nominal_reproduces_table_exactly():
    params = CvsParameters()
    for key, value in TABLE_VALUES.items():
        assert params.get(key) == value, key
    assert len(CvsParameters.parameter_names()) == 43
    assert set(CvsParameters.parameter_names()) == set(TABLE_VALUES)


def test_scenario_resistance_baselines():
    params = CvsParameters()
    assert params.Rsa == 1300.0 / 1333.22
    assert params.Rpa == 100.0 / 1333.22
    assert params.Pthor == -4.0


def test_validate_passes_nominal():
    CvsParameters().validate()
    PumpParameters().validate()


@pytest.mark.parametrize("field,value", [
    ("Eeslvf", 0.0), ("Rmt", -0.1), ("Lao", 0.0), ("Vtotal", 100.0),
    ("Tsys0", 1.5),
])
def test_validate_rejects_bad_values(field, value):
    params = dataclasses.replace(CvsParameters(), **{field: value})
    with pytest.raises(ValueError):
        params.validate()


def test_unit_conversion_examples():
    assert dyn_to_mmhg(0.0) == 0.0
    assert dyn_to_mmhg(1333.22) == 1.0
    assert abs(dyn_to_mmhg(1300.0) - 0.97509) < 1e-5


def test_unit_conversion_round_trip():
    for value in (0.0, 1.0, 97.5, 1300.0, 2600.0):
        back = mmhg_to_dyn(dyn_to_mmhg(value))
        assert abs(back - value) <= 1e-12 * max(1.0, value)
    with pytest.raises(ValueError):
        dyn_to_mmhg(-1.0)


def test_serialization_round_trip_bit_exact(tmp_path):
    cvs = CvsParameters()
    pump = PumpParameters()
    path = tmp_path / "params.kv"
    save_parameters(path, cvs, pump)
    cvs2, pump2 = load_parameters(path)
    assert cvs2 == cvs
    assert pump2 == pump


def test_serialized_keys_use_published_names(tmp_path):
    path = tmp_path / "params.kv"
    save_parameters(path, CvsParameters())
    text = path.read_text(encoding="utf-8")
    for key in ("λlvf", "λrvf", "Eeslvf", "Vusv", "Tsys0"):
        assert f"{key} = " in text
    assert "lam_" not in text


def test_with_factors():
    params = CvsParameters()
    scaled = params.with_factors({"Vtotal": 1.2, "λrvf": 0.8})
    assert scaled.Vtotal == 5200.0 * 1.2
    assert scaled.lam_rvf == 0.028 * 0.8
    assert scaled.Eeslvf == params.Eeslvf
    with pytest.raises(KeyError):
        params.with_factors({"nope": 1.0})


def test_unknown_parameter_rejected():
    with pytest.raises(KeyError):
        CvsParameters.from_dict({"Eeslvf": 3.54, "bogus": 1.0})
