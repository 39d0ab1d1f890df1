import pytest

from rowsim.units import UnitError, parse_quantity


def test_basic_conversions():
    assert parse_quantity("2.1 mF", "capacitance") == pytest.approx(2.1e-3)
    assert parse_quantity("75 us", "time") == pytest.approx(75e-6)
    assert parse_quantity("1 MW", "power") == pytest.approx(1000.0)
    assert parse_quantity("10 mV/A", "resistance") == pytest.approx(0.01)
    assert parse_quantity("25 kV", "voltage") == pytest.approx(25e3)
    assert parse_quantity("15 MVA", "power") == pytest.approx(15e3)
    assert parse_quantity("50 kW/s", "power_rate") == pytest.approx(50.0)
    assert parse_quantity("0.5 J", "energy_j") == pytest.approx(0.5)


def test_no_space_form_and_longest_suffix():
    assert parse_quantity("5uH", "inductance") == pytest.approx(5e-6)
    # "mV/A" must not be read as V/A with a leading garbage digit
    assert parse_quantity("10mV/A", "resistance") == pytest.approx(0.01)


def test_bare_number_rejected_for_dimensioned():
    with pytest.raises(UnitError, match="missing unit"):
        parse_quantity(2.1, "capacitance", field="bus.c_bus")


def test_wrong_unit_names_field():
    with pytest.raises(UnitError, match="bus.c_bus"):
        parse_quantity("2.1 kW", "capacitance", field="bus.c_bus")


def test_fraction_accepts_bare_numbers():
    assert parse_quantity(0.25, "fraction") == 0.25
    assert parse_quantity("0.25", "fraction") == 0.25
    with pytest.raises(UnitError):
        parse_quantity(True, "fraction")
