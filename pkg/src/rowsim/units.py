"""Quantity parsing with mandatory unit suffixes.

Scenario files carry every physical value as a string like "2.1 mF" or
"75 us". Bare numbers are accepted only for dimensionless quantities
(fractions, counts, seeds). Everything is converted to one canonical unit
per dimension:

    power        kW          energy       kWh
    time         s           voltage      V
    current      A           resistance   V/A (ohm)
    capacitance  F           inductance   H
    frequency    Hz          power_rate   kW/s
    current_rate A/s         insulation   kohm
    angle        deg         fraction     (unitless)

Unit bugs are the dominant failure class in this domain, so parse errors
are collected (not raised one at a time) with full field paths.
"""

from __future__ import annotations

# dimension -> {suffix: multiplier to canonical}
_TABLES: dict[str, dict[str, float]] = {
    "power": {"kW": 1.0, "MW": 1e3, "W": 1e-3, "MVA": 1e3, "kVA": 1.0},
    "energy": {"kWh": 1.0, "MWh": 1e3, "Wh": 1e-3, "J": 1.0 / 3.6e6, "kJ": 1.0 / 3600.0},
    "energy_j": {"J": 1.0, "kJ": 1e3, "mJ": 1e-3, "Wh": 3600.0},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "min": 60.0, "h": 3600.0},
    "voltage": {"V": 1.0, "kV": 1e3, "mV": 1e-3},
    "current": {"A": 1.0, "kA": 1e3},
    "resistance": {"ohm": 1.0, "mohm": 1e-3, "uohm": 1e-6, "V/A": 1.0, "mV/A": 1e-3},
    "capacitance": {"F": 1.0, "mF": 1e-3, "uF": 1e-6, "μF": 1e-6},
    "inductance": {"H": 1.0, "mH": 1e-3, "uH": 1e-6, "μH": 1e-6},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
    "power_rate": {"kW/s": 1.0, "MW/s": 1e3, "W/s": 1e-3},
    "current_rate": {"A/s": 1.0, "kA/s": 1e3, "A/us": 1e6},
    "insulation": {"kohm": 1.0, "Mohm": 1e3, "Gohm": 1e6, "ohm": 1e-3},
    "angle": {"deg": 1.0},
}


class UnitError(ValueError):
    """A quantity string that cannot be interpreted in its dimension."""


def parse_quantity(value, dimension: str, field: str = "") -> float:
    """Convert ``value`` ("2.1 mF", "75 us", ...) to the canonical unit.

    Dimensionless dimensions ("fraction", "count") accept bare numbers.
    Raises UnitError naming the field on any mismatch.
    """
    where = f" (field {field!r})" if field else ""
    if dimension in ("fraction", "count"):
        if isinstance(value, bool):
            raise UnitError(f"expected a number, got a boolean{where}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise UnitError(f"cannot parse {value!r} as a plain number{where}") from None
        raise UnitError(f"cannot parse {value!r} as a plain number{where}")

    table = _TABLES.get(dimension)
    if table is None:
        raise UnitError(f"unknown dimension {dimension!r}{where}")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        raise UnitError(
            f"missing unit annotation: {value!r} needs a {dimension} suffix "
            f"(one of {sorted(table)}){where}"
        )
    if not isinstance(value, str):
        raise UnitError(f"cannot parse {value!r} as a {dimension}{where}")

    parts = value.strip().split()
    if len(parts) == 1:
        # allow "2.1mF" written without the space
        text = parts[0]
        for suffix in sorted(table, key=len, reverse=True):
            if text.endswith(suffix):
                num, unit = text[: -len(suffix)], suffix
                break
        else:
            raise UnitError(f"no {dimension} unit found in {value!r}{where}")
    elif len(parts) == 2:
        num, unit = parts
    else:
        raise UnitError(f"malformed quantity {value!r}{where}")

    if unit not in table:
        raise UnitError(
            f"{unit!r} is not a {dimension} unit (expected one of {sorted(table)}){where}"
        )
    try:
        return float(num) * table[unit]
    except ValueError:
        raise UnitError(f"bad numeric part in {value!r}{where}") from None


def fmt_quantity(value: float, dimension: str) -> str:
    """Render a canonical value back with its canonical suffix (for reports)."""
    canonical = {
        "power": "kW",
        "energy": "kWh",
        "time": "s",
        "voltage": "V",
        "current": "A",
        "resistance": "V/A",
        "capacitance": "F",
        "inductance": "H",
        "frequency": "Hz",
        "power_rate": "kW/s",
        "current_rate": "A/s",
        "insulation": "kohm",
        "angle": "deg",
    }.get(dimension, "")
    return f"{value:g} {canonical}".strip()
