"""Static power and per-round energy accounting over the temperature presets.

The table stores the measured 1.8 V and 3.3 V supply powers per operating
point; totals are always the exact sum of the two. There is deliberately no
interpolation between temperatures: an unknown preset is an error, not a
guess.
"""

import csv
from dataclasses import dataclass
from typing import Dict, Tuple

from .errors import ParameterError, PresetLookupError


@dataclass(frozen=True)
class PowerTable:
    """preset name -> (p_1v8, p_3v3) in watts, plus the preset temperatures."""

    entries: Dict[str, Tuple[float, float]]
    temperatures: Dict[str, float]

    @classmethod
    def from_presets(cls, presets):
        """Collect power rows from presets that carry supply measurements."""
        entries = {}
        temperatures = {}
        for name, preset in presets.items():
            if preset.power_1v8 is not None:
                entries[name] = (preset.power_1v8, preset.power_3v3)
                temperatures[name] = preset.temperature
        return cls(entries=entries, temperatures=temperatures)

    def names_by_temperature(self):
        return sorted(self.entries, key=lambda n: self.temperatures[n])


def power_report(table, preset_name):
    """(p_1v8, p_3v3, total) in watts for one operating point."""
    if preset_name not in table.entries:
        known = ", ".join(sorted(table.entries))
        raise PresetLookupError(
            f"no power entry for preset {preset_name!r} (known: {known}); "
            "temperatures are not interpolated"
        )
    p_1v8, p_3v3 = table.entries[preset_name]
    return p_1v8, p_3v3, p_1v8 + p_3v3


def energy_per_round(table, preset_name, round_duration):
    """Static energy of one computing round: total power times duration."""
    if round_duration <= 0.0:
        raise ParameterError(f"round duration must be > 0, got {round_duration}")
    _, _, total = power_report(table, preset_name)
    return total * round_duration


def write_power_csv(table, path):
    """One row per operating point, coldest first."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["preset", "p_1v8_W", "p_3v3_W", "total_W"])
        for name in table.names_by_temperature():
            p_1v8, p_3v3, total = power_report(table, name)
            w.writerow([name, repr(p_1v8), repr(p_3v3), repr(total)])
