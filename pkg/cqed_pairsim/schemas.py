from __future__ import annotations

import re
from typing import Dict, List, Sequence

# Column contract for every CSV the runners emit. Units are fixed: energies and
# rates in GHz (rad/ns), times in ns, everything else dimensionless.
COLUMN_UNITS: Dict[str, str] = {
    "delta1_GHz": "GHz",
    "gap_GHz": "GHz",
    "P1": "1",
    "P2": "1",
    "Ps_plus": "1",
    "Ps_minus": "1",
    "P1_prime": "1",
    "P2_prime": "1",
    "variant": "label",
    "t_ns": "ns",
    "P_1gg": "1",
    "P_0ee": "1",
    "P_0gg": "1",
    "P_psi3": "1",
    "P_psi4": "1",
    "photon_number": "photons",
    "gq2": "1",
    "flux": "photons/ns",
    "trace_error": "1",
    "ratio": "1",
    "delta1_star_GHz": "GHz",
    "beta1": "1",
    "beta2": "1",
    "chi_GHz": "GHz",
    "Gs_GHz": "GHz",
    "G1_GHz": "GHz",
    "G2_GHz": "GHz",
    "half_rabi_time_ns": "ns",
    "adiabaticity": "1",
}

_ENERGY_RE = re.compile(r"^E\d+_GHz$")

SPECTRUM_COLUMNS_TAIL = ["gap_GHz", "P1", "P2", "Ps_plus", "Ps_minus", "P1_prime", "P2_prime", "variant"]
LZ_COLUMNS = ["t_ns", "P_1gg", "P_0ee", "delta1_GHz", "P_psi3", "P_psi4"]
RABI_COLUMNS = ["t_ns", "photon_number", "gq2", "flux", "P_0gg", "P_1gg", "P_0ee", "trace_error"]
INTERFERENCE_COLUMNS = ["ratio", "delta1_star_GHz", "gap_GHz"]
DERIVED_COLUMNS = ["beta1", "beta2", "chi_GHz", "Gs_GHz", "G1_GHz", "G2_GHz", "half_rabi_time_ns"]


def spectrum_columns(levels: int) -> List[str]:
    return ["delta1_GHz"] + [f"E{k}_GHz" for k in range(levels)] + SPECTRUM_COLUMNS_TAIL


def unit_of(column: str) -> str:
    if _ENERGY_RE.match(column):
        return "GHz"
    try:
        return COLUMN_UNITS[column]
    except KeyError:
        raise KeyError(f"column {column!r} has no documented unit") from None


def units_comment(columns: Sequence[str]) -> str:
    return "units: " + ", ".join(f"{c}={unit_of(c)}" for c in columns)
