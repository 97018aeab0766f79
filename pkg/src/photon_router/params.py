"""Physical parameters of the atom / toroid / taper system.

All user-facing rates and detunings are frequencies in MHz, i.e. the paper
style value/2pi.  Internally everything is converted to angular rates in
rad/us (multiply by 2*pi; 1 MHz = 2*pi rad/us), with time in microseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


def angular(freq_mhz: float) -> float:
    """MHz (value/2pi) -> angular rate in rad/us."""
    return TWO_PI * freq_mhz


@dataclass(frozen=True)
class SystemParams:
    """Rates in MHz; kx in radians.

    delta_ac = omega_A - omega_C, delta_ap = omega_A - omega_p; the
    cavity-probe detuning used in spectra is delta_cp = delta_ap - delta_ac.
    drive_ep is |E_p| expressed as a rate amplitude in MHz.
    """

    g_tw: float = 50.0
    kappa_ex: float = 300.0
    kappa_i: float = 20.0
    h: float = 10.0
    gamma: float = 5.2
    delta_ac: float = 0.0
    delta_ap: float = 0.0
    drive_ep: float = 0.0
    kx: float = 0.0

    def __post_init__(self) -> None:
        for name in ("g_tw", "kappa_ex", "kappa_i", "h", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.kappa_ex + self.kappa_i <= 0:
            raise ConfigError("kappa_ex + kappa_i must be > 0")
        if not 0.0 <= self.kx < TWO_PI:
            object.__setattr__(self, "kx", self.kx % TWO_PI)

    @property
    def kappa(self) -> float:
        """Total cavity field decay rate kappa_ex + kappa_i (MHz)."""
        return self.kappa_ex + self.kappa_i

    @property
    def delta_cp(self) -> float:
        """omega_C - omega_p (MHz)."""
        return self.delta_ap - self.delta_ac

    def with_(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)

    def to_mapping(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_mapping(cls, mapping: dict[str, float], **overrides) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        bad = set(mapping) - known
        if bad:
            raise ConfigError(f"unknown parameter keys: {sorted(bad)}")
        merged = {**mapping, **overrides}
        return cls(**merged)


# Operating point of the experiment (Fig. 1 caption values plus the Cs decay rate).
FIG1_PARAMS = SystemParams(g_tw=50.0, kappa_ex=300.0, kappa_i=20.0, h=10.0, gamma=5.2)


def parse_kv_lines(lines) -> dict[str, float]:
    """Parse 'name = value' lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, float] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'name = value', got {raw!r}")
        name, _, value = line.partition("=")
        try:
            out[name.strip()] = float(value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad numeric value {value.strip()!r}") from exc
    return out


def read_params_file(path) -> dict[str, float]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_lines(fh)


def write_params_file(path, mapping: dict[str, float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in mapping.items():
            fh.write(f"{key} = {value!r}\n")
