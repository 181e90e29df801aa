"""Physical constants and frequency helpers (SI)."""

from __future__ import annotations

import math

from scipy import constants

C0 = constants.c
ETA0 = math.sqrt(constants.mu_0 / constants.epsilon_0)


def wavenumber(frequency: float) -> float:
    return 2.0 * math.pi * float(frequency) / C0


def frequency_from_wavenumber(k0: float) -> float:
    return float(k0) * C0 / (2.0 * math.pi)
