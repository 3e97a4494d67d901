"""Physical constants used throughout the package (CODATA, via scipy)."""

from dataclasses import dataclass

import scipy.constants


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants in SI units."""

    hbar: float = scipy.constants.hbar        # J s
    k_B: float = scipy.constants.Boltzmann    # J/K
    c: float = scipy.constants.c              # m/s

    def __post_init__(self):
        if not (self.hbar > 0 and self.k_B > 0 and self.c > 0):
            raise ValueError("physical constants must be strictly positive")


CODATA = PhysicalConstants()
