"""Error types and small numeric helpers shared across the package."""

from __future__ import annotations


class CostGuardError(RuntimeError):
    """Raised when a computation would exceed a declared cost guard.

    The ``guard`` attribute names the guard that tripped, so callers
    (notably the CLI) can report which limit was hit.
    """

    def __init__(self, guard: str, message: str):
        super().__init__(message)
        self.guard = guard


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


class KahanSum:
    """Compensated accumulator for complex values (Neumaier variant).

    Summation order still matters for bit-level reproducibility; callers
    must feed terms in a fixed order. The compensation just keeps the
    rounding floor flat when many small terms ride on a large partial sum.
    """

    __slots__ = ("_sr", "_si", "_cr", "_ci")

    def __init__(self) -> None:
        self._sr = 0.0
        self._si = 0.0
        self._cr = 0.0
        self._ci = 0.0

    def add(self, z: complex) -> None:
        zr = z.real
        zi = z.imag
        t = self._sr + zr
        if abs(self._sr) >= abs(zr):
            self._cr += (self._sr - t) + zr
        else:
            self._cr += (zr - t) + self._sr
        self._sr = t
        t = self._si + zi
        if abs(self._si) >= abs(zi):
            self._ci += (self._si - t) + zi
        else:
            self._ci += (zi - t) + self._si
        self._si = t

    @property
    def value(self) -> complex:
        return complex(self._sr + self._cr, self._si + self._ci)
