"""Outcome of checking a certificate."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    check: str = ""  # name of the first violated check when not ok
    message: str = ""
    bound: Fraction | None = None

    @classmethod
    def success(cls, bound, detail: str = "") -> "VerificationReport":
        return cls(True, "", detail, Fraction(bound))

    @classmethod
    def failure(cls, check: str, message: str) -> "VerificationReport":
        return cls(False, check, message, None)

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return f"OK bound={self.bound}" + (f" ({self.message})" if self.message else "")
        return f"FAIL({self.check}): {self.message}"
