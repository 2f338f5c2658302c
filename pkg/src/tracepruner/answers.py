"""Rule-based final-answer normalization and binary equivalence reward.

Approximates a verifier-style grader with exact-rational plus
normalized-string equality; no symbolic CAS equivalence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")
_FRACTION_RE = re.compile(r"^([+-]?\d+)\s*/\s*(\d+)$")


@dataclass(frozen=True)
class NormalizedAnswer:
    canonical: str
    numeric: Optional[Fraction] = None


def _strip_wrappers(s: str) -> str:
    s = s.strip()
    m = re.fullmatch(r"\\boxed\{(.*)\}", s, flags=re.DOTALL)
    if m:
        s = m.group(1).strip()
    if len(s) >= 2 and s.startswith("$") and s.endswith("$"):
        s = s[1:-1].strip()
    if s.endswith("."):
        s = s[:-1].rstrip()
    return s


def _parse_numeric(s: str) -> Optional[Fraction]:
    s = s.replace(",", "")  # "1,000" -> "1000"
    percent = False
    if s.endswith("%"):
        percent = True
        s = s[:-1].strip()
    value: Optional[Fraction] = None
    if _NUMBER_RE.match(s):
        value = Fraction(s)
    else:
        m = _FRACTION_RE.match(s)
        if m:
            denom = int(m.group(2))
            if denom == 0:
                return None
            value = Fraction(int(m.group(1)), denom)
    if value is not None and percent:
        value /= 100
    return value


def _canonical_numeric(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def normalize(raw: str) -> NormalizedAnswer:
    """Trim, unwrap \\boxed{}/$...$, drop a trailing period, lowercase, and
    parse integer / decimal / fraction / percent forms into an exact rational."""
    s = _strip_wrappers(raw if raw is not None else "")
    s = " ".join(s.lower().split())
    numeric = _parse_numeric(s)
    if numeric is not None:
        return NormalizedAnswer(_canonical_numeric(numeric), numeric)
    return NormalizedAnswer(s, None)


def reward(a: str, b: str) -> int:
    """1 iff the answers are equivalent (exact rationals, else canonical strings)."""
    na, nb = normalize(a), normalize(b)
    if na.numeric is not None and nb.numeric is not None:
        return int(na.numeric == nb.numeric)
    return int(na.canonical == nb.canonical)
