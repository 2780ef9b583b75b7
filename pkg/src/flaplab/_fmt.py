"""Canonical deterministic formatting for emitted values.

Outputs must be byte-identical across reruns, so every mp number is written
in scientific notation with an explicit exponent and a fixed number of
significant digits, and JSON documents are emitted with sorted keys.
"""
from __future__ import annotations

import json
from decimal import Decimal

from mpmath import mp

FMT_DIGITS = 25


def fmt_mp(v, sig: int = FMT_DIGITS) -> str:
    v = mp.mpf(v) if not hasattr(v, "_mpf_") else v
    if mp.isnan(v):
        return "nan"
    if v == mp.inf:
        return "inf"
    if v == mp.ninf:
        return "-inf"
    if v == 0:
        return "0.0e+0"
    d = Decimal(mp.nstr(v, sig, strip_zeros=False))
    s = f"{d:.{sig - 1}E}".replace("E", "e")
    # normalize exponent: no leading zeros, keep sign
    mant, exp = s.split("e")
    sign = "+" if not exp.startswith("-") else "-"
    return f"{mant}e{sign}{int(exp.lstrip('+-'))}"


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
