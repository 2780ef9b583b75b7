"""Smooth building blocks: the cutoff chi, the flat oscillatory bump b, and the
endpoint ramp w.

All three are evaluated exactly (closed formulas) at arbitrary precision:

    chi(s)   smooth cutoff, identically 1 on [0, flat_end], identically 0 from
             supp_end on, spliced in between from the flat profile psi,
    b(s)   = chi(s) * exp(-1/s^2) * sin(s^-4),   b(0) = 0,
    w(s)     smooth monotone ramp, 0 on [0, 1/2], w(1) = 1.

b is C-infinity, compactly supported in [0, supp_end), flat to infinite order
at s = 0, and oscillates with phase s^-4. b and w have disjoint supports as
long as supp_end <= 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from mpmath import mp

# Below this s the factor exp(-1/s^2) is under exp(-10^6); every consumer of b
# treats that as an exact zero (it is beneath any scale reached elsewhere).
B_ZERO_CUT = 1e-3

PROFILES = ("exp_splice", "exp_splice_sq")
_PROFILE_POW = {"exp_splice": 1, "exp_splice_sq": 2}


@dataclass(frozen=True)
class BumpSpec:
    """Geometry and transition profile of the cutoff chi.

    flat_end / supp_end delimit the plateau and the support; profile selects
    the splice kernel psi (exp(-a/t) or exp(-a/t^2)) with steepness a.
    """

    flat_end: float = 0.25
    supp_end: float = 1.0 / 3.0
    profile: str = "exp_splice"
    steepness: float = 1.0

    def __post_init__(self):
        if not (0 < self.flat_end < self.supp_end < 1):
            raise ValueError("need 0 < flat_end < supp_end < 1")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}, admissible: {PROFILES}")
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")

    @property
    def width(self):
        return mp.mpf(self.supp_end) - mp.mpf(self.flat_end)


DEFAULT_SPEC = BumpSpec()


def _psi(spec: BumpSpec, t):
    """Flat profile: exp(-a / t^pow) for t > 0, zero for t <= 0."""
    if t <= 0:
        return mp.zero
    p = _PROFILE_POW[spec.profile]
    return mp.exp(-mp.mpf(spec.steepness) / t**p)


def _psi_prime(spec: BumpSpec, t):
    if t <= 0:
        return mp.zero
    p = _PROFILE_POW[spec.profile]
    a = mp.mpf(spec.steepness)
    return (a * p / t ** (p + 1)) * _psi(spec, t)


def _splice(spec: BumpSpec, t):
    """g(t) = psi(t) / (psi(t) + psi(1-t)); 0 at t<=0, 1 at t>=1, smooth, increasing."""
    if t <= 0:
        return mp.zero
    if t >= 1:
        return mp.one
    p, q = _psi(spec, t), _psi(spec, 1 - t)
    return p / (p + q)


def _splice_prime(spec: BumpSpec, t):
    if t <= 0 or t >= 1:
        return mp.zero
    p, q = _psi(spec, t), _psi(spec, 1 - t)
    dp, dq = _psi_prime(spec, t), _psi_prime(spec, 1 - t)
    return (dp * q + p * dq) / (p + q) ** 2


def _check_domain(s):
    if s < 0 or s > 1:
        raise ValueError(f"s = {s} outside [0, 1]")


def eval_chi(spec: BumpSpec, s, bits: int | None = None):
    """Cutoff chi(s): 1 on the plateau, 0 beyond the support, spliced between."""
    with mp.workprec(bits or mp.prec):
        s = mp.mpf(s)
        _check_domain(s)
        if s <= spec.flat_end:
            return mp.one
        if s >= spec.supp_end:
            return mp.zero
        t2 = (mp.mpf(spec.supp_end) - s) / spec.width
        return _splice(spec, t2)


def eval_chi_prime(spec: BumpSpec, s, bits: int | None = None):
    with mp.workprec(bits or mp.prec):
        s = mp.mpf(s)
        _check_domain(s)
        if s <= spec.flat_end or s >= spec.supp_end:
            return mp.zero
        t2 = (mp.mpf(spec.supp_end) - s) / spec.width
        return -_splice_prime(spec, t2) / spec.width


def eval_b(spec: BumpSpec, s, bits: int | None = None):
    """b(s) = chi(s) exp(-1/s^2) sin(s^-4); exact 0 at s = 0 and beyond supp_end."""
    with mp.workprec(bits or mp.prec):
        s = mp.mpf(s)
        _check_domain(s)
        if s <= B_ZERO_CUT or s >= spec.supp_end:
            return mp.zero
        return eval_chi(spec, s) * mp.exp(-1 / s**2) * mp.sin(s**-4)


def eval_b_prime(spec: BumpSpec, s, bits: int | None = None):
    """Exact derivative of b by product/chain rule on its three factors."""
    with mp.workprec(bits or mp.prec):
        s = mp.mpf(s)
        _check_domain(s)
        if s <= B_ZERO_CUT or s >= spec.supp_end:
            return mp.zero
        flat = mp.exp(-1 / s**2)
        phase = s**-4
        sn, cs = mp.sin(phase), mp.cos(phase)
        chi = eval_chi(spec, s)
        chip = eval_chi_prime(spec, s)
        return (
            chip * flat * sn
            + chi * flat * (2 / s**3) * sn
            - chi * flat * (4 / s**5) * cs
        )


def eval_w(s, bits: int | None = None, spec: BumpSpec = DEFAULT_SPEC):
    """Monotone ramp w: 0 on [0, 1/2], 1 at s = 1, spliced with the same profile."""
    with mp.workprec(bits or mp.prec):
        s = mp.mpf(s)
        _check_domain(s)
        if s <= mp.mpf(1) / 2:
            return mp.zero
        if s >= 1:
            return mp.one
        return _splice(spec, 2 * s - 1)


# ---------------------------------------------------------------------------
# float64 companions, used only to locate extrema / envelope cut points; every
# certified value is then recomputed in mpmath.
# ---------------------------------------------------------------------------

def b_float(spec: BumpSpec, s: float) -> float:
    import math

    if s <= B_ZERO_CUT or s >= spec.supp_end:
        return 0.0
    if s <= spec.flat_end:
        c = 1.0
    else:
        t2 = (spec.supp_end - s) / float(spec.width)
        p = _PROFILE_POW[spec.profile]
        a = spec.steepness
        try:
            pp = math.exp(-a / t2**p)
            qq = math.exp(-a / (1 - t2) ** p)
        except OverflowError:
            return 0.0
        c = pp / (pp + qq)
    return c * math.exp(-1 / s**2) * math.sin(s**-4)


def b_prime_float(spec: BumpSpec, s: float) -> float:
    import math

    if s <= B_ZERO_CUT or s >= spec.supp_end:
        return 0.0
    if s <= spec.flat_end:
        c, cp = 1.0, 0.0
    else:
        t2 = (spec.supp_end - s) / float(spec.width)
        p = _PROFILE_POW[spec.profile]
        a = spec.steepness
        try:
            pp = math.exp(-a / t2**p)
            qq = math.exp(-a / (1 - t2) ** p)
        except OverflowError:
            return 0.0
        c = pp / (pp + qq)
        dpp = a * p / t2 ** (p + 1) * pp
        dqq = a * p / (1 - t2) ** (p + 1) * qq
        cp = -(dpp * qq + pp * dqq) / (pp + qq) ** 2 / float(spec.width)
    flat = math.exp(-1 / s**2)
    ph = s**-4
    return cp * flat * math.sin(ph) + c * flat * (
        (2 / s**3) * math.sin(ph) - (4 / s**5) * math.cos(ph)
    )


def _scan_sup(fn, spec: BumpSpec, refine, bits: int, n_scan: int):
    lo, hi = 0.05, spec.supp_end - 1e-12
    best_s, best_v = lo, 0.0
    step = (hi - lo) / n_scan
    for i in range(n_scan + 1):
        s = lo + i * step
        v = abs(fn(spec, s))
        if v > best_v:
            best_s, best_v = s, v
    with mp.workprec(bits):
        fine_best = mp.zero
        for j in range(-100, 101):
            s = mp.mpf(best_s) + j * mp.mpf(step) / 50
            if 0 < s < spec.supp_end:
                fine_best = max(fine_best, abs(refine(spec, s)))
    return fine_best


def sup_abs_b(spec: BumpSpec, bits: int = 192, n_scan: int = 400_000):
    """sup_s |b(s)| by dense float scan plus mpmath refinement near the maximizer."""
    return _scan_sup(b_float, spec, eval_b, bits, n_scan)


def sup_abs_b_prime(spec: BumpSpec, bits: int = 192, n_scan: int = 400_000):
    """sup_s |b'(s)|, same scan/refine strategy as sup_abs_b."""
    return _scan_sup(b_prime_float, spec, eval_b_prime, bits, n_scan)
