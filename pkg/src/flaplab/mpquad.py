"""Extended-precision adaptive quadrature with explicit cancellation accounting.

The engine is a classic error-driven bisection scheme: every panel carries an
embedded Gauss-Legendre pair (8 and 16 nodes), the pair difference is the
panel error estimate, and the worst panel is split until the estimates sum
below tolerance. Two honesty devices are load-bearing here:

  * cancellation_index = sum of |panel values| / |total|. It measures how many
    digits the signed panel sums destroyed, which is exactly the number of
    digits the working precision must dominate.
  * the rounding floor sum(|panel|) * 2^(3-bits) is folded into err_est, and
    PrecisionInsufficient is raised when that floor alone exceeds the
    requested tolerance, so an oscillatory integral can never come back as a
    confident wrong zero.

Complex integrands are supported; the rotated-ray-plus-inner-arc path used by
the transform layer lives in contour_integral.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from mpmath import mp

from ._nodes import gauss_legendre
from .errors import NonConvergence, PrecisionInsufficient, SectorDecayViolation

_N_LOW, _N_HIGH = 8, 16


@dataclass
class QuadResult:
    value: object            # mpf, or mpc for complex integrands
    err_est: object          # mpf >= 0
    cancellation_index: object  # mpf >= 1 (sum |panels| / |value|)
    evaluations: int

    def __add__(self, other: "QuadResult") -> "QuadResult":
        v = self.value + other.value
        sabs = (
            self.cancellation_index * abs(self.value)
            + other.cancellation_index * abs(other.value)
        )
        return QuadResult(
            value=v,
            err_est=self.err_est + other.err_est,
            cancellation_index=(sabs / abs(v)) if v != 0 else mp.inf,
            evaluations=self.evaluations + other.evaluations,
        )


@dataclass(frozen=True)
class ContourSpec:
    """Sector contour: inner arc of radius inner_radius, ray at angle_pi * pi.

    The outer arc is dropped; drop_check_radius is where the integrand is
    sampled to justify dropping it (|F| must be below drop_threshold).
    """

    inner_radius: float = 4.0
    angle_pi: float = 1.0 / 8.0   # angle as a fraction of pi
    outer_limit: float = mp.inf
    drop_check_radius: float = 30.0
    drop_threshold: float = 1e-200

    def __post_init__(self):
        if not (0 < self.angle_pi < 0.25):
            raise ValueError("angle must lie strictly inside (0, pi/4)")
        if self.inner_radius <= 0:
            raise ValueError("inner_radius must be positive")

    @property
    def angle(self):
        return mp.pi * mp.mpf(self.angle_pi)

    @property
    def sigma(self):
        return mp.cos(self.angle)


def _panel(f, a, b, lo_nodes, hi_nodes):
    mid = (a + b) / 2
    half = (b - a) / 2
    v_hi = mp.zero
    for x, w in hi_nodes:
        v_hi += w * f(mid + half * x)
    v_lo = mp.zero
    for x, w in lo_nodes:
        v_lo += w * f(mid + half * x)
    return v_hi * half, abs((v_hi - v_lo) * half)


def integrate(f, a, b, tol, bits, breakpoints=None, max_panels=4096) -> QuadResult:
    """Adaptive integral of f over [a, b] to absolute tolerance tol.

    breakpoints: optional initial interior panel edges (e.g. oscillation
    quarter-periods); adaptivity refines from there.
    """
    tol = mp.mpf(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    with mp.workprec(bits):
        a, b = mp.mpf(a), mp.mpf(b)
        if not a < b:
            raise ValueError("need a < b")
        lo_nodes = gauss_legendre(_N_LOW, bits)
        hi_nodes = gauss_legendre(_N_HIGH, bits)
        edges = [a]
        if breakpoints:
            edges += [mp.mpf(t) for t in breakpoints if a < mp.mpf(t) < b]
        edges.append(b)
        edges = sorted(set(edges))

        evals = 0
        heap = []
        panels = {}
        serial = 0
        total_err = mp.zero
        for i in range(len(edges) - 1):
            v, e = _panel(f, edges[i], edges[i + 1], lo_nodes, hi_nodes)
            evals += _N_LOW + _N_HIGH
            panels[serial] = (edges[i], edges[i + 1], v, e, True)
            heapq.heappush(heap, (-e, serial))
            total_err += e
            serial += 1

        floor = mp.mpf(2) ** (8 - bits)
        while total_err > tol and len(panels) < max_panels and heap:
            _, k = heapq.heappop(heap)
            if k not in panels or not panels[k][4]:
                continue
            pa, pb, pv, pe, _ = panels[k]
            if pe == 0 or (pb - pa) < floor * max(abs(pa), abs(pb), 1):
                # subdivision floor reached; freeze this panel
                panels[k] = (pa, pb, pv, pe, False)
                continue
            del panels[k]
            total_err -= pe
            pm = (pa + pb) / 2
            for lo, hi in ((pa, pm), (pm, pb)):
                v, e = _panel(f, lo, hi, lo_nodes, hi_nodes)
                evals += _N_LOW + _N_HIGH
                panels[serial] = (lo, hi, v, e, True)
                heapq.heappush(heap, (-e, serial))
                total_err += e
                serial += 1

        ordered = sorted(panels.values(), key=lambda p: p[0])
        value = mp.zero
        abs_sum = mp.zero
        pair_err = mp.zero
        for _, _, v, e, _active in ordered:
            value += v
            abs_sum += abs(v)
            pair_err += e

        noise = abs_sum * mp.mpf(2) ** (3 - bits)
        err = pair_err + noise
        if noise > tol:
            raise PrecisionInsufficient(
                f"rounding floor {mp.nstr(noise, 5)} exceeds tol {mp.nstr(tol, 5)} "
                f"at {bits} bits (cancellation too deep)"
            )
        if pair_err > tol:
            raise NonConvergence(
                f"err_est {mp.nstr(pair_err, 5)} > tol {mp.nstr(tol, 5)} "
                f"after {len(panels)} panels"
            )
        if value == 0:
            canc = mp.one if abs_sum == 0 else mp.inf
        else:
            canc = max(mp.one, abs_sum / abs(value))
        return QuadResult(value=value, err_est=err, cancellation_index=canc, evaluations=evals)


def integrate_semi_infinite(f, a, tol, bits, breakpoints=None, max_panels=4096) -> QuadResult:
    """Integral of f over [a, inf) via the compactifying map u = a + v/(1-v).

    The caller asserts super-polynomial (at least Gaussian-tail) decay of f, or
    at minimum integrable power decay; the map turns both into integrands that
    the finite-interval engine resolves, and the panel estimates near v = 1
    carry the tail truncation error.
    """
    with mp.workprec(bits):
        a = mp.mpf(a)

        def g(v):
            u = a + v / (1 - v)
            return f(u) / (1 - v) ** 2

        # default edges cluster toward v=1 (u decades)
        if breakpoints is None:
            us = [mp.mpf(2) ** k for k in range(0, 14)]
            breakpoints = [u / (1 + u) for u in us]
        return integrate(g, mp.zero, mp.one, tol, bits, breakpoints=breakpoints,
                         max_panels=max_panels)


def _ray_leg(F, spec: ContourSpec, tol, bits, max_windows=64) -> QuadResult:
    """e^{i theta} * integral of F along the ray r e^{i theta}, r from R on out."""
    with mp.workprec(bits):
        R = mp.mpf(spec.inner_radius)
        rot = mp.expjpi(mp.mpf(spec.angle_pi))

        def fr(r):
            return F(r * rot)

        win = mp.mpf(2)
        lo = R
        total = None
        prev_end_mag = abs(fr(R))
        grow_count = 0
        for _ in range(max_windows):
            hi = lo + win
            if spec.outer_limit != mp.inf and hi > spec.outer_limit:
                hi = mp.mpf(spec.outer_limit)
            part = integrate(fr, lo, hi, tol / 4, bits)
            total = part if total is None else total + part
            end_mag = abs(fr(hi))
            if end_mag > prev_end_mag:
                grow_count += 1
                if grow_count >= 2:
                    raise SectorDecayViolation(
                        f"|F| grows along the ray near r = {mp.nstr(hi, 6)}"
                    )
            else:
                grow_count = 0
            prev_end_mag = end_mag
            if (abs(part.value) <= tol / 4 and end_mag * win <= tol / 4) or (
                spec.outer_limit != mp.inf and hi >= spec.outer_limit
            ):
                # fold the (bounded) remaining tail into the error estimate
                total = QuadResult(
                    value=total.value,
                    err_est=total.err_est + end_mag * win,
                    cancellation_index=total.cancellation_index,
                    evaluations=total.evaluations + 2,
                )
                break
            lo = hi
            win *= 2
        else:
            raise NonConvergence("ray leg did not reach its decay floor")
        return QuadResult(
            value=total.value * rot,
            err_est=total.err_est,
            cancellation_index=total.cancellation_index,
            evaluations=total.evaluations,
        )


def _arc_leg(F, spec: ContourSpec, tol, bits, breakpoints=None) -> QuadResult:
    """Inner-arc integral of F(R e^{i phi}) i R e^{i phi} for phi in [0, theta]."""
    with mp.workprec(bits):
        R = mp.mpf(spec.inner_radius)

        def fa(phi):
            z = R * mp.expj(phi)
            return F(z) * 1j * z

        theta = spec.angle
        if breakpoints is None:
            # quarter periods of the leading phase R^4 sin(4 phi) ~ 4 R^4 phi
            step = mp.pi / (8 * R**4)
            n = int(theta / step) + 1
            n = min(n, 2048)
            breakpoints = [theta * mp.mpf(k) / n for k in range(1, n)]
        return integrate(fa, mp.zero, theta, tol, bits, breakpoints=breakpoints,
                         max_panels=8192)


def contour_integral(F, spec: ContourSpec, tol, bits, arc_breakpoints=None,
                     check_outer_drop=True):
    """Rotated-sector path: returns (ray QuadResult, inner-arc QuadResult).

    The outer arc is dropped; with check_outer_drop the integrand is sampled at
    drop_check_radius on three angles and must be below drop_threshold there.
    """
    with mp.workprec(bits):
        if check_outer_drop and spec.outer_limit == mp.inf:
            L = mp.mpf(spec.drop_check_radius)
            for frac in (mp.zero, mp.mpf(0.5), mp.one):
                z = L * mp.expj(spec.angle * frac)
                if abs(F(z)) >= mp.mpf(spec.drop_threshold):
                    raise SectorDecayViolation(
                        f"|F({mp.nstr(z, 5)})| not below {spec.drop_threshold}; "
                        "outer arc cannot be dropped"
                    )
        i_part = _ray_leg(F, spec, tol, bits)
        j_part = _arc_leg(F, spec, tol, bits, breakpoints=arc_breakpoints)
        return i_part, j_part
