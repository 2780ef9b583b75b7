"""Cached quarter-period panel grids for integrals against the oscillatory bump.

Every transform in this package integrates e^(-s/x) (或 e^(-(s-t)/x)) against
b, b^2, or b(1+eta*b) over the bump support. The oscillation sin(s^-4) fixes
the panel geometry independently of x: panels split the phase s^-4 at
multiples of pi/2, so each panel sees a sign-definite quarter wave. The bump
values at the Gauss nodes are therefore cached once per (spec, bits) and every
x only pays one exponential per node.

Error accounting per transform:
  * embedded GL8/GL16 pair difference per panel,
  * analytic bound for panels culled by the envelope exp(-s/x - k/s^2),
  * analytic bound for the (0, s_min) tail,
  * rounding floor sum|panel| * 2^(3-bits).
"""
from __future__ import annotations

import math

from mpmath import mp

from ._nodes import gauss_legendre
from .errors import NonConvergence, PrecisionInsufficient
from .mpquad import QuadResult
from .smoothfn import BumpSpec, eval_b

_GRID_CACHE: dict = {}

# integrand kinds: envelope power of exp(-k/s^2) and magnitude cap of the
# non-envelope factor (|sin| <= 1, chi <= 1, |1 + eta b| <= 2 when |eta b| <= 1)
_KIND_ENV = {"b": 1, "b2": 2, "qb": 1}


def phase_breaks(s_lo, s_hi, step_pi=0.5):
    """Breakpoints of the phase s^-4 at multiples of step_pi * pi in [s_lo, s_hi]."""
    step = math.pi * step_pi
    phi_lo = float(s_hi) ** -4
    phi_hi = float(s_lo) ** -4
    k_lo = int(math.floor(phi_lo / step))
    k_hi = int(math.ceil(phi_hi / step))
    out = [mp.mpf(s_lo)]
    for k in range(k_hi - 1, k_lo, -1):
        s = (k * mp.pi * mp.mpf(step_pi)) ** (-mp.mpf(1) / 4)
        if s_lo < s < s_hi:
            out.append(s)
    out.append(mp.mpf(s_hi))
    return out


class BumpGrid:
    """Panelized [s_min, supp_end] with cached (s, w*b(s), w*b(s)^2) per node."""

    def __init__(self, spec: BumpSpec, bits: int, s_min: float, step_pi: float = 0.5):
        self.spec = spec
        self.bits = bits
        self.s_min = float(s_min)
        self.step_pi = step_pi
        work = bits + 16
        with mp.workprec(work):
            edges = phase_breaks(mp.mpf(s_min), mp.mpf(spec.supp_end), step_pi)
            # the plateau/transition boundary is always a panel edge, so the
            # plateau-only and transition-only pieces are exact panel unions
            fe = mp.mpf(spec.flat_end)
            if s_min < float(fe):
                edges = sorted(set(edges + [fe]))
            n16 = gauss_legendre(16, work)
            n8 = gauss_legendre(8, work)
            self.panels = []
            for i in range(len(edges) - 1):
                a, b = edges[i], edges[i + 1]
                mid, half = (a + b) / 2, (b - a) / 2
                rows16 = []
                for xn, wn in n16:
                    s = mid + half * xn
                    bv = eval_b(spec, s)
                    w = wn * half
                    rows16.append((s, w * bv, w * bv * bv))
                rows8 = []
                for xn, wn in n8:
                    s = mid + half * xn
                    bv = eval_b(spec, s)
                    w = wn * half
                    rows8.append((s, w * bv, w * bv * bv))
                self.panels.append((float(a), float(b), rows16, rows8))

    # -- envelope helpers (float, log scale) --------------------------------

    def _env_log(self, s: float, x: float, kenv: int) -> float:
        return -(s / x + kenv / (s * s))

    def tail_bound(self, x, kenv: int):
        """Bound for the dropped (0, s_min) piece: envelope max times length."""
        s0 = mp.mpf(self.s_min)
        return min(s0, mp.mpf(x)) * mp.exp(-s0 / x - kenv / s0**2)

    # -- main entry ----------------------------------------------------------

    def transform(self, x, kind: str = "b", tol_rel=None, eta=None, pk=None,
                  s_from=None, s_to=None) -> QuadResult:
        """QuadResult for integral of e^(-s/x) * g(s) over the panel range
        [max(s_min, s_from), min(supp_end, s_to)].

        kind selects g: 'b', 'b2', or 'qb' for b*(1 + eta*b). pk, when given,
        is a polynomial coefficient list (ascending) multiplied in as
        pk(s/x), used by the differentiated transforms. s_from/s_to must land
        on panel edges to be exact (flat_end always is).
        """
        if kind not in _KIND_ENV:
            raise ValueError(f"unknown integrand kind {kind!r}")
        kenv = _KIND_ENV[kind]
        bits = self.bits
        with mp.workprec(bits):
            x = mp.mpf(x)
            xf = float(x)
            tol_rel = mp.mpf(tol_rel) if tol_rel is not None else mp.mpf(10) ** -12
            if eta is not None:
                eta = mp.mpf(eta)
                if kind != "qb":
                    raise ValueError("eta only applies to kind='qb'")
            elif kind == "qb":
                raise ValueError("kind='qb' requires eta")

            # panels are used only when they lie fully inside the cut window; a
            # panel straddling s_from is the caller's job (shifted_transform)
            lo_cut = self.s_min if s_from is None else max(self.s_min, float(s_from))
            lo_cut -= 1e-12
            hi_cut = float(self.spec.supp_end) if s_to is None else float(s_to)
            hi_cut += 1e-12

            # envelope culling threshold (log scale)
            env_peaks = []
            for alo, ahi, _, _ in self.panels:
                if alo < lo_cut or ahi > hi_cut:
                    continue
                env_peaks.append(max(self._env_log(alo, xf, kenv),
                                     self._env_log(ahi, xf, kenv)))
            if not env_peaks:
                zero = QuadResult(mp.zero, self.tail_bound(x, kenv), mp.one, 0)
                return zero
            peak = max(env_peaks)
            n = len(env_peaks)
            thr = peak + float(mp.log(tol_rel)) - math.log(8 * n) - 14.0

            value = mp.zero
            abs_sum = mp.zero
            pair_err = mp.zero
            dropped = mp.zero
            evals = 0
            for alo, ahi, rows16, rows8 in self.panels:
                if alo < lo_cut or ahi > hi_cut:
                    continue
                e_log = max(self._env_log(alo, xf, kenv),
                            self._env_log(ahi, xf, kenv))
                if e_log < thr:
                    dropped += mp.mpf(ahi - alo) * mp.exp(mp.mpf(e_log)) * 2
                    continue
                v16 = self._panel_sum(rows16, x, kind, eta, pk)
                v8 = self._panel_sum(rows8, x, kind, eta, pk)
                evals += 24
                value += v16
                abs_sum += abs(v16)
                pair_err += abs(v16 - v8)

            err = pair_err + dropped
            if s_from is None or float(s_from) <= self.s_min:
                err += self.tail_bound(x, kenv)
            noise = abs_sum * mp.mpf(2) ** (3 - bits)
            err += noise
            tol_abs = tol_rel * abs_sum if abs_sum > 0 else tol_rel
            if noise > tol_abs and abs_sum > 0:
                raise PrecisionInsufficient(
                    f"cancellation floor {mp.nstr(noise, 5)} above relative "
                    f"tolerance at {bits} bits"
                )
            if pair_err > tol_abs and abs_sum > 0:
                raise NonConvergence(
                    f"panel pair error {mp.nstr(pair_err, 5)} above tolerance; "
                    "use a finer phase grid"
                )
            if value == 0:
                canc = mp.one if abs_sum == 0 else mp.inf
            else:
                canc = max(mp.one, abs_sum / abs(value))
            return QuadResult(value=value, err_est=err, cancellation_index=canc,
                              evaluations=evals)

    def _panel_sum(self, rows, x, kind, eta, pk):
        acc = mp.zero
        if kind == "b" and pk is None:
            for s, wb, _ in rows:
                if wb:
                    acc += wb * mp.exp(-s / x)
        elif kind == "b2" and pk is None:
            for s, _, wb2 in rows:
                if wb2:
                    acc += wb2 * mp.exp(-s / x)
        elif kind == "qb" and pk is None:
            for s, wb, wb2 in rows:
                if wb or wb2:
                    acc += (wb + eta * wb2) * mp.exp(-s / x)
        else:
            for s, wb, wb2 in rows:
                if kind == "b":
                    base = wb
                elif kind == "b2":
                    base = wb2
                else:
                    base = wb + eta * wb2
                if base:
                    u = s / x
                    acc += base * mp.exp(-u) * _polyval(pk, u)
        return acc

    def shifted_transform(self, t, x, eta=None) -> QuadResult:
        """Integral of e^(-(s-t)/x) b(s) (1 + eta b(s)) ds over [t, supp_end].

        Used by the solution-field formula. The panel containing t is
        integrated freshly; whole panels reuse the cache; the e^(t/x) shift is
        applied at full precision afterwards.
        """
        bits = self.bits
        spec = self.spec
        with mp.workprec(bits):
            t = mp.mpf(t)
            x = mp.mpf(x)
            eta_v = mp.mpf(eta) if eta is not None else mp.zero
            if t >= spec.supp_end:
                return QuadResult(mp.zero, mp.zero, mp.one, 0)
            kind = "qb" if eta is not None else "b"
            res = self.transform(x, kind=kind, eta=eta_v if eta is not None else None,
                                 s_from=t)
            # partial panel [t, hi) for the panel straddling t, plus the
            # [t, s_min) gap when t is below the grid (envelope-bounded there)
            extra = mp.zero
            extra_err = mp.zero
            evals = 0
            tf = float(t)
            if tf < self.s_min:
                gap = mp.mpf(self.s_min) - t
                extra_err += gap * mp.exp(-1 / mp.mpf(self.s_min) ** 2) * 2
            else:
                for alo, ahi, _, _ in self.panels:
                    if alo < tf < ahi:
                        n16 = gauss_legendre(16, bits + 16)
                        n8 = gauss_legendre(8, bits + 16)
                        hi = mp.mpf(ahi)
                        mid, half = (t + hi) / 2, (hi - t) / 2
                        v16 = mp.zero
                        v8 = mp.zero
                        for xn, wn in n16:
                            s = mid + half * xn
                            bv = eval_b(spec, s)
                            v16 += wn * mp.exp(-s / x) * bv * (1 + eta_v * bv)
                        for xn, wn in n8:
                            s = mid + half * xn
                            bv = eval_b(spec, s)
                            v8 += wn * mp.exp(-s / x) * bv * (1 + eta_v * bv)
                        v16 *= half
                        v8 *= half
                        extra += v16
                        extra_err += abs(v16 - v8)
                        evals += 24
                        break
            shift = mp.exp(t / x)
            value = shift * (res.value + extra)
            err = shift * (res.err_est + extra_err)
            canc = max(mp.one, shift * (res.cancellation_index * abs(res.value) + abs(extra))
                       / abs(value)) if value != 0 else mp.inf
            return QuadResult(value=value, err_est=err, cancellation_index=canc,
                              evaluations=res.evaluations + evals)


def _polyval(coeffs, u):
    acc = mp.zero
    for c in reversed(coeffs):
        acc = acc * u + c
    return acc


def get_grid(spec: BumpSpec, bits: int, s_min: float, step_pi: float = 0.5) -> BumpGrid:
    """Process-wide grid cache; building a grid is expensive, reuse is free."""
    key = (spec, bits, round(float(s_min), 6), step_pi)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = BumpGrid(spec, bits, s_min, step_pi)
    return _GRID_CACHE[key]
