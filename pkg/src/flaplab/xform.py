"""Scalar transforms of the bump and their decay certificates.

For the bump b and ramp w this module evaluates, at arbitrary precision,

    B(x)  = integral_0^1 e^(-s/x) b(s)   ds      (two independent routes)
    Mq(x) = integral_0^1 e^(-s/x) b(s)^2 ds      (positive integrand)
    W(x)  = integral_0^1 e^(-s/x) w(s)   ds
    eta0(x) = -B(x)/Mq(x)          or   -(B(x)+W(x))/Mq(x)

plus x-derivatives up to order 3, least-squares decay fits of the form
log|g(x)| ~ -c x^(-alpha), and pointwise flatness certificates
|eta0(x)| <= x^N.

The two B routes are the real-axis oscillatory quadrature (panel grid from
oscgrid) and the rotated-sector contour: with u = 1/s the plateau piece of B
is Im of the integral of F_x(z) = z^(-2) exp(-z^2 - 1/(xz) + i z^4) from
R = 1/flat_end to infinity, which the sector path converts into a ray of
non-oscillatory Gaussian-type decay plus a short inner arc. On the ray the
integrand magnitude is monotone-dominated, so the contour route is
cancellation-free, which is what makes B computable at x where the real-axis
route loses dozens of digits.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from mpmath import mp

from . import smoothfn
from .errors import DegenerateDenominator, NonPositiveSample
from .mpquad import ContourSpec, QuadResult, contour_integral, integrate
from .oscgrid import get_grid
from .smoothfn import BumpSpec, eval_w
from ._fmt import fmt_mp

DEFAULT_BITS = 512

# panel-grid depth buckets: the shallow grid covers every x >= 1e-3 to
# relative accuracy far beyond the embedded-pair estimates; the deep bucket
# serves the small-x certificates down to 3e-4
_SHALLOW_SMIN, _SHALLOW_XMIN = 0.072, 1e-3
_DEEP_SMIN, _DEEP_XMIN = 0.055, 3e-4


def grid_for(spec: BumpSpec, x, bits: int):
    xf = float(x)
    if xf >= _SHALLOW_XMIN:
        return get_grid(spec, bits, _SHALLOW_SMIN)
    if xf >= _DEEP_XMIN:
        return get_grid(spec, bits, _DEEP_SMIN)
    raise ValueError(f"x = {xf} below the supported grid range ({_DEEP_XMIN})")


@dataclass
class TransformSample:
    x: object
    B: QuadResult            # contour-route value (primary)
    Mq: QuadResult
    W: QuadResult | None
    eta0: object
    eta0_err: object
    provenance: str          # 'real_axis', 'contour', or 'both'
    B_dir: QuadResult | None = None   # real-axis route, when dual was run


@dataclass
class DecayFit:
    c: object
    alpha: object
    rms_residual: object
    x_range: tuple

    def envelope_log(self, x):
        """log of the fitted envelope exp(-c x^-alpha) at x."""
        return -self.c * mp.mpf(x) ** (-self.alpha)


# ---------------------------------------------------------------------------
# B, Mq, W
# ---------------------------------------------------------------------------

def B_direct(spec: BumpSpec, x, tol=mp.mpf("1e-10"), bits: int = DEFAULT_BITS) -> QuadResult:
    """Real-axis route: oscillation-aware panels over the full support.

    tol is relative to the integrand mass (the cancellation_index of the
    result says how much of that mass survives the signed sum).
    """
    return grid_for(spec, x, bits).transform(x, kind="b", tol_rel=tol)


def B0_direct(spec: BumpSpec, x, tol=mp.mpf("1e-10"), bits: int = DEFAULT_BITS) -> QuadResult:
    """Plateau piece only (s up to flat_end), real axis."""
    return grid_for(spec, x, bits).transform(x, kind="b", tol_rel=tol,
                                             s_to=spec.flat_end)


def B1_direct(spec: BumpSpec, x, tol=mp.mpf("1e-10"), bits: int = DEFAULT_BITS) -> QuadResult:
    """Transition piece (flat_end to supp_end), real axis; short and cheap."""
    return grid_for(spec, x, bits).transform(x, kind="b", tol_rel=tol,
                                             s_from=spec.flat_end)


def _ray_F(x, twist: int = 1):
    """F_x(z) = z^-2 exp(-twist z^2 - 1/(xz) + i twist z^4); twist=2 serves Mq."""
    x = mp.mpf(x)
    tw = mp.mpf(twist)

    def F(z):
        return z**-2 * mp.exp(-tw * z * z - 1 / (x * z) + 1j * tw * z**4)

    return F


def contour_spec_for(spec: BumpSpec) -> ContourSpec:
    return ContourSpec(inner_radius=1.0 / spec.flat_end)


def B_contour_parts(spec: BumpSpec, x, tol=mp.mpf("1e-40"), bits: int = DEFAULT_BITS):
    """Ray, arc and transition QuadResults for the contour route of B.

    tol here is absolute on the plateau piece; the default is far below every
    scale the certificates compare against (values carry their own err_est).
    """
    with mp.workprec(bits):
        cspec = contour_spec_for(spec)
        scale = mp.exp(-cspec.sigma / (cspec.inner_radius * mp.mpf(x))
                       - mp.mpf(spec.flat_end) ** -2)
        i_part, j_part = contour_integral(
            _ray_F(x, 1), cspec, max(mp.mpf(tol), scale * mp.mpf("1e-35")), bits)
        b1 = B1_direct(spec, x, bits=bits)
        return i_part, j_part, b1


def B_contour(spec: BumpSpec, x, tol=mp.mpf("1e-40"), bits: int = DEFAULT_BITS) -> QuadResult:
    """Contour route: Im(ray + inner arc) for the plateau plus the real-axis
    transition piece."""
    with mp.workprec(bits):
        i_part, j_part, b1 = B_contour_parts(spec, x, tol, bits)
        value = mp.im(i_part.value + j_part.value) + b1.value
        err = i_part.err_est + j_part.err_est + b1.err_est
        absmass = abs(mp.im(i_part.value)) + abs(mp.im(j_part.value)) + abs(b1.value)
        canc = max(mp.one, absmass / abs(value)) if value != 0 else mp.inf
        return QuadResult(value=value, err_est=err, cancellation_index=canc,
                          evaluations=i_part.evaluations + j_part.evaluations
                          + b1.evaluations)


def Mq_of(spec: BumpSpec, x, tol=mp.mpf("1e-10"), bits: int = DEFAULT_BITS) -> QuadResult:
    """Direct nonnegative-integrand quadrature of e^(-s/x) b^2."""
    res = grid_for(spec, x, bits).transform(x, kind="b2", tol_rel=tol)
    assert res.value > 0, "Mq must be positive (b^2 not a.e. zero)"
    return res


_COS2_CACHE: dict = {}


def _cos2_transition(spec: BumpSpec, x, bits: int) -> QuadResult:
    """Transition piece of integral e^(-s/x) chi^2 e^(-2/s^2) cos(2 s^-4) ds,
    on cached panels that split the doubled phase per quarter period."""
    from ._nodes import gauss_legendre
    from .oscgrid import phase_breaks

    key = (spec, bits)
    if key not in _COS2_CACHE:
        with mp.workprec(bits + 16):
            edges = phase_breaks(mp.mpf(spec.flat_end), mp.mpf(spec.supp_end), 0.25)
            n16 = gauss_legendre(16, bits + 16)
            n8 = gauss_legendre(8, bits + 16)
            panels = []
            for i in range(len(edges) - 1):
                a, b = edges[i], edges[i + 1]
                mid, half = (a + b) / 2, (b - a) / 2

                def val(s):
                    c = smoothfn.eval_chi(spec, s)
                    return c * c * mp.exp(-2 / s**2) * mp.cos(2 * s**-4)

                rows16 = [(mid + half * xn, wn * half * val(mid + half * xn))
                          for xn, wn in n16]
                rows8 = [(mid + half * xn, wn * half * val(mid + half * xn))
                         for xn, wn in n8]
                panels.append((rows16, rows8))
            _COS2_CACHE[key] = panels
    panels = _COS2_CACHE[key]
    with mp.workprec(bits):
        x = mp.mpf(x)
        value = mp.zero
        abs_sum = mp.zero
        err = mp.zero
        for rows16, rows8 in panels:
            v16 = mp.fsum(w * mp.exp(-s / x) for s, w in rows16)
            v8 = mp.fsum(w * mp.exp(-s / x) for s, w in rows8)
            value += v16
            abs_sum += abs(v16)
            err += abs(v16 - v8)
        err += abs_sum * mp.mpf(2) ** (3 - bits)
        canc = max(mp.one, abs_sum / abs(value)) if value != 0 else mp.one
        return QuadResult(value, err, canc, 24 * len(panels))


def Mq_fast(spec: BumpSpec, x, bits: int = DEFAULT_BITS,
            tol_rel=mp.mpf("1e-16")) -> QuadResult:
    """Fast evaluator for Mq: half of (smooth part minus cos part).

    b^2 = chi^2 e^(-2/s^2) sin^2(s^-4) and sin^2 = (1 - cos(2 s^-4))/2; the
    smooth half is a short adaptive integral, the cos half goes through the
    rotated contour на the plateau and short cached panels on the transition.
    Used where many Mq values are needed (table building); validated against
    Mq_of in the test suite, never a replacement for it in certificates.
    """
    with mp.workprec(bits):
        x = mp.mpf(x)

        def smooth_integrand(s):
            if s <= smoothfn.B_ZERO_CUT:
                return mp.zero
            c = smoothfn.eval_chi(spec, s)
            if c == 0:
                return mp.zero
            return c * c * mp.exp(-s / x - 2 / s**2)

        # peak of the smooth envelope, used to seed panel edges and set the
        # absolute tolerance relative to the value scale
        s_peak = min(float((4 * x) ** (mp.mpf(1) / 3)), spec.supp_end * 0.999)
        peak_log = -(s_peak / float(x) + 2 / s_peak**2)
        brk = sorted({spec.flat_end, s_peak, s_peak / 2, s_peak / 4,
                      (s_peak + spec.supp_end) / 2})
        tol_abs = mp.exp(mp.mpf(peak_log)) * mp.mpf(tol_rel) / 8
        smooth = integrate(smooth_integrand, mp.mpf("0.01"), mp.mpf(spec.supp_end),
                           tol=tol_abs, bits=bits, breakpoints=brk,
                           max_panels=4096)
        # tail below 0.01: envelope at most e^{-2/s^2}
        smooth_tail = mp.mpf("0.01") * mp.exp(-mp.mpf(2) / mp.mpf("0.01") ** 2)

        cspec = contour_spec_for(spec)
        R = mp.mpf(cspec.inner_radius)
        arc_n = min(int(float(cspec.angle) / (math.pi / (16 * float(R) ** 4))) + 1, 4096)
        arc_breaks = [cspec.angle * mp.mpf(k) / arc_n for k in range(1, arc_n)]
        i2, j2 = contour_integral(_ray_F(x, 2), cspec, tol_abs, bits,
                                  arc_breakpoints=arc_breaks)
        cos_plateau = mp.re(i2.value + j2.value)
        cos_trans = _cos2_transition(spec, x, bits)

        value = (smooth.value - cos_plateau - cos_trans.value) / 2
        err = (smooth.err_est + smooth_tail + i2.err_est + j2.err_est
               + cos_trans.err_est) / 2
        canc = max(mp.one, (abs(smooth.value) + abs(cos_plateau)
                            + abs(cos_trans.value)) / (2 * abs(value))) if value != 0 else mp.inf
        return QuadResult(value, err, canc,
                          smooth.evaluations + i2.evaluations + j2.evaluations
                          + cos_trans.evaluations)


def W_of(x, tol=mp.mpf("1e-30"), bits: int = DEFAULT_BITS,
         spec: BumpSpec = smoothfn.DEFAULT_SPEC) -> QuadResult:
    """Laplace transform of the ramp w; integrand supported in [1/2, 1]."""
    with mp.workprec(bits):
        x = mp.mpf(x)

        def f(s):
            return mp.exp(-s / x) * eval_w(s, spec=spec)

        half = mp.mpf(1) / 2
        brk = [half + (1 - half) * mp.mpf(k) / 16 for k in range(1, 16)]
        scale = mp.exp(-half / x)
        return integrate(f, half, mp.one, tol=mp.mpf(tol) * scale + mp.mpf(tol),
                         bits=bits, breakpoints=brk)


# ---------------------------------------------------------------------------
# eta0 and derivatives
# ---------------------------------------------------------------------------

def eta0_full(spec: BumpSpec, x, variant: str = "pure", tol=mp.mpf("1e-10"),
              bits: int = DEFAULT_BITS, mq=None):
    """(eta0, err, parts): eta0 = -B/Mq or -(B+W)/Mq, B from the contour path."""
    if variant not in ("pure", "with_w"):
        raise ValueError("variant must be 'pure' or 'with_w'")
    with mp.workprec(bits):
        B = B_contour(spec, x, bits=bits)
        num = B.value
        num_err = B.err_est
        W = None
        if variant == "with_w":
            W = W_of(x, bits=bits, spec=spec)
            num += W.value
            num_err += W.err_est
        Mq = mq if mq is not None else Mq_of(spec, x, tol=tol, bits=bits)
        if Mq.err_est >= abs(Mq.value):
            raise DegenerateDenominator(f"Mq at x={x} not resolved: "
                                        f"err {mp.nstr(Mq.err_est, 5)} vs value "
                                        f"{mp.nstr(Mq.value, 5)}")
        if Mq.err_est > mp.mpf("1e-3") * abs(Mq.value):
            raise DegenerateDenominator(f"Mq relative error above 1e-3 at x={x}")
        val = -num / Mq.value
        err = num_err / abs(Mq.value) + abs(num) * Mq.err_est / Mq.value**2
        return val, err, {"B": B, "W": W, "Mq": Mq}


def eta0(spec: BumpSpec, x, variant: str = "pure", tol=mp.mpf("1e-10"),
         bits: int = DEFAULT_BITS):
    return eta0_full(spec, x, variant, tol, bits)[0]


_PK_CACHE = {0: [mp.mpf(1)]}


def pk_coefficients(k: int):
    """P_k in d^k/dx^k integral e^(-s/x) g(s) ds = x^-k integral P_k(s/x) e^(-s/x) g.

    Recurrence P_{k+1}(u) = (u - k) P_k(u) - u P_k'(u), P_0 = 1.
    """
    if k in _PK_CACHE:
        return _PK_CACHE[k]
    p = pk_coefficients(k - 1)
    km1 = k - 1
    out = [mp.zero] * (len(p) + 1)
    for i, c in enumerate(p):
        out[i + 1] += c          # u * P_k
        out[i] -= km1 * c        # -(k-1) * P_k
        if i >= 1:
            out[i] -= i * c      # -u * P_k' term, degree preserved
    _PK_CACHE[k] = out
    return out


def dk_transform(spec: BumpSpec, which: str, k: int, x, tol=mp.mpf("1e-10"),
                 bits: int = DEFAULT_BITS) -> QuadResult:
    """k-th x-derivative of B, Mq or W by differentiating under the integral."""
    if k < 0 or k > 3:
        raise ValueError("derivative order capped at k <= 3")
    with mp.workprec(bits):
        x = mp.mpf(x)
        pk = pk_coefficients(k)
        if which in ("B", "Mq"):
            kind = "b" if which == "B" else "b2"
            res = grid_for(spec, x, bits).transform(
                x, kind=kind, tol_rel=tol, pk=None if k == 0 else pk)
        elif which == "W":
            def f(s):
                u = s / x
                acc = mp.zero
                for c in reversed(pk):
                    acc = acc * u + c
                return mp.exp(-u) * acc * eval_w(s, spec=spec)

            half = mp.mpf(1) / 2
            brk = [half + (1 - half) * mp.mpf(j) / 16 for j in range(1, 16)]
            scale = mp.exp(-half / x)
            res = integrate(f, half, mp.one, tol=mp.mpf(tol) * scale, bits=bits,
                            breakpoints=brk)
        else:
            raise ValueError("which must be 'B', 'Mq' or 'W'")
        fac = x ** (-k)
        return QuadResult(value=res.value * fac, err_est=res.err_est * fac,
                          cancellation_index=res.cancellation_index,
                          evaluations=res.evaluations)


# ---------------------------------------------------------------------------
# decay fits and flatness certificates
# ---------------------------------------------------------------------------

def decay_fit(samples, model_alpha_hint=None) -> DecayFit:
    """Least squares of log(-log|g|) against log(1/x) for samples [(x, |g|)].

    Requires at least 6 samples, strictly decreasing x, all |g| in (0, 1).
    """
    if len(samples) < 6:
        raise ValueError("need at least 6 samples")
    xs = [mp.mpf(x) for x, _ in samples]
    if any(xs[i + 1] >= xs[i] for i in range(len(xs) - 1)):
        raise ValueError("x must be strictly decreasing")
    gs = []
    for x, g in samples:
        g = abs(mp.mpf(g))
        if g <= 0:
            raise NonPositiveSample(f"|g(x={x})| <= 0")
        if g >= 1:
            raise ValueError(f"|g(x={x})| >= 1 is outside the decay model")
        gs.append(g)
    lx = [mp.log(1 / x) for x in xs]
    ly = [mp.log(-mp.log(g)) for g in gs]
    n = mp.mpf(len(lx))
    sx, sy = mp.fsum(lx), mp.fsum(ly)
    sxx = mp.fsum(a * a for a in lx)
    sxy = mp.fsum(a * b for a, b in zip(lx, ly))
    alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    inter = (sy - alpha * sx) / n
    c = mp.exp(inter)
    rms = mp.sqrt(mp.fsum((y - (inter + alpha * a)) ** 2 for a, y in zip(lx, ly)) / n)
    return DecayFit(c=c, alpha=alpha, rms_residual=rms,
                    x_range=(float(min(xs)), float(max(xs))))


@dataclass
class FlatnessReport:
    N: int
    variant: str
    rows: list          # (x, |eta0|, err, bound x^N, log10 margin)
    deriv_rows: list    # (x, |d1|, |d2|, bound x^(N-4), ok)
    ok: bool


def flatness_certificate(spec: BumpSpec, variant: str, N: int, x_grid,
                         bits: int = DEFAULT_BITS, raise_on_fail: bool = True) -> FlatnessReport:
    """Certify |eta0(x)| <= x^N on the grid, plus central-difference bounds
    |eta0'| and |eta0''| <= x^(N-4) on interior grid points."""
    if N > 20:
        raise ValueError("N capped at 20")
    xs = sorted((mp.mpf(x) for x in x_grid), reverse=True)
    with mp.workprec(bits):
        vals = []
        for x in xs:
            v, e, _ = eta0_full(spec, x, variant, bits=bits)
            vals.append((x, v, e))
        rows = []
        ok = True
        for x, v, e in vals:
            bound = x**N
            lhs = abs(v) + e
            margin = mp.log10(bound) - mp.log10(lhs) if lhs > 0 else mp.inf
            good = lhs <= bound
            ok = ok and good
            rows.append((x, abs(v), e, bound, margin))
        deriv_rows = []
        for i in range(1, len(vals) - 1):
            x0, v0, _ = vals[i - 1]
            x1, v1, _ = vals[i]
            x2, v2, _ = vals[i + 1]
            h1, h2 = x0 - x1, x1 - x2
            d1 = (v0 - v2) / (h1 + h2)
            d2 = 2 * (h2 * v0 - (h1 + h2) * v1 + h1 * v2) / (h1 * h2 * (h1 + h2))
            bound = x1 ** (N - 4)
            good = abs(d1) <= bound and abs(d2) <= bound
            ok = ok and good
            deriv_rows.append((x1, abs(d1), abs(d2), bound, good))
        report = FlatnessReport(N=N, variant=variant, rows=rows,
                                deriv_rows=deriv_rows, ok=ok)
        if not ok and raise_on_fail:
            bad = [mp.nstr(r[0], 6) for r in rows if r[1] + r[2] > r[3]]
            bad += [mp.nstr(r[0], 6) for r in deriv_rows if not r[4]]
            from .errors import CertificateFailed
            raise CertificateFailed(f"flatness N={N} violated at x in {bad}")
        return report


# ---------------------------------------------------------------------------
# sample tables, x_max_valid, emission
# ---------------------------------------------------------------------------

def sample_table(spec: BumpSpec, x_grid, variant: str = "pure",
                 bits: int = DEFAULT_BITS, dual: bool = True):
    """TransformSample rows over the grid; dual=True also runs the real-axis B
    and records agreement provenance."""
    out = []
    with mp.workprec(bits):
        for x in sorted((mp.mpf(x) for x in x_grid), reverse=True):
            Bc = B_contour(spec, x, bits=bits)
            Mq = Mq_of(spec, x, bits=bits)
            W = W_of(x, bits=bits, spec=spec) if variant == "with_w" else None
            num = Bc.value + (W.value if W else mp.zero)
            num_err = Bc.err_est + (W.err_est if W else mp.zero)
            eta = -num / Mq.value
            eta_err = num_err / abs(Mq.value) + abs(num) * Mq.err_est / Mq.value**2
            prov = "contour"
            Bd = None
            if dual:
                Bd = B_direct(spec, x, bits=bits)
                if abs(Bd.value - Bc.value) <= Bd.err_est + Bc.err_est:
                    prov = "both"
            out.append(TransformSample(x=x, B=Bc, Mq=Mq, W=W, eta0=eta,
                                       eta0_err=eta_err, provenance=prov,
                                       B_dir=Bd))
    return out


def x_max_valid(samples, b_fit: DecayFit, m_fit: DecayFit):
    """Largest sampled x with dual-route agreement and both decay envelopes."""
    best = None
    for s in samples:
        if s.provenance != "both":
            continue
        if mp.log(abs(s.B.value)) > b_fit.envelope_log(s.x):
            continue
        if mp.log(s.Mq.value) < m_fit.envelope_log(s.x):
            continue
        if best is None or s.x > best:
            best = s.x
    return best


def emit_samples_csv(samples, path):
    """Sample table as RFC-4180 CSV with explicit-exponent scientific values."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "B", "errB", "Mq", "errMq", "W", "eta0",
                     "cancellation_index"])
        for s in samples:
            canc = s.B_dir.cancellation_index if s.B_dir else s.B.cancellation_index
            wr.writerow([
                fmt_mp(s.x), fmt_mp(s.B.value), fmt_mp(s.B.err_est),
                fmt_mp(s.Mq.value), fmt_mp(s.Mq.err_est),
                fmt_mp(s.W.value) if s.W else "",
                fmt_mp(s.eta0), fmt_mp(canc),
            ])


def emit_fit_json(fits: dict, path):
    doc = {
        name: {
            "c": fmt_mp(f.c),
            "alpha": fmt_mp(f.alpha),
            "rms_residual": fmt_mp(f.rms_residual),
            "x_range": list(f.x_range),
        }
        for name, f in fits.items()
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
