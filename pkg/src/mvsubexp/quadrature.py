"""Half-line integration for integrands with algebraic (power-law) tails."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate


@dataclass
class TailIntegral:
    value: float  # total, tail included
    body: float
    tail: float  # extrapolated contribution beyond ``cutoff``
    cutoff: float
    error: float
    tail_exponent: float | None


def integrate_halfline(f, a: float = 0.0, scale: float = 1.0, breakpoints=(), rtol: float = 1e-10,
                       decay: float | None = None, span: float = 1e9) -> TailIntegral:
    """Integrate ``f`` over ``[a, inf)``.

    The body is integrated on geometrically growing panels ``a + scale (2^k - 1)``
    (plus any ``breakpoints``) up to ``a + span * scale``, or until the integrand
    underflows.  The remainder is extrapolated assuming ``f(v) ~ C v^-decay``;
    when ``decay`` is None it is fitted from the last two panel edges.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    edges = [a]
    k = 0
    while edges[-1] < a + span * scale:
        k += 1
        edges.append(a + scale * (2.0**k - 1.0))
    edges = sorted(set(edges) | {float(b) for b in breakpoints if a < b < edges[-1]})

    body = 0.0
    err = 0.0
    peak = 0.0
    last = len(edges) - 1
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        val, e = integrate.quad(f, lo, hi, epsrel=rtol, epsabs=0.0, limit=200)
        body += val
        err += e
        flo = abs(f(lo))
        peak = max(peak, flo)
        fhi = abs(f(hi))
        if fhi == 0.0 or (fhi * (hi - a) < 1e-16 * abs(body) and fhi < 1e-12 * peak):
            last = i + 1
            break
    cutoff = edges[last]
    f_end = f(cutoff)
    if f_end == 0.0:
        return TailIntegral(body, body, 0.0, cutoff, err, None)
    mid = a + (cutoff - a) / 2.0
    f_mid = f(mid)
    if decay is None:
        if f_mid <= 0 or f_end <= 0:
            decay = math.inf
        else:
            decay = math.log(f_mid / f_end) / math.log((cutoff - a) / (mid - a))
    if decay <= 1.0:
        raise ValueError(f"integrand decays like v^-{decay:.3g}; the half-line integral diverges")
    tail = 0.0 if math.isinf(decay) else f_end * (cutoff - a) / (decay - 1.0)
    # extrapolation error: a shift of order ``scale`` in the power law
    err += abs(tail) * decay * scale / max(cutoff - a, scale)
    return TailIntegral(body + tail, body, tail, cutoff, err, decay)
