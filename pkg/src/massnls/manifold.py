"""Critical points of the dilation fiber and the Pohozaev-manifold energy.

For a profile u with norms (a, d, b) = (||grad u||^2, ||u||_q^q,
||u||_{2*}^{2*}), the energy along the mass-preserving dilation fiber has
derivative g(t) = a t - mu gamma_q d t^{q gamma_q - 1} - b t^{2* - 1}; roots
of g are exactly the dilations placing u on the constraint manifold
{P = 0}.  For q >= 2+4/N the root is unique when it exists and is a strict
maximum of the fiber energy; for q < 2+4/N there are zero, one (degenerate)
or two roots, a local minimum followed by a local maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import HypothesisError, NoCriticalPointError, NumericalError
from .functionals import (
    coerce_bundle,
    fiber_derivative,
    fiber_energy,
    fiber_second_derivative,
)

__all__ = [
    "FiberCriticalPoint",
    "fiber_critical_points",
    "manifold_energy",
    "manifold_projection",
]

# Root search window and scan resolution.  The bracket covers every scale the
# rest of the package produces; running off either end raises rather than
# silently truncating.
T_LO = 1e-6
T_HI = 1e6
N_SCAN = 600


@dataclass(frozen=True)
class FiberCriticalPoint:
    """A root of the fiber derivative g.

    second_derivative_sign is 'plus' (local minimum of the fiber energy),
    'minus' (local maximum) or 'zero' (degenerate within tolerance).
    value is the fiber energy at t.
    """

    t: float
    second_derivative_sign: str
    value: float


def _derivative_scale(nb, p, t):
    """Magnitude scale of g(t): the sum of the absolute sizes of its terms."""
    qg = p.q * p.gamma_q
    return (
        nb.grad_sq * t
        + p.mu * p.gamma_q * nb.lq * t ** (qg - 1.0)
        + nb.lcrit * t ** (p.two_star - 1.0)
    )


def _second_scale(nb, p, t):
    qg = p.q * p.gamma_q
    return (
        nb.grad_sq
        + p.mu * p.gamma_q * abs(qg - 1.0) * nb.lq * t ** (qg - 2.0)
        + (p.two_star - 1.0) * nb.lcrit * t ** (p.two_star - 2.0)
    )


def _classify(nb, p, t):
    g2 = fiber_second_derivative(nb, p, t)
    scale = _second_scale(nb, p, t)
    if abs(g2) <= 1e-8 * scale:
        return "zero"
    return "plus" if g2 > 0.0 else "minus"


def fiber_critical_points(u, p, t_lo=T_LO, t_hi=T_HI, n_scan=N_SCAN):
    """All positive roots of the fiber derivative, in increasing t.

    Accepts a RadialFunction, a NormBundle or a (grad_sq, lq, lcrit) triple.
    Roots are located by sign bracketing on a log-spaced grid followed by
    Brent refinement.  For q >= 2+4/N a unique 'minus' root is expected; its
    absence raises NoCriticalPointError.  For q < 2+4/N the list may be
    empty, contain one degenerate point, or a 'plus' then a 'minus' point.
    """
    nb = coerce_bundle(u, p)
    if nb.lcrit == 0.0 and (p.mu == 0.0 or nb.lq == 0.0):
        raise NoCriticalPointError(
            "fiber derivative is linear without reaction terms; no root"
        )

    ts = np.geomspace(t_lo, t_hi, n_scan)
    gs = fiber_derivative(nb, p, ts)
    roots = []
    for i in range(len(ts) - 1):
        lo, hi = gs[i], gs[i + 1]
        if lo == 0.0:
            # grid point is an exact root; brentq needs a strict sign change
            roots.append(float(ts[i]))
            continue
        if lo * hi < 0.0:
            r = brentq(
                lambda t: fiber_derivative(nb, p, t),
                ts[i],
                ts[i + 1],
                xtol=1e-300,
                rtol=4.0 * np.finfo(float).eps,
            )
            roots.append(float(r))
    if gs[-1] == 0.0:
        roots.append(float(ts[-1]))

    # collapse near-duplicates from tangencies straddling a grid node
    merged = []
    for r in sorted(roots):
        if merged and abs(r - merged[-1]) <= 1e-9 * merged[-1]:
            continue
        merged.append(r)

    points = [
        FiberCriticalPoint(r, _classify(nb, p, r), float(fiber_energy(nb, p, r)))
        for r in merged
    ]

    if p.q >= p.q_bar - 1e-12:
        if not points:
            raise NoCriticalPointError(
                "no fiber critical point in the search window; "
                "for q >= 2+4/N this means the quadratic coefficient is "
                "dominated (e.g. mu beyond the smallness threshold)"
            )
        if len(points) > 1:
            raise NumericalError(
                f"expected a unique fiber critical point for q >= 2+4/N, "
                f"found {len(points)} at t = {[pt.t for pt in points]}"
            )
    return points


def manifold_projection(u, p):
    """The unique maximal fiber critical point for q >= 2+4/N."""
    if p.q < p.q_bar - 1e-12:
        raise HypothesisError(
            "the fiber maximum is only the manifold projection for q >= 2+4/N"
        )
    pts = fiber_critical_points(u, p)
    pt = pts[0]
    if pt.second_derivative_sign == "plus":
        raise NumericalError(
            f"fiber critical point at t = {pt.t} is a minimum; "
            "inconsistent with q >= 2+4/N"
        )
    return pt


def manifold_energy(u, p):
    """max over t > 0 of the fiber energy: the level of u seen from the
    constraint manifold.  Only meaningful for q >= 2+4/N, where the fiber
    has a single interior maximum."""
    return manifold_projection(u, p).value
