"""Exact 2D geometric predicates for double-precision inputs.

Each predicate first evaluates a floating-point formula with a forward
error bound; when the result is too close to zero to trust, it reevaluates
in exact integer arithmetic (a double is a dyadic rational, so scaling all
inputs by their common power-of-two denominator gives exact integers whose
determinant sign equals the real one: the determinants are homogeneous of
even degree).

Degenerate configurations (four points exactly on one circle, three points
exactly on one line inside the incircle cascade) are resolved by a
simulated perturbation: point p is lifted by an extra height eps^(rank_p+1)
on the paraboloid, for an infinitesimal eps and a caller-supplied total
rank order on points.  Lower rank means a larger perturbation, so the
lowest-ranked point with a nonzero perturbation coefficient decides the
sign.  The scheme is consistent: every evaluation with the same ranks
answers as if the points were in general position.
"""

from __future__ import annotations

import math

# Forward error coefficients for the float filters (standard bounds for
# the 2x2 difference-of-products and the 3x3 lifted determinant).
_EPS = math.ldexp(1.0, -53)
_O2D_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _sign(x) -> int:
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


def _scaled_ints(coords):
    """Map floats to integers by their least common power-of-two denominator."""
    ratios = [float(c).as_integer_ratio() for c in coords]
    common = max(den for _, den in ratios)
    return [num * (common // den) for num, den in ratios]


def _orient2d_int(ax, ay, bx, by, cx, cy) -> int:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def orient2d(a, b, c) -> int:
    """Sign of the signed area of triangle (a, b, c): +1 counterclockwise,
    -1 clockwise, 0 collinear.  Exact for double inputs."""
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    if detleft > 0.0:
        if detright <= 0.0:
            return _sign(det)
        detsum = detleft + detright
    elif detleft < 0.0:
        if detright >= 0.0:
            return _sign(det)
        detsum = -detleft - detright
    else:
        return _sign(det)
    if abs(det) >= _O2D_BOUND * detsum:
        return _sign(det)
    ax, ay, bx, by, cx, cy = _scaled_ints([a[0], a[1], b[0], b[1], c[0], c[1]])
    return _sign(_orient2d_int(ax, ay, bx, by, cx, cy))


def _incircle_int(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    return (alift * (bdx * cdy - cdx * bdy)
            - blift * (adx * cdy - cdx * ady)
            + clift * (adx * bdy - bdx * ady))


def incircle(a, b, c, d) -> int:
    """Sign of the incircle determinant: +1 iff d lies strictly inside the
    circle through a, b, c taken counterclockwise (-1 outside, 0 on the
    circle).  Exact for double inputs."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = (alift * (bdxcdy - cdxbdy)
           + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    if abs(det) >= _ICC_BOUND * permanent:
        return _sign(det)
    ints = _scaled_ints([a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]])
    return _sign(_incircle_int(*ints))


def incircle_perturbed(a, b, c, d, ranks) -> int:
    """incircle(a, b, c, d) with symbolic tie-breaking; never returns 0 for
    four points that are not all identical in position and rank.

    ranks gives the perturbation order of the four points; periodic copies
    of the same source point must share a rank so every copy of a
    configuration resolves the same way.  When the plain determinant
    vanishes, the perturbation expands it as sum_p eps^(rank_p+1) * C_p
    with C_p the paraboloid-lift cofactor of point p; coefficients of equal
    rank merge, and the smallest rank with a nonzero merged coefficient
    wins.  Returns 0 only if every coefficient vanishes (all four points
    collinear and rank-paired), which callers must treat as unresolvable.
    """
    s = incircle(a, b, c, d)
    if s:
        return s
    ints = _scaled_ints([a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]])
    ax, ay, bx, by, cx, cy, dx, dy = ints
    cofactors = (
        _orient2d_int(bx, by, cx, cy, dx, dy),
        -_orient2d_int(ax, ay, cx, cy, dx, dy),
        _orient2d_int(ax, ay, bx, by, dx, dy),
        -_orient2d_int(ax, ay, bx, by, cx, cy),
    )
    merged: dict[int, int] = {}
    for rank, coeff in zip(ranks, cofactors):
        merged[rank] = merged.get(rank, 0) + coeff
    for rank in sorted(merged):
        if merged[rank]:
            return _sign(merged[rank])
    return 0


def circumcenter(a, b, c):
    """Circumcenter of a nondegenerate triangle (floating point)."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    bax, bay = bx - ax, by - ay
    cax, cay = cx - ax, cy - ay
    d = 2.0 * (bax * cay - bay * cax)
    if d == 0.0:
        raise ZeroDivisionError("collinear points have no circumcenter")
    b2 = bax * bax + bay * bay
    c2 = cax * cax + cay * cay
    ux = ax + (cay * b2 - bay * c2) / d
    uy = ay + (bax * c2 - cax * b2) / d
    return ux, uy
