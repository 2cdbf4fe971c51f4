"""Polynomial families P(x; eps), the fractional-power branch of their
biggest real root, the shifted quotient Q, and the hypothesis verdicts.

Branch extraction runs the classical Newton-polygon iteration on the
support of P viewed as a polynomial in (x, e), e >= 0.  For each
admissible edge the characteristic polynomial is solved over the reals;
simple roots are lifted by undetermined coefficients, multiple roots
recurse on the substituted polynomial.  Rational characteristic roots are
kept exact, so the common families produce branches with exact rational
coefficients.  A numeric tracker (companion-matrix roots on a log grid)
validates every accepted branch.

The quotient Q(s, e) := P(s + sigma(e); +-e^rho) / s is the object the
later hypothesis checks and the coefficient recursion consume:

* h0: Q(0, e) > 0 near e = 0 (the tracked root stays a simple node),
* h1: the Newton diagram of Q has a single compact side,
* h2: the principal quasi-homogeneous part is positive on the closed
  first quadrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BranchAmbiguous,
    DegenerateQ,
    Inconclusive,
    NoRealRoot,
    NotDivisible,
)
from .series import BivariatePoly, TruncatedSeries, _scalar_from_str, _scalar_to_str

DEFAULT_BRANCH_ORDER = 12
_VALIDATION_GRID = tuple(10.0 ** (-8 + 6 * k / 24) for k in range(25))  # 1e-8 .. 1e-2
_RESIDUAL_RTOL = 1e-9
_MAX_POLYGON_DEPTH = 24


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolynomialFamily:
    """P(x; eps) = sum coeffs[(k, m)] x^k eps^m with P(x; 0) = x^(mu+1)."""

    mu: int
    coeffs: Mapping[tuple, object]

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        clean = {}
        for (k, m), c in dict(self.coeffs).items():
            if c != 0:
                clean[(int(k), int(m))] = c
        object.__setattr__(self, "coeffs", clean)
        deg = max((k for k, _ in clean), default=-1)
        if deg != self.mu + 1:
            raise ValueError(f"degree in x is {deg}, expected mu+1={self.mu + 1}")
        at_zero = {k: c for (k, m), c in clean.items() if m == 0}
        if at_zero != {self.mu + 1: 1}:
            raise ValueError("P(x; 0) must equal x^(mu+1) exactly")

    def eval(self, x, eps):
        acc = 0 * x
        for (k, m), c in self.coeffs.items():
            acc = acc + c * x**k * eps**m
        return acc

    def x_coeffs(self, eps) -> list:
        """Dense coefficients in x (low first) at a fixed eps."""
        out = [0.0] * (self.mu + 2)
        for (k, m), c in self.coeffs.items():
            out[k] += float(c) * float(eps) ** m
        return out

    def to_json(self) -> dict:
        return {
            "mu": self.mu,
            "terms": [
                {"x": k, "eps": m, "c": _scalar_to_str(c)}
                for (k, m), c in sorted(self.coeffs.items())
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PolynomialFamily":
        terms = {
            (int(t["x"]), int(t["eps"])): _scalar_from_str(str(t["c"]))
            for t in data["terms"]
        }
        return cls(mu=int(data["mu"]), coeffs=terms)


@dataclass(frozen=True)
class PuiseuxBranch:
    """Biggest-real-root branch theta_eps = sigma(|eps|^(1/rho)) on one side."""

    rho: int
    sigma: TruncatedSeries
    sign: int  # +1: branch covers eps >= 0, -1: eps <= 0
    exact: bool = False

    def __post_init__(self):
        if self.sigma.coeffs[0] != 0:
            raise ValueError("sigma(0) must vanish: the root tends to zero")
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")

    def e_hat(self, eps) -> float:
        """The branch variable |eps|^(1/rho); eps must lie on the branch side."""
        if eps * self.sign < 0:
            raise ValueError("eps has the wrong sign for this branch")
        a = abs(eps)
        if a == 0:
            return a * 0
        if self.rho == 1 and isinstance(a, (int, Fraction)):
            return a
        return float(a) ** (1.0 / self.rho)

    def theta(self, eps):
        """The tracked root at a parameter value."""
        return self.sigma(self.e_hat(eps))


@dataclass
class Verdict:
    holds: bool
    witness: object = None
    detail: str = ""

    def to_json(self) -> dict:
        w = self.witness
        if isinstance(w, Fraction):
            w = str(w)
        elif isinstance(w, tuple):
            w = list(w)
        return {"holds": self.holds, "witness": w, "detail": self.detail}


@dataclass
class NewtonData:
    """Support data of Q plus the three hypothesis verdicts."""

    Q: BivariatePoly
    mu: int
    nu: int
    chi: object
    diagram: list = field(default_factory=list)
    h0: Verdict | None = None
    h1: Verdict | None = None
    h2: Verdict | None = None

    def to_json(self) -> dict:
        return {
            "mu": self.mu,
            "nu": self.nu,
            "chi": _scalar_to_str(self.chi),
            "support": [list(p) for p in self.Q.support()],
            "diagram": [list(p) for p in self.diagram],
            "h0": self.h0.to_json() if self.h0 else None,
            "h1": self.h1.to_json() if self.h1 else None,
            "h2": self.h2.to_json() if self.h2 else None,
        }


# ---------------------------------------------------------------------------
# exact polynomial helpers (univariate, coefficients low-first)
# ---------------------------------------------------------------------------


def _poly_trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def _poly_deriv(p):
    return [p[k] * k for k in range(1, len(p))] or [0 * p[0]]


def _poly_divmod(a, b):
    a = list(a)
    b = _poly_trim(list(b))
    q = [0 * b[0]] * max(1, len(a) - len(b) + 1)
    lead = b[-1]
    for k in range(len(a) - len(b), -1, -1):
        c = a[k + len(b) - 1] / lead
        q[k] = c
        for i, bc in enumerate(b):
            a[k + i] = a[k + i] - c * bc
    return _poly_trim(q), _poly_trim(a)


def _poly_gcd(a, b):
    a, b = _poly_trim(list(a)), _poly_trim(list(b))
    while not (len(b) == 1 and b[0] == 0):
        _, r = _poly_divmod(a, b)
        a, b = b, r
    if a[-1] != 0:
        a = [c / a[-1] for c in a]  # monic
    return a


def _yun_squarefree(p):
    """Yun's algorithm: p = prod b_i^i with b_i squarefree (exact field)."""
    p = _poly_trim(list(p))
    dp = _poly_deriv(p)
    g = _poly_gcd(p, dp)
    if len(g) == 1:
        return [(1, p)]
    out = []
    c, _ = _poly_divmod(p, g)
    d = [x - y for x, y in _pad_pair(_poly_divmod(dp, g)[0], _poly_deriv(c))]
    d = _poly_trim(d)
    i = 1
    while len(c) > 1:
        b = _poly_gcd(c, d)
        if len(b) > 1:
            out.append((i, b))
        c, _ = _poly_divmod(c, b)
        db, _ = _poly_divmod(d, b)
        d = _poly_trim([x - y for x, y in _pad_pair(db, _poly_deriv(c))])
        i += 1
    return out


def _pad_pair(a, b):
    n = max(len(a), len(b))
    za, zb = 0 * a[0], 0 * b[0]
    return list(zip(list(a) + [za] * (n - len(a)), list(b) + [zb] * (n - len(b))))


def _rational_roots(p):
    """All rational roots of an exact-coefficient polynomial, with multiplicity."""
    p = _poly_trim([Fraction(c) for c in p])
    den = math.lcm(*(c.denominator for c in p))
    ip = [int(c * den) for c in p]
    while ip and ip[0] == 0:
        ip = ip[1:]  # roots at 0 are not wanted here (c != 0 in the polygon)
    if len(ip) <= 1:
        return []
    a0, an = abs(ip[0]), abs(ip[-1])
    cands = set()
    for pnum in _divisors(a0):
        for qden in _divisors(an):
            cands.add(Fraction(pnum, qden))
            cands.add(Fraction(-pnum, qden))
    roots = []
    poly = [Fraction(c) for c in ip]
    for c in sorted(cands):
        mult = 0
        while len(poly) > 1 and _poly_eval(poly, c) == 0:
            poly, _ = _poly_divmod(poly, [-c, Fraction(1)])
            mult += 1
        if mult:
            roots.append((c, mult))
    return roots


def _divisors(n):
    n = abs(n)
    if n == 0:
        return [1]
    out = []
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            out.append(n // d)
        d += 1
    return sorted(set(out))


def _poly_eval(p, x):
    acc = p[-1]
    for c in reversed(p[:-1]):
        acc = acc * x + c
    return acc


def _real_roots_with_multiplicity(phi):
    """Real roots of a univariate polynomial (low-first coefficients).

    Exact rational roots are split off exactly; what remains is handled per
    squarefree factor with companion-matrix roots (those are simple inside
    their factor, so float clustering is safe)."""
    exact = all(isinstance(c, (int, Fraction)) for c in phi)
    roots = []
    if exact:
        phi_f = [Fraction(c) for c in phi]
        for c, mult in _rational_roots(phi_f):
            roots.append((c, mult))
            for _ in range(mult):
                phi_f, _ = _poly_divmod(phi_f, [-c, Fraction(1)])
        if len(phi_f) > 1:
            for mult, factor in _yun_squarefree(phi_f):
                fl = [float(c) for c in factor]
                for r in np.roots(list(reversed(fl))):
                    if abs(r.imag) <= 1e-10 * max(1.0, abs(r)):
                        roots.append((float(r.real), mult))
    else:
        fl = [float(c) for c in _poly_trim(list(phi))]
        if len(fl) <= 1:
            return []
        rs = np.roots(list(reversed(fl)))
        used = [False] * len(rs)
        for i, r in enumerate(rs):
            if used[i] or abs(r.imag) > 1e-8 * max(1.0, abs(r)):
                continue
            cluster = [r]
            used[i] = True
            for k in range(i + 1, len(rs)):
                if not used[k] and abs(rs[k] - r) <= 1e-6 * max(1.0, abs(r)):
                    cluster.append(rs[k])
                    used[k] = True
            val = float(np.mean([c.real for c in cluster]))
            roots.append((val, len(cluster)))
    return [(c, m) for c, m in roots if c != 0]


# ---------------------------------------------------------------------------
# Newton-polygon branch enumeration
# ---------------------------------------------------------------------------


def _support(P: dict):
    return [(k, m) for (k, m), c in P.items() if c != 0]


def _lower_hull_edges(P: dict):
    """Decreasing edges of the lower hull of the support.  Each edge with
    slope -p/q (lowest terms) balances x ~ c e^(p/q); returned as
    (p, q, k1, points-on-edge)."""
    pts = {}
    for k, m in _support(P):
        if k not in pts or m < pts[k]:
            pts[k] = m
    hull = []
    for k in sorted(pts):
        m = pts[k]
        while len(hull) >= 2:
            (k1, m1), (k2, m2) = hull[-2], hull[-1]
            if (k2 - k1) * (m - m1) - (m2 - m1) * (k - k1) <= 0:
                hull.pop()  # middle point above or on the segment
            else:
                break
        hull.append((k, m))
    edges = []
    for (k1, m1), (k2, m2) in zip(hull, hull[1:]):
        if m1 > m2:
            g = math.gcd(m1 - m2, k2 - k1)
            p, q = (m1 - m2) // g, (k2 - k1) // g
            on_edge = [
                (k, m)
                for (k, m) in _support(P)
                if k1 <= k <= k2 and (k - k1) * (m1 - m2) == (m1 - m) * (k2 - k1)
            ]
            edges.append((p, q, k1, sorted(on_edge)))
    return edges


def _substitute_edge(P: dict, c, p: int, q: int):
    """P1(v, z) = P((c + v) z^p, z^q) / z^w, w the minimal weight."""
    out = {}
    w = min(p * k + q * m for k, m in _support(P))
    for (k, m), coeff in P.items():
        zdeg = p * k + q * m - w
        bc = 1
        for j in range(k + 1):  # (c+v)^k = sum C(k,j) c^(k-j) v^j
            if j > 0:
                bc = bc * (k - j + 1) // j
            key = (j, zdeg)
            out[key] = out.get(key, 0) + coeff * bc * c ** (k - j)
    return {key: v for key, v in out.items() if v != 0}


def _hensel_lift(P1: dict, order: int):
    """Solve P1(v(z), z) = 0 with v(0) = 0 for a simple root (the linear
    coefficient of v at the origin is nonzero).  Returns (series coeffs
    v_1..v_order, exact flag)."""
    a10 = P1.get((1, 0), 0)
    if a10 == 0:
        raise ArithmeticError("lift needs a simple characteristic root")
    max_v = max(i for i, _ in P1)
    # A_j(z) as truncated series
    zero = 0 * a10
    A = []
    for j in range(max_v + 1):
        coeffs = [zero] * (order + 1)
        for (i, jz), c in P1.items():
            if i == j and jz <= order:
                coeffs[jz] = coeffs[jz] + c
        A.append(TruncatedSeries(tuple(coeffs)))
    v = [zero] * (order + 1)  # v_0 = 0
    for n in range(1, order + 1):
        vs = TruncatedSeries(tuple(v[: n + 1]))
        acc = A[max_v].truncated(n)
        for j in range(max_v - 1, -1, -1):
            acc = acc * vs + A[j].truncated(n)
        v[n] = -acc[n] / a10
    # exactness: substitute the polynomial v into P1 without truncation
    exact = False
    if all(isinstance(c, (int, Fraction)) for c in v) and all(
        isinstance(c, (int, Fraction)) for c in P1.values()
    ):
        exact = _exact_substitution_vanishes(P1, v)
    return v[1:], exact


def _exact_substitution_vanishes(P1: dict, v: Sequence) -> bool:
    full = {}
    for (i, jz), c in P1.items():
        # v(z)^i as exact polynomial
        poly = [Fraction(1)]
        vp = [Fraction(x) for x in v]
        for _ in range(i):
            poly = _poly_mul(poly, vp)
        for d, pc in enumerate(poly):
            if pc != 0:
                full[d + jz] = full.get(d + jz, Fraction(0)) + c * pc
    return all(val == 0 for val in full.values())


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _branches_of(P: dict, order: int, depth: int):
    """All real fractional-power branches x(e) -> 0 of P(x, e) = 0, e >= 0.

    Returns a list of (rho, coeffs, exact) where x = sum coeffs[i] t^i with
    e = t^rho and coeffs[0] = 0."""
    if depth <= 0:
        raise RecursionError("polygon iteration stalled")
    out = []
    P = {k: v for k, v in P.items() if v != 0}
    if not P:
        return out
    minx = min(k for k, _ in P)
    if minx >= 1:
        out.append((1, tuple([0] * (order + 1)), True))  # x identically 0
        P = {(k - minx, m): v for (k, m), v in P.items()}
    if all(k == 0 for k, _ in P):
        return out
    for p, q, k1, on_edge in _lower_hull_edges(P):
        # characteristic equation: sum over the edge of coeff * c^(k - k1) = 0
        phi = {}
        for k, m in on_edge:
            phi[k - k1] = phi.get(k - k1, 0) + P[(k, m)]
        phi_coeffs = [phi.get(t, 0) for t in range(max(phi) + 1)]
        for c, mult in _real_roots_with_multiplicity(phi_coeffs):
            P1 = _substitute_edge(P, c, p, q)
            if mult == 1:
                # analytic continuation in z; covers the exact v = 0 case too
                v_coeffs, exact = _hensel_lift(P1, max(order - p, 0))
                coeffs = [0] * (order + 1)
                if p <= order:
                    coeffs[p] = c
                else:
                    exact = False  # leading term dropped by the truncation
                for i, vc in enumerate(v_coeffs, start=1):
                    if p + i <= order:
                        coeffs[p + i] = vc
                    elif vc != 0:
                        exact = False
                out.append((q, tuple(coeffs), exact and isinstance(c, (int, Fraction))))
            else:
                for rho_sub, vco, exact in _branches_of(P1, order, depth - 1):
                    coeffs = [0] * (order + 1)
                    if p * rho_sub <= order:
                        coeffs[p * rho_sub] = c
                    else:
                        exact = False
                    for i in range(1, order + 1):
                        if p * rho_sub + i <= order:
                            coeffs[p * rho_sub + i] = coeffs[p * rho_sub + i] + vco[i]
                        elif vco[i] != 0:
                            exact = False
                    out.append(
                        (q * rho_sub, tuple(coeffs), exact and isinstance(c, (int, Fraction)))
                    )
    return out


# ---------------------------------------------------------------------------
# branch selection and validation
# ---------------------------------------------------------------------------


def _signed_support(P: PolynomialFamily, sign: int) -> dict:
    """Support of P(x, sign*e) as a polynomial in (x, e), e >= 0."""
    return {(k, m): c * (sign**m) for (k, m), c in P.coeffs.items()}


def _branch_key(rho: int, coeffs, order: int):
    """Sequence of (exponent, coefficient) pairs in the e-scale, for ordering
    branches by their value as e -> 0+ (larger first nonzero difference wins)."""
    return [(Fraction(i, rho), coeffs[i]) for i in range(order + 1) if coeffs[i] != 0]


def _compare_branches(a, b, order):
    """-1, 0, +1 comparing branch values for small e > 0."""
    rho_a, ca, _ = a
    rho_b, cb, _ = b
    bound = min(Fraction(order, rho_a), Fraction(order, rho_b))
    exps = sorted(
        {Fraction(i, rho_a) for i in range(1, order + 1) if ca[i] != 0}
        | {Fraction(i, rho_b) for i in range(1, order + 1) if cb[i] != 0}
    )
    for ex in exps:
        if ex > bound:
            break
        va = ca[int(ex * rho_a)] if (ex * rho_a).denominator == 1 and ex * rho_a <= order else 0
        vb = cb[int(ex * rho_b)] if (ex * rho_b).denominator == 1 and ex * rho_b <= order else 0
        if va != vb:
            diff = float(va) - float(vb)
            return 1 if diff > 0 else -1
    return 0


def track_biggest_real_root(P: PolynomialFamily, eps: float):
    """Largest real root of P(., eps), or None.

    Companion-matrix roots give candidates; each is polished by real Newton
    steps and accepted only if P changes sign across it.  The sign test
    discriminates genuine (odd-multiplicity) real roots from complex pairs
    that sit within floating resolution of the axis, which plain imaginary
    part thresholds cannot do for eps near 0."""
    coeffs = P.x_coeffs(eps)
    rr = np.roots(list(reversed(coeffs)))

    def p_at(x):
        acc = 0.0
        for c in reversed(coeffs):
            acc = acc * x + c
        return acc

    def dp_at(x):
        acc = 0.0
        n = len(coeffs) - 1
        for k in range(n, 0, -1):
            acc = acc * x + k * coeffs[k]
        return acc

    best = None
    if coeffs[0] == 0.0:
        best = 0.0  # exact root at the origin, any multiplicity
    for i, r in enumerate(rr):
        if abs(r.imag) > 1e-6 * max(1.0, abs(r)):
            continue
        x = float(r.real)
        for _ in range(3):  # polish; harmless at non-simple candidates
            d = dp_at(x)
            if d == 0:
                break
            step = p_at(x) / d
            if abs(step) > 0.5 * max(1.0, abs(x)):
                break
            x -= step
        gap = min(
            (abs(complex(x, 0.0) - rr[j]) for j in range(len(rr)) if j != i),
            default=1.0,
        )
        delta = max(1e-3 * gap, 1e-15 * max(1.0, abs(x)))
        if p_at(x - delta) * p_at(x + delta) < 0:
            if best is None or x > best:
                best = x
    return best


def biggest_real_root_branch(
    P: PolynomialFamily,
    sign: int,
    order: int = DEFAULT_BRANCH_ORDER,
    validate: bool = True,
    grid: Sequence[float] = _VALIDATION_GRID,
) -> PuiseuxBranch:
    """Fractional-power branch of the biggest real root of P on one side.

    The polygon iteration produces every real branch; the largest for small
    |eps| is selected (ties broken by comparing coefficient sequences), then
    checked against numerically tracked roots on a log grid."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    tracked = {}
    if validate:
        for e in grid:
            tracked[e] = track_biggest_real_root(P, sign * e)

    try:
        raw = _branches_of(_signed_support(P, sign), order, _MAX_POLYGON_DEPTH)
    except RecursionError:
        raw = []
    branches = []
    seen = {}
    for rho, coeffs, exact in raw:
        rho, coeffs = _canonical_ramification(rho, coeffs, order)
        key = (rho, tuple(str(c) for c in coeffs))
        if key in seen:
            # only two certified-exact copies are truly the same function
            if not (seen[key] and exact):
                raise BranchAmbiguous(
                    "two real branches coincide to the computed truncation order"
                )
        else:
            seen[key] = exact
            branches.append((rho, coeffs, exact))
    if validate and all(r is None for r in tracked.values()):
        raise NoRealRoot(f"no real root of P on the sampled eps grid, sign {sign:+d}")
    if not branches:
        branch = _numeric_fallback_branch(P, sign, tracked)
    else:
        best = branches[0]
        for b in branches[1:]:
            cmp = _compare_branches(b, best, order)
            if cmp > 0:
                best = b
            elif cmp == 0 and (b[0] != best[0] or b[1] != best[1]):
                raise BranchAmbiguous(
                    "two distinct real branches coincide to the computed order"
                )
        rho, coeffs, exact = best
        branch = PuiseuxBranch(
            rho=rho, sigma=TruncatedSeries(tuple(coeffs)), sign=sign, exact=exact
        )

    if validate:
        _validate_branch(P, branch, tracked)
    return branch


def _canonical_ramification(rho: int, coeffs, order: int):
    """Reduce rho by the gcd of the nonzero coefficient indices."""
    idxs = [i for i, c in enumerate(coeffs) if c != 0]
    if not idxs:
        return 1, tuple([0] * (order + 1))
    g = math.gcd(rho, *idxs)
    if g <= 1:
        return rho, coeffs
    reduced = [0] * (order + 1)
    for i in idxs:
        if i // g <= order:
            reduced[i // g] = coeffs[i]
    return rho // g, tuple(reduced)


def _numeric_fallback_branch(P, sign, tracked):
    """Leading-order fit used when the polygon iteration yields nothing."""
    vals = sorted((e, r) for e, r in tracked.items() if r is not None)
    if not vals:
        raise NoRealRoot("numeric fallback has no tracked roots")
    if all(abs(r) <= 1e-12 for _, r in vals):
        return PuiseuxBranch(
            rho=1,
            sigma=TruncatedSeries.zero(DEFAULT_BRANCH_ORDER),
            sign=sign,
            exact=False,
        )
    es = np.array([e for e, r in vals if abs(r) > 1e-300])
    rs = np.array([r for _, r in vals if abs(r) > 1e-300])
    if np.any(rs <= 0):
        raise BranchAmbiguous("numeric fallback cannot fit a sign-changing root")
    slope = np.polyfit(np.log(es), np.log(rs), 1)[0]
    frac = Fraction(slope).limit_denominator(12)
    rho = frac.denominator
    pexp = frac.numerator
    lead = float(np.exp(np.mean(np.log(rs) - float(frac) * np.log(es))))
    coeffs = [0.0] * (DEFAULT_BRANCH_ORDER + 1)
    if pexp <= DEFAULT_BRANCH_ORDER:
        coeffs[pexp] = lead
    return PuiseuxBranch(
        rho=rho, sigma=TruncatedSeries(tuple(coeffs)), sign=sign, exact=False
    )


def _validate_branch(P: PolynomialFamily, branch: PuiseuxBranch, tracked: dict):
    """Numeric guard for the selected branch.

    The residual must vanish to tolerance at every grid point.  A confirmed
    (sign-change) real root above the prediction means the selection is
    wrong.  A prediction above every confirmed root is allowed only if it is
    itself root-consistent, since even-multiplicity real roots produce no
    sign change and cannot be confirmed numerically."""
    for e, root in tracked.items():
        eps = branch.sign * e
        pred = float(branch.sigma(e ** (1.0 / branch.rho)))
        scale = max(1.0, sum(abs(float(c)) for c in P.x_coeffs(eps)))
        resid = abs(float(P.eval(pred, eps)))
        if resid > _RESIDUAL_RTOL * scale:
            raise BranchAmbiguous(
                f"branch residual {resid:g} exceeds tolerance at eps={eps:g}"
            )
        if root is None:
            continue
        tol = _RESIDUAL_RTOL * max(1.0, abs(root))
        if root > pred + tol:
            raise BranchAmbiguous(
                f"confirmed real root {root:.15g} exceeds the branch value "
                f"{pred:.15g} at eps={eps:g}"
            )


# ---------------------------------------------------------------------------
# the shifted quotient Q and the hypothesis checks
# ---------------------------------------------------------------------------


def compute_Q(
    P: PolynomialFamily,
    branch: PuiseuxBranch,
    chop: float = 1e-12,
) -> BivariatePoly:
    """Q(s, e) = P(s + sigma(e); sign * e^rho) / s.

    The substitution is carried out termwise with truncated powers of sigma;
    the constant term in s must vanish (the branch is a root), which is
    checked before dividing.  For exact branches the result is exact."""
    max_m = max((m for _, m in P.coeffs), default=0)
    if branch.exact:
        order_e = max(
            branch.sigma.degree() * (P.mu + 1) + branch.rho * max_m,
            branch.sigma.order,
        )
    else:
        order_e = branch.sigma.order
    sigma = branch.sigma.padded(order_e)
    exact_field = all(isinstance(c, (int, Fraction)) for c in sigma.coeffs)
    one = 1 if exact_field else 1.0
    # powers of sigma, exact polynomials when branch.exact
    pow_cache = [TruncatedSeries.constant(one, order_e), sigma]
    for _ in range(P.mu):
        pow_cache.append(pow_cache[-1] * sigma)

    acc: dict = {}
    for (k, m), c in P.coeffs.items():
        c_signed = c * (branch.sign**m)
        bc = 1
        for j in range(k + 1):  # (s + sigma)^k
            if j > 0:
                bc = bc * (k - j + 1) // j
            sig_pow = pow_cache[k - j]
            for t, sc in enumerate(sig_pow.coeffs):
                if sc == 0:
                    continue
                key = (j, t + branch.rho * m)
                acc[key] = acc.get(key, 0) + c_signed * bc * sc
    if not branch.exact:
        # e-coefficients beyond the branch truncation are incomplete
        acc = {(j, t): v for (j, t), v in acc.items() if t <= order_e}
    # drop float noise
    scale = max((abs(float(v)) for v in acc.values()), default=1.0)
    cleaned = {}
    for key, v in acc.items():
        if isinstance(v, float):
            if abs(v) > chop * scale:
                cleaned[key] = v
        elif v != 0:
            cleaned[key] = v
    # the s^0 column must vanish: sigma is a root branch
    for (j, t), v in cleaned.items():
        if j == 0 and abs(float(v)) > 1e-9 * scale:
            raise NotDivisible(
                f"constant term in s does not vanish (coefficient of e^{t} is {v!r})"
            )
    shifted = {(j - 1, t): v for (j, t), v in cleaned.items() if j >= 1}
    Q = BivariatePoly(shifted)
    # sanity: the e = 0 slice must be exactly s^mu
    slice0 = {i: c for (i, j), c in Q.terms.items() if j == 0}
    if slice0 != {P.mu: 1}:
        raise NotDivisible(f"Q(s, 0) != s^mu; got slice {slice0!r}")
    return Q


def newton_diagram(Q: BivariatePoly) -> NewtonData:
    """Fill mu, nu, chi, the diagram, and the single-compact-side verdict."""
    support = Q.support()
    s_axis = [(i, c) for (i, j), c in Q.terms.items() if j == 0]
    if len(s_axis) != 1:
        raise ValueError("Q(s,0) must be a single monomial s^mu")
    mu = s_axis[0][0]
    e_axis = sorted((j, c) for (i, j), c in Q.terms.items() if i == 0)
    if not e_axis:
        raise DegenerateQ("Q(0, e) vanishes identically")
    nu, chi = e_axis[0]
    violations = [(i, j) for (i, j) in support if i * nu + j * mu < mu * nu]
    hull = _diagram_vertices(support)
    nd = NewtonData(Q=Q, mu=mu, nu=nu, chi=chi, diagram=hull)
    if violations:
        nd.h1 = Verdict(
            holds=False,
            witness=violations[0],
            detail=f"support point {violations[0]} lies below the segment "
            f"(mu,0)-(0,nu) = ({mu},0)-(0,{nu})",
        )
    else:
        nd.h1 = Verdict(
            holds=True,
            witness=None,
            detail=f"all support points satisfy i/{mu} + j/{nu} >= 1",
        )
    return nd


def _diagram_vertices(support):
    pts = {}
    for i, j in support:
        if i not in pts or j < pts[i]:
            pts[i] = j
    hull = []
    for i in sorted(pts):
        j = pts[i]
        while len(hull) >= 2:
            (i1, j1), (i2, j2) = hull[-2], hull[-1]
            if (i2 - i1) * (j - j1) - (j2 - j1) * (i - i1) <= 0:
                hull.pop()
            else:
                break
        hull.append((i, j))
    return hull


def principal_part_on_circle(nd: NewtonData, theta: float) -> float:
    """g(theta) = sum over the compact side of q_ij sin^i cos^j."""
    mu, nu = nd.mu, nd.nu
    st, ct = math.sin(theta), math.cos(theta)
    acc = 0.0
    for (i, j), c in nd.Q.terms.items():
        if i * nu + j * mu == mu * nu:
            acc += float(c) * st**i * ct**j
    return acc


def check_h2(nd: NewtonData, n_points: int = 4096) -> Verdict:
    """Positivity of the principal quasi-homogeneous part on [0, pi/2].

    Certified on a uniform grid with the Lipschitz bound
    |g'| <= sum_side |q_ij| (i+j): positive iff the grid minimum clears
    (pi/2 / N) * bound.  A positive but uncertified minimum raises
    Inconclusive so the caller can retry with a larger grid."""
    mu, nu = nd.mu, nd.nu
    side = {(i, j): c for (i, j), c in nd.Q.terms.items() if i * nu + j * mu == mu * nu}
    bound = sum(abs(float(c)) * (i + j) for (i, j), c in side.items())
    h = (math.pi / 2) / n_points
    min_val, min_theta = math.inf, 0.0
    for k in range(n_points + 1):
        th = k * h
        g = principal_part_on_circle(nd, th)
        if g < min_val:
            min_val, min_theta = g, th
    margin = h * bound
    if min_val <= 0:
        nd.h2 = Verdict(
            holds=False,
            witness=min_theta,
            detail=f"principal part reaches {min_val:.3g} at theta={min_theta:.10g}",
        )
        return nd.h2
    if min_val > margin:
        nd.h2 = Verdict(
            holds=True,
            witness=min_theta,
            detail=f"grid minimum {min_val:.3g} at theta={min_theta:.6g} "
            f"clears Lipschitz margin {margin:.3g}",
        )
        return nd.h2
    raise Inconclusive(
        f"grid minimum {min_val:.3g} positive but below margin {margin:.3g}",
        theta=min_theta,
        min_value=min_val,
        margin=margin,
    )


def check_h0(nd: NewtonData, eps_grid: Sequence[float] = _VALIDATION_GRID) -> Verdict:
    """Positivity of Q(0, e) near e = 0: chi > 0 plus a grid check."""
    if not float(nd.chi) > 0:
        nd.h0 = Verdict(holds=False, witness=0.0, detail=f"chi = {nd.chi!r} <= 0")
        return nd.h0
    for e in eps_grid:
        val = float(nd.Q.eval(0.0, float(e)))
        if val <= 0:
            nd.h0 = Verdict(
                holds=False, witness=float(e), detail=f"Q(0, {e:g}) = {val:.3g} <= 0"
            )
            return nd.h0
    nd.h0 = Verdict(
        holds=True, witness=None, detail="chi > 0 and Q(0, e) > 0 on the grid"
    )
    return nd.h0


def analyze_family(
    P: PolynomialFamily,
    sign: int = +1,
    order: int = DEFAULT_BRANCH_ORDER,
    n_points: int = 4096,
) -> tuple[PuiseuxBranch, NewtonData]:
    """Branch extraction, Q, and all three hypothesis verdicts in one call."""
    branch = biggest_real_root_branch(P, sign, order=order)
    Q = compute_Q(P, branch)
    nd = newton_diagram(Q)
    check_h0(nd)
    check_h2(nd, n_points=n_points)
    return branch, nd
