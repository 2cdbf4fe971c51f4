"""Series coefficients of orbits arriving at the unfolded node, by the
finite-difference recursion, plus the two-sided gluing and the mode
summation for passage times.

At a fixed parameter point the shifted data

    U(s) = U(s + theta) / lam,   V(s) = V(s + theta),   Q(s) = Q(s, e)

feed the recursion

    F_0 = U,   F_{j+1} = V_j * nabla(F_j / V_j),   V_j = V - (j/lam) Q,

and the coefficients are c_j = (F_j / V_j)(0).  Everything is linear in U,
and in exact rational arithmetic the defining identity

    Q * theta_lam(S_l) = V * S_l - U + s^(l+1) F_(l+1),   S_l = sum c_j s^j

holds with residual exactly zero, which the test suite exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

from .errors import ContinuityViolation, NonUnitV, OrderExhausted, TailUnbounded
from .family import PolynomialFamily, PuiseuxBranch, compute_Q
from .series import BivariatePoly, TruncatedSeries

ORDER_MARGIN = 4


def working_order(ell: int, mu: int = 1, k: int = 0) -> int:
    """Truncation order for an expansion to degree ell with k scale
    derivatives: each nabla costs one order and each derivative shifts
    the usable window by mu."""
    return ell + mu * k + ORDER_MARGIN


@dataclass(frozen=True)
class UnfoldingSpec:
    """One parameter point of the unfolded family.

    V is normalized so V(0) = 1 (lam absorbs the factor); eps must lie on
    the side covered by the branch.  U and V are taken as exact polynomials
    of their stored degree."""

    family: PolynomialFamily
    branch: PuiseuxBranch
    V: TruncatedSeries
    U: TruncatedSeries
    lam: object
    eps: object
    Q: BivariatePoly = None

    def __post_init__(self):
        v0 = self.V.coeffs[0]
        if not v0 > 0:
            raise NonUnitV(f"V(0) = {v0!r} must be positive")
        if v0 != 1:
            object.__setattr__(self, "lam", self.lam * v0)
            object.__setattr__(self, "V", self.V / v0)
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.eps != 0 and self.eps * self.branch.sign < 0:
            raise ValueError("eps lies on the side not covered by the branch")
        if self.Q is None:
            object.__setattr__(self, "Q", compute_Q(self.family, self.branch))

    @property
    def e_hat(self):
        return self.branch.e_hat(self.eps)

    @property
    def theta_eps(self):
        return self.branch.sigma(self.e_hat)

    def at_eps(self, eps) -> "UnfoldingSpec":
        return replace(self, eps=eps)


@dataclass(frozen=True)
class ExpansionResult:
    c: tuple
    ell: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.c) != self.ell + 1:
            raise ValueError("need exactly ell+1 coefficients")

    def partial_sum(self, s):
        """Horner evaluation of sum c_j s^j; the empty result is 0."""
        if not self.c:
            return 0 * s
        acc = self.c[-1]
        for a in reversed(self.c[:-1]):
            acc = acc * s + a
        return acc

    def to_json(self) -> dict:
        from .series import _scalar_to_str

        out = {
            "coeffs": [_scalar_to_str(v) for v in self.c],
            "ell": self.ell,
        }
        out.update(
            {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool))}
        )
        return out


EMPTY_SUM = ExpansionResult(c=(), ell=-1)


def shifted_data(spec: UnfoldingSpec, order: int):
    """Recentered series (U/lam, V, Q) at the tracked root, all at the
    given truncation order."""
    th = spec.theta_eps
    U = spec.U.padded(order).shift(th).truncated(order) / spec.lam
    V = spec.V.padded(order).shift(th).truncated(order)
    Qs = spec.Q.restrict(spec.e_hat, order)
    return U, V, Qs


def _scaled(Q: TruncatedSeries, j, lam):
    if isinstance(lam, (int, Fraction)) and not isinstance(lam, float):
        return Q * (Fraction(j) / Fraction(lam))
    return Q * (j / lam)


def recursion_coefficients(U, V, Qs, lam, ell):
    """Run the recursion on raw series data; returns (coeffs, F_{ell+1})."""
    order = min(U.order, V.order, Qs.order)
    if order < ell + 2:
        raise OrderExhausted(
            f"working order {order} cannot produce {ell + 1} coefficients"
        )
    U = U.truncated(order)
    V = V.truncated(order)
    Qs = Qs.truncated(order)
    c = []
    F = U
    for j in range(ell + 1):
        Vj = V - _scaled(Qs, j, lam)
        if Vj.coeffs[0] == 0:
            raise NonUnitV(f"V_{j}(0) = 0 at this parameter point")
        G = F / Vj
        c.append(G.coeffs[0])
        F = Vj.truncated(G.order - 1) * G.nabla()
    return c, F


def coefficients(
    spec: UnfoldingSpec,
    ell: int,
    order: int | None = None,
    check_validity: bool = False,
) -> ExpansionResult:
    """Expansion coefficients c_0..c_ell at the spec's parameter point."""
    if order is None:
        order = working_order(ell, spec.family.mu)
    U, V, Qs = shifted_data(spec, order)
    c, _ = recursion_coefficients(U, V, Qs, spec.lam, ell)
    meta = {
        "order": order,
        "eps": float(spec.eps),
        "e_hat": float(spec.e_hat),
        "lambda": float(spec.lam),
        "branch_sign": spec.branch.sign,
    }
    if check_validity:
        eps0 = vbounds(spec, ell)
        meta["eps0"] = eps0
        meta["within_validity_bound"] = abs(float(spec.eps)) <= eps0
    return ExpansionResult(c=tuple(c), ell=ell, meta=meta)


def partial_sum(res: ExpansionResult, s):
    return res.partial_sum(s)


def residual_identity_series(U, V, Qs, lam, ell):
    """Max |coefficient| of Q*theta(S) - (V*S - U + s^(l+1) F_(l+1));
    exactly zero in exact arithmetic."""
    c, F_next = recursion_coefficients(U, V, Qs, lam, ell)
    order = min(U.order, V.order, Qs.order)
    if ell >= 0:
        S = TruncatedSeries.from_coeffs(list(c), order=order)
    else:
        S = TruncatedSeries.zero(order, like=U.coeffs[0])
    lhs = Qs * S.theta(lam)
    rhs = V * S - U + F_next.shifted_up(ell + 1).truncated(order)
    diff = lhs - rhs
    return max(abs(a) for a in diff.coeffs)


def residual_identity_check(spec: UnfoldingSpec, ell: int, order: int | None = None):
    if order is None:
        order = working_order(ell, spec.family.mu)
    U, V, Qs = shifted_data(spec, order)
    return residual_identity_series(U, V, Qs, spec.lam, ell)


def vbounds(
    spec: UnfoldingSpec,
    ell: int,
    s0: float = 0.1,
    eps_max: float = 0.1,
    n_eps: int = 16,
    n_s: int = 33,
) -> float:
    """Largest grid-certified eps0 such that every V_j, j <= ell, stays in
    [1/2, 2] for |s| <= s0 and |eps| <= eps0.  Advisory: 0 when no probe
    value qualifies."""
    probes = [eps_max * (10.0 ** (-6 * k / (n_eps - 1))) for k in range(n_eps)]
    s_grid = [-s0 + 2 * s0 * i / (n_s - 1) for i in range(n_s)]
    certified = 0.0
    for eps_probe in sorted(probes):
        trial = spec.at_eps(spec.branch.sign * eps_probe)
        order = working_order(ell, spec.family.mu)
        _, V, Qs = shifted_data(trial, order)
        ok = True
        for j in range(ell + 1):
            Vj = V - _scaled(Qs, j, trial.lam)
            for s in s_grid:
                val = float(Vj(s))
                if not (0.5 <= val <= 2.0):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            certified = eps_probe
        else:
            break
    return certified


# ---------------------------------------------------------------------------
# two-sided gluing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlueResult:
    eps: tuple
    coeffs: tuple  # per eps, tuple c_0..c_ell
    ell: int
    valuation: int | None
    vanishing_checked: bool
    continuity_delta: tuple

    def column(self, j: int):
        return tuple(row[j] for row in self.coeffs)


def glue_two_sided(
    spec_plus: UnfoldingSpec,
    spec_minus: UnfoldingSpec,
    ell: int,
    grid: Sequence | None = None,
    tol: float = 1e-8,
) -> GlueResult:
    """Sample c_j(eps) across eps = 0 and enforce the matching conditions.

    When U has valuation m, the coefficients c_0..c_{m-1} must vanish for
    eps <= 0 (checked exactly in rational arithmetic, to rounding in
    floats); both one-sided limits at eps = 0 must agree within tol."""
    if grid is None:
        hi = min(abs(float(spec_plus.eps)) or 1e-3, abs(float(spec_minus.eps)) or 1e-3)
        decades = 9
        pos = [hi * 10.0 ** (-k) for k in range(decades)]
        grid = sorted({-g for g in pos} | {0.0} | set(pos))
    m = spec_plus.U.valuation()
    rows = []
    for eps in grid:
        spec = (spec_plus if eps >= 0 else spec_minus).at_eps(eps)
        res = coefficients(spec, ell)
        rows.append(res.c)
        if eps <= 0 and m is not None:
            for j in range(min(m, ell + 1)):
                cj = res.c[j]
                bad = (cj != 0) if not isinstance(cj, float) else abs(cj) > 1e-13
                if bad:
                    raise ContinuityViolation(
                        f"c_{j}({eps}) = {cj!r} should vanish below the valuation "
                        f"m = {m} of U for eps <= 0"
                    )
    grid = list(grid)
    i0 = grid.index(0.0) if 0.0 in grid else None
    deltas = []
    if i0 is not None:
        c0 = rows[i0]
        below = rows[i0 - 1] if i0 > 0 else c0
        above = rows[i0 + 1] if i0 + 1 < len(rows) else c0
        for j in range(ell + 1):
            d = max(abs(float(below[j]) - float(c0[j])), abs(float(above[j]) - float(c0[j])))
            deltas.append(d)
            if d > tol:
                raise ContinuityViolation(
                    f"c_{j} jumps by {d:g} across eps=0 (tolerance {tol:g})"
                )
    return GlueResult(
        eps=tuple(grid),
        coeffs=tuple(rows),
        ell=ell,
        valuation=m,
        vanishing_checked=m is not None,
        continuity_delta=tuple(deltas),
    )


# ---------------------------------------------------------------------------
# mode summation for passage-time coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DulacTimeSpec:
    """Data of the time form: the polar-factor field with a planar function
    U(x, y) decomposed into modes U_n(x) against y^(n-1).

    Either a finite tuple of modes or a generator with a geometric decay
    certificate (C, r): ||U_n|| <= C r^n.  The trajectory enters the node
    section at height y0 and the time is read off up to the section x = x0."""

    family: PolynomialFamily
    branch: PuiseuxBranch
    V: TruncatedSeries  # unnormalized, V(0) > 0
    eps: object
    modes: tuple | None = None
    modes_fn: Callable[[int], TruncatedSeries] | None = None
    ua_fn: Callable[[float, float], float] | None = None
    decay: tuple | None = None  # (C, r)
    y0: float = 1.0
    x0: float = 1.0

    def __post_init__(self):
        if self.modes is None and self.modes_fn is None:
            raise ValueError("need modes or modes_fn")
        if not self.V.coeffs[0] > 0:
            raise NonUnitV("V(0) must be positive")

    def mode(self, n: int) -> TruncatedSeries:
        """U_n (1-based), the coefficient of y^(n-1)."""
        if self.modes is not None:
            return self.modes[n - 1]
        return self.modes_fn(n)

    def n_modes(self) -> int | None:
        return len(self.modes) if self.modes is not None else None

    def ua(self, x: float, y: float) -> float:
        if self.ua_fn is not None:
            return self.ua_fn(x, y)
        if self.modes is None:
            raise ValueError("evaluating U(x, y) needs ua_fn or a finite mode list")
        acc = 0.0
        yp = 1.0
        for n in range(1, self.n_modes() + 1):
            acc += float(self.mode(n)(x)) * yp
            yp *= y
        return acc


def dulac_time_coefficients(
    ts: DulacTimeSpec,
    ell: int,
    tol: float = 1e-8,
    max_modes: int = 400,
) -> ExpansionResult:
    """Sum per-mode expansion coefficients over the mode index.

    Mode n contributes the coefficients of the scalar problem with
    U = U_n y0^n and lam = n V(0); summation stops when the certified
    geometric tail C gamma (r y0)^(N+1) / (1 - r y0) drops below tol,
    gamma being the largest observed |c_j| / ||U_n y0^n|| ratio."""
    finite = ts.n_modes()
    if finite is None and ts.decay is None:
        raise TailUnbounded("infinite mode list without a decay certificate")
    if ts.decay is not None:
        C, r = ts.decay
        r_eff = r * ts.y0
        if not 0 < r_eff < 1:
            raise TailUnbounded(f"certificate radius r*y0 = {r_eff} is not in (0,1)")
    total = [0.0] * (ell + 1)
    gamma = 0.0
    n = 0
    tail = math.inf if finite is None else 0.0
    while True:
        n += 1
        if finite is not None and n > finite:
            if ts.decay is not None:
                # finite table of a longer decomposition: certified tail
                C, r = ts.decay
                r_eff = r * ts.y0
                tail = C * max(gamma, 1e-300) * r_eff ** (n) / (1 - r_eff)
            else:
                tail = 0.0  # the table is the whole decomposition
            break
        if finite is None and n > max_modes:
            raise TailUnbounded(f"no convergence within {max_modes} modes")
        U_n = ts.mode(n) * (ts.y0**n)
        spec = UnfoldingSpec(
            family=ts.family,
            branch=ts.branch,
            V=ts.V,
            U=U_n,
            lam=n,
            eps=ts.eps,
        )
        res = coefficients(spec, ell)
        for j in range(ell + 1):
            total[j] += float(res.c[j])
        norm = float(U_n.norm_ell1())
        if norm > 0:
            gamma = max(gamma, max(abs(float(cj)) for cj in res.c) / norm)
        if finite is None:
            C, r = ts.decay
            r_eff = r * ts.y0
            tail = C * max(gamma, 1e-300) * r_eff ** (n + 1) / (1 - r_eff)
            if tail < tol and n >= 3:
                break
    return ExpansionResult(
        c=tuple(total),
        ell=ell,
        meta={
            "eps": float(ts.eps),
            "modes_used": n if finite is None else finite,
            "tail_bound": float(tail),
            "gamma": gamma,
            "y0": ts.y0,
        },
    )
