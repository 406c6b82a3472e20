"""Second-order rates of mixed sources.

Notation: ``q_tail`` is the upper standard normal tail,
``q_tail(x) = Pr{Z >= x}``.  Some texts call this function a "cumulative
distribution function"; here it is always the *upper* tail, and the lower
tail is ``1 - q_tail``.

For a first-order rate ``a`` the components split into
``L0(a)`` (entropy equal to ``a``) and ``L1(a)`` (entropy above ``a``).  The
resolvability / coding second-order rate ``b`` solves

    sum_{i in L0} w(i) q_tail(b / sigma_i) + sum_{j in L1} w(j) = target

with ``target = delta / 2`` (resolvability) or ``epsilon`` (coding).  The
intrinsic-randomness rate mirrors this with lower tails and the components
below ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, ndtri

from .errors import DomainError, InfeasibleA, TargetOutOfRange
from .sources import component_statistics

ENTROPY_TOL = 1e-12
WEIGHT_TOL = 1e-12
PROBLEMS = ("resolvability", "intrinsic", "coding")
_SQRT2 = math.sqrt(2.0)


def q_tail(x):
    """Upper standard normal tail ``Pr{Z >= x}``."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def q_tail_inv(p: float) -> float:
    """Inverse of :func:`q_tail` on ``(0, 1)``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"q_tail_inv needs 0 < p < 1, got {p!r}")
    return float(-ndtri(p))


class Bound(Enum):
    """Infinite second-order values; kept out of float arithmetic on purpose."""

    NEG = "-inf"
    POS = "+inf"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RateSolution:
    problem: str
    a: float
    b: float | Bound
    case_label: str
    active: tuple = ()
    outer: tuple = ()

    @property
    def finite(self) -> bool:
        return not isinstance(self.b, Bound)

    def b_as_float(self) -> float:
        """``b`` with the sentinels mapped to IEEE infinities (for display only)."""
        if self.b is Bound.NEG:
            return -math.inf
        if self.b is Bound.POS:
            return math.inf
        return self.b


def _stats(source):
    """Accept a source or an explicit ``((w, SourceStatistics), ...)`` list."""
    if isinstance(source, (list, tuple)):
        return [(float(w), s) for w, s in source]
    return list(component_statistics(source))


def _split(stats, a, upper: bool):
    level, outer = [], []
    for i, (_, s) in enumerate(stats):
        gap = s.entropy - a
        if abs(gap) <= ENTROPY_TOL:
            level.append(i)
        elif (gap > 0) == upper:
            outer.append(i)
    return level, outer


def _label(level, outer) -> str:
    if len(level) >= 2:
        return "I"
    return "II" if not outer else "III"


def _tail_sum(stats, level, b, upper: bool) -> float:
    # sum over the level set of w * (upper or lower tail at b / sigma);
    # zero-width components are steps at 0 counted inclusively
    terms = []
    for i in level:
        w, s = stats[i]
        if s.varsigma > 0.0:
            x = b / s.sigma
            terms.append(w * (q_tail(x) if upper else q_tail(-x)))
        elif (b <= 0.0) if upper else (b >= 0.0):
            terms.append(w)
    return math.fsum(terms)


def _bisect(fn, lo, hi, iterations=400):
    """Shrink ``[lo, hi]`` with ``fn(lo)`` False and ``fn(hi)`` True to adjacent floats."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _solve(stats, a, target, upper: bool, problem: str) -> RateSolution:
    level, outer = _split(stats, a, upper)
    s_out = math.fsum(stats[i][0] for i in outer)
    s_level = math.fsum(stats[i][0] for i in level)
    # reaching every tail term at once makes b run to the far end
    full_b, empty_b = (Bound.NEG, Bound.POS) if upper else (Bound.POS, Bound.NEG)
    base = dict(problem=problem, a=float(a), active=tuple(level), outer=tuple(outer))
    if not level:
        if abs(s_out - target) <= WEIGHT_TOL:
            return RateSolution(b=full_b, case_label="trivial-a", **base)
        raise InfeasibleA(
            f"a={a!r} is not a component entropy and the target {target!r} differs "
            f"from the outer weight {s_out!r}", forced_target=s_out)
    if abs(s_out - target) <= WEIGHT_TOL:
        return RateSolution(b=empty_b, case_label="degenerate-w-boundary", **base)
    if abs(s_out + s_level - target) <= WEIGHT_TOL:
        return RateSolution(b=full_b, case_label="degenerate-w-boundary", **base)
    if not s_out < target < s_out + s_level:
        raise InfeasibleA(
            f"target {target!r} is outside ({s_out!r}, {s_out + s_level!r}) for a={a!r}",
            forced_target=None)

    need = target - s_out
    if all(stats[i][1].varsigma == 0.0 for i in level):
        # pure step at 0: the infimum (supremum) over b is 0 itself
        return RateSolution(b=0.0, case_label=_label(level, outer), **base)

    # resolvability: smallest b with tail sum <= need; intrinsic: largest b
    def done(b):
        value = _tail_sum(stats, level, b, upper)
        return value <= need if upper else value > need

    lo, hi = -1.0, 1.0
    while not done(hi):
        hi *= 2.0
        if hi > 1e300:
            break
    while done(lo):
        lo *= 2.0
        if lo < -1e300:
            break
    lo, hi = _bisect(done, lo, hi)
    b = hi if upper else lo
    return RateSolution(b=b, case_label=_label(level, outer), **base)


def _check_delta(delta):
    if not 0.0 <= delta < 2.0:
        raise TargetOutOfRange(f"delta must lie in [0, 2), got {delta!r}")


def resolvability_second_order(source, a: float, delta: float) -> RateSolution:
    """Second-order resolvability rate at first-order rate ``a``."""
    _check_delta(delta)
    return _solve(_stats(source), a, delta / 2.0, True, "resolvability")


def intrinsic_second_order(source, a: float, delta: float) -> RateSolution:
    """Second-order intrinsic-randomness rate at first-order rate ``a``."""
    _check_delta(delta)
    return _solve(_stats(source), a, delta / 2.0, False, "intrinsic")


def coding_second_order(source, a: float, epsilon: float) -> RateSolution:
    """Fixed-length coding rate: the resolvability rate at ``2 * epsilon``."""
    if not 0.0 <= epsilon < 1.0:
        raise TargetOutOfRange(f"epsilon must lie in [0, 1), got {epsilon!r}")
    return replace(resolvability_second_order(source, a, 2.0 * epsilon), problem="coding")


def coding_second_order_direct(source, a: float, epsilon: float) -> float:
    """Finite coding rate from a direct root find (used to cross-check the duality)."""
    stats = _stats(source)
    level, outer = _split(stats, a, True)
    need = epsilon - math.fsum(stats[i][0] for i in outer)
    if any(stats[i][1].varsigma == 0.0 for i in level):
        raise DomainError("direct solve needs positive variances")

    def excess(b):
        return math.fsum(stats[i][0] * q_tail(b / stats[i][1].sigma) for i in level) - need

    lo, hi = -1.0, 1.0
    while excess(lo) < 0:
        lo *= 2.0
    while excess(hi) > 0:
        hi *= 2.0
    return brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def tail_target(problem: str, target: float) -> float:
    """Map a user-facing budget (delta or epsilon) to the tail mass being matched."""
    if problem == "coding":
        if not 0.0 <= target < 1.0:
            raise TargetOutOfRange(f"epsilon must lie in [0, 1), got {target!r}")
        return float(target)
    if problem in ("resolvability", "intrinsic"):
        _check_delta(target)
        return target / 2.0
    raise ValueError(f"unknown problem {problem!r}")


def finite_n_rate(source, n: int, target: float, upper: bool = True) -> float:
    """Rate ``R_n`` solving ``sum_i w(i) q_tail(sqrt(n)(R_n - H_i)/sigma_i) = target``.

    With ``upper=False`` the lower tail ``1 - q_tail`` is used instead (the
    intrinsic-randomness version).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < target < 1.0:
        raise TargetOutOfRange(f"target must lie in (0, 1), got {target!r}")
    stats = _stats(source)
    root_n = math.sqrt(n)
    sigma_max = max(s.sigma for _, s in stats)
    spread = 20.0 * sigma_max / root_n if sigma_max > 0 else 1.0
    lo = min(s.entropy for _, s in stats) - spread
    hi = max(s.entropy for _, s in stats) + spread

    def mass(r):
        terms = []
        for w, s in stats:
            x = root_n * (r - s.entropy)
            if s.varsigma > 0.0:
                terms.append(w * q_tail(x / s.sigma if upper else -x / s.sigma))
            else:
                step = 0.5 if x == 0 else float((x < 0) == upper)
                terms.append(w * step)
        return math.fsum(terms)

    if upper:
        lo, hi = _bisect(lambda r: mass(r) <= target, lo, hi)
    else:
        lo, hi = _bisect(lambda r: mass(r) >= target, lo, hi)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FirstOrder:
    a: float
    case_label: str
    index: int


def admissible_first_order(source, problem: str, target: float) -> FirstOrder:
    """The component entropy ``a`` bracketing the tail target.

    ``target`` is the tail mass (``delta/2`` for resolvability and intrinsic
    randomness, ``epsilon`` for coding).  For resolvability and coding the
    entropies are scanned from the top and ``a = H_k`` with
    ``C_{k-1} < target <= C_k`` (``C_k`` the weight of the ``k`` largest
    entropy levels); intrinsic randomness scans from the bottom.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    if not 0.0 <= target < 1.0:
        raise TargetOutOfRange(f"target must lie in [0, 1), got {target!r}")
    stats = _stats(source)
    upper = problem != "intrinsic"
    order = sorted(range(len(stats)), key=lambda i: stats[i][1].entropy, reverse=upper)
    levels = []
    for i in order:
        h = stats[i][1].entropy
        if levels and abs(levels[-1][0] - h) <= ENTROPY_TOL:
            levels[-1][1].append(i)
        else:
            levels.append((h, [i]))
    cumulative = 0.0
    chosen = levels[-1]
    for h, members in levels:
        cumulative += math.fsum(stats[i][0] for i in members)
        if target <= cumulative + WEIGHT_TOL:
            chosen = (h, members)
            break
    a = chosen[0]
    solver = _solve(stats, a, target, upper, problem)
    return FirstOrder(a=a, case_label=solver.case_label, index=chosen[1][0])


def solve(source, problem: str, budget: float) -> RateSolution:
    """First- and second-order rate for ``problem`` at ``budget`` (delta or epsilon)."""
    target = tail_target(problem, budget)
    first = admissible_first_order(source, problem, target)
    if problem == "resolvability":
        return resolvability_second_order(source, first.a, budget)
    if problem == "intrinsic":
        return intrinsic_second_order(source, first.a, budget)
    return coding_second_order(source, first.a, budget)


def mixed_tail(stats: Sequence, b: float, level: Sequence[int]) -> float:
    """``sum_{i in level} w(i) q_tail(b / sigma_i)`` for residual checks."""
    return _tail_sum(list(stats), list(level), b, True)
