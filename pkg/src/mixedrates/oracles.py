"""Exact finite-n optima over probability classes.

All three problems are solved on a :class:`ClassedDistribution`, so the
element count may be astronomically large; multiplicities and sizes ``M``
are Python ints throughout.  Quantities that scale with ``M`` are handled
in units of ``M``: an element of probability ``p`` is worth ``x = M p``
units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ExhaustiveTooLarge
from .spectrum import ClassedDistribution

EXACT_INT_LIMIT = 2**52
SATURATED = 2.0**52
BUDGET_TOL = 1e-12
SCAN_LIMIT = 4096
FLOAT_RESOLUTION_BITS = 50
IR_SCAN_LIMIT = 64
SATURATED_LOG = 60 * math.log(2.0)
EXHAUSTIVE_ELEMENTS = 12
EXHAUSTIVE_BINS = 6


@dataclass(frozen=True)
class AllocationResult:
    """Objective value plus a class-wise description of the optimizer.

    ``allocation`` depends on the problem: for coding it is
    ``(class, elements kept)``; for resolvability ``(class, ((units, elements), ...))``;
    for intrinsic randomness a tuple of ``(load in units of 1/M, bins)`` groups
    (heuristic) or the element-to-bin assignment (exhaustive).
    """

    problem: str
    M: int
    objective: float
    allocation: tuple
    exactness: str = "exact"


def _check_M(M) -> int:
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    return int(M)


def within(value: float, budget: float) -> bool:
    """Budget comparison used by every size search (absorbs summation noise)."""
    return value <= budget + BUDGET_TOL


# -- fixed-length coding -------------------------------------------------------


def optimal_coding_error(classes: ClassedDistribution, M: int) -> AllocationResult:
    """Error of the best deterministic code of size ``M``: keep the ``M`` likeliest."""
    M = _check_M(M)
    left = M
    kept = []
    lost = []
    for j, (c, mass) in enumerate(zip(classes.multiplicities, classes.masses)):
        if left >= c:
            kept.append((j, c))
            left -= c
        elif left > 0:
            kept.append((j, left))
            lost.append(mass * ((c - left) / c))
            left = 0
        else:
            lost.append(mass)
    return AllocationResult("coding", M, max(0.0, math.fsum(lost)), tuple(kept))


def _suffix_masses(classes) -> list:
    tail = [0.0] * (len(classes) + 1)
    acc = []
    for j in range(len(classes) - 1, -1, -1):
        acc.append(classes.masses[j])
        tail[j] = math.fsum(acc)
    return tail


def min_code_size(classes: ClassedDistribution, epsilon: float) -> int:
    """Smallest ``M`` whose optimal coding error is within ``epsilon``."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon!r}")
    tail = _suffix_masses(classes)
    before = 0
    for j, c in enumerate(classes.multiplicities):
        if within(tail[j + 1], epsilon):
            # fewest class-j elements to keep; the error is monotone in that count
            mass = classes.masses[j]
            lo, hi = -1, c
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if within(tail[j + 1] + mass * ((c - mid) / c), epsilon):
                    hi = mid
                else:
                    lo = mid
            return max(before + hi, 1)
        before += c
    return max(before, 1)


# -- resolvability ------------------------------------------------------------


@dataclass(frozen=True)
class Apportionment:
    """Largest-remainder allocation of ``M`` units over a subset of classes.

    ``units[j]`` is a tuple of ``(units per element, element count)`` pairs for
    class ``j`` (empty outside the subset); ``distance`` is the variational
    distance between the induced law and the class distribution.
    """

    M: int
    distance: float
    units: tuple


def _class_arrays(classes, M):
    log_m = math.log(M)
    with np.errstate(over="ignore"):
        x = np.exp(log_m - classes.values)
    big = ~(x < SATURATED)
    floor = np.where(big, 0.0, np.floor(np.where(big, 0.0, x)))
    frac = np.where(big, 0.0, x - floor)
    masses = classes.masses
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # leftover mass of a class: c * frac / M
        spare = np.where(x < 1.0, masses, np.where(big, 0.0, masses * frac / x))
        capacity = np.exp(classes.log_multiplicities - log_m)
    return x, big, floor, frac, spare, capacity


def apportion(classes: ClassedDistribution, M: int, keep=None,
              with_units: bool = True) -> Apportionment:
    """Give every kept element ``floor(M p)`` units, then share the rest.

    Leftover units go first ``L // N`` to every kept element (``N`` kept
    elements) and then one each in order of fractional part ``M p - floor(M p)``,
    largest first, ties by class index.  With ``keep=None`` every class is kept
    and ``L < N`` always, so this is the plain largest-remainder rule.
    """
    M = _check_M(M)
    k = len(classes)
    keep = np.ones(k, dtype=bool) if keep is None else np.asarray(keep, dtype=bool)
    x, big, floor, frac, spare, capacity = _class_arrays(classes, M)
    mult = classes.multiplicities
    outside = math.fsum(classes.masses[~keep])
    idx = np.flatnonzero(keep)
    order = idx[np.lexsort((idx, -frac[idx]))]
    bumps = {}
    extra = 0

    if M < EXACT_INT_LIMIT:
        floors = {int(j): int(floor[j]) for j in idx if floor[j] >= 1}
        used = sum(mult[j] * f for j, f in floors.items())
        while used > M:
            # a float floor rounded past an integer; undo the smallest fraction
            j = min(floors, key=lambda i: (frac[i], i))
            floors[j] -= 1
            frac[j] += 1.0
            used -= mult[j]
            spare[j] = classes.masses[j] * frac[j] / x[j]
            if floors[j] == 0:
                del floors[j]
            order = idx[np.lexsort((idx, -frac[idx]))]
        left = M - used
        count = sum(mult[j] for j in idx)
        extra, left = divmod(left, count) if count else (0, 0)
        for j in order:
            if left == 0:
                break
            b = min(mult[j], left)
            bumps[int(j)] = b
            left -= b

        def floor_of(j):
            return floors.get(j, 0)
    else:
        leftover = outside + math.fsum(spare[idx])
        room = math.fsum(capacity[idx]) if np.isfinite(capacity[idx]).all() else math.inf
        extra = int(leftover // room) if 0 < room < math.inf else 0
        if extra == 0:
            with np.errstate(over="ignore"):
                cum = np.cumsum(capacity[order])
            stop = int(np.searchsorted(cum, leftover, side="right"))
            for j in order[:stop]:
                bumps[int(j)] = mult[j]
            if stop < len(order):
                j = int(order[stop])
                rest = leftover - (cum[stop - 1] if stop else 0.0)
                b = min(mult[j], int(round(Fraction(rest) * M)))
                if b > 0:
                    bumps[j] = b

        def floor_of(j):
            if not big[j]:
                return int(floor[j])
            return int(Fraction(math.exp(-classes.values[j])) * M)

    if extra >= 1:
        distance = 2.0 * outside
    else:
        lost = []
        for j in idx:
            b = bumps.get(int(j), 0)
            if b == 0:
                lost.append(spare[j])
            elif b < mult[j]:
                lost.append(spare[j] * ((mult[j] - b) / mult[j]))
        distance = 2.0 * (outside + math.fsum(lost))
    distance = min(2.0, max(0.0, distance))

    units = ()
    if with_units:
        table = []
        total = 0
        for j in range(k):
            if not keep[j]:
                table.append(())
                continue
            base = floor_of(j) + extra
            b = bumps.get(j, 0)
            pairs = tuple(p for p in ((base + 1, b), (base, mult[j] - b)) if p[1] > 0 and p[0] > 0)
            total += sum(u * c for u, c in pairs)
            table.append(pairs)
        if total != M:
            # only reachable on the float path: park the rounding residue on one
            # element of the likeliest kept class
            j = int(idx[0])
            u, c = table[j][0] if table[j] else (0, 0)
            fixed = ((u + M - total, 1),) + (((u, c - 1),) if c > 1 else ())
            fixed = tuple(p for p in fixed if p[0] > 0) + tuple(table[j][1:])
            table[j] = fixed
        units = tuple(table)
    return Apportionment(M, distance, units)


def optimal_resolvability_distance(classes: ClassedDistribution, M: int,
                                   with_units: bool = True) -> AllocationResult:
    """Smallest variational distance between ``phi(U_M)`` and the source."""
    plan = apportion(classes, M, with_units=with_units)
    allocation = tuple((j, pairs) for j, pairs in enumerate(plan.units) if pairs)
    return AllocationResult("resolvability", plan.M, plan.distance, allocation)


def _search_smallest(ok, bad: int, good: int) -> int:
    """Smallest M in (bad, good] with ok(M), given ok(good) and not ok(bad).

    Scans linearly on short ranges (exact even when ok is not monotone in M);
    otherwise bisects, which lands on a crossing point.  Bisection stops once
    the bracket is below ``2**-50`` of ``M``: float evaluation of the distance
    cannot resolve finer steps.
    """
    if good - bad <= SCAN_LIMIT:
        for m in range(bad + 1, good):
            if ok(m):
                return m
        return good
    while good - bad > max(1, good >> FLOAT_RESOLUTION_BITS):
        mid = (bad + good) // 2
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good


def min_resolvability_size(classes: ClassedDistribution, delta: float) -> int:
    """Smallest ``M`` whose optimal resolvability distance is within ``delta``.

    Any size that works also makes the top-``M`` code err at most ``delta/2``,
    so the search starts at :func:`min_code_size` of ``delta/2``.
    """
    if not 0.0 <= delta < 2.0:
        raise ValueError(f"delta must lie in [0, 2), got {delta!r}")

    def ok(m):
        return within(apportion(classes, m, with_units=False).distance, delta)

    lo = min_code_size(classes, delta / 2.0)
    if ok(lo):
        return lo
    hi = 2 * lo
    while not ok(hi):
        lo, hi = hi, 2 * hi
    return _search_smallest(ok, lo, hi)


# -- intrinsic randomness -------------------------------------------------------


def _times(k: int, log_x: float) -> float:
    """``k * exp(log_x)`` without overflowing on huge ``k``."""
    if k == 0:
        return 0.0
    if k < 2**53:
        return k * math.exp(log_x)
    return math.exp(math.log(k) + log_x)


def _merge_groups(groups):
    groups.sort(key=lambda g: g[0])
    out = []
    for load, count in groups:
        if out and abs(out[-1][0] - load) <= 1e-12 * max(1.0, load):
            out[-1][1] += count
        else:
            out.append([load, count])
    return out


def _lpt(classes: ClassedDistribution, M: int):
    """Longest-processing-time greedy at class level.

    Elements arrive likeliest first and each goes to a currently lightest bin.
    Bins are kept as ``[load, count]`` groups with loads in units of ``1/M``.
    Within one class every element weighs ``x``; the bins lighter than
    ``min load + x`` form a block that LPT serves round-robin in load order,
    so whole rounds are applied at once until the next group catches up.
    """
    log_m = math.log(M)
    lost = []
    free = M
    groups = None
    for c, v, mass in zip(classes.multiplicities, classes.values, classes.masses):
        log_x = log_m - v
        if groups is None:
            if log_x > SATURATED_LOG and free > c:
                # so heavy that each element owns a bin; each bin is off by p - 1/M
                lost.append(mass - c / M)
                free -= c
                continue
            groups = [[0.0, free]]
        x = math.exp(log_x)
        remaining = c
        while remaining:
            low = groups[0][0]
            b = 1
            size = groups[0][1]
            while b < len(groups) and groups[b][0] < low + x:
                size += groups[b][1]
                b += 1
            if remaining >= size:
                rounds = remaining // size
                if b < len(groups):
                    reach = math.exp(min(700.0, math.log(groups[b][0] - low) - log_x))
                    if reach < rounds:
                        rounds = max(1, int(reach))
                step = _times(rounds, log_x)
                for g in groups[:b]:
                    g[0] += step
                remaining -= rounds * size
            else:
                # a partial round: the lightest bins of the block get one each
                split = []
                for g in groups[:b]:
                    if remaining == 0:
                        break
                    take = min(g[1], remaining)
                    if take < g[1]:
                        split.append([g[0] + x, take])
                        g[1] -= take
                    else:
                        g[0] += x
                    remaining -= take
                groups.extend(split)
            groups = _merge_groups(groups)
    if groups is None:
        groups = [[0.0, free]] if free else []
    groups = tuple((load, count) for load, count in groups)
    lost.extend((count / M) * abs(load - 1.0) for load, count in groups)
    return math.fsum(lost), groups


def _exhaustive(probs, M):
    order = sorted(range(len(probs)), key=lambda i: -probs[i])
    p = [probs[i] for i in order]
    target = 1.0 / M
    best = [math.inf, None]
    loads = [0.0] * M
    assign = [0] * len(p)

    def excess():
        return 2.0 * sum(max(0.0, load - target) for load in loads)

    def visit(i, used):
        if excess() >= best[0] - 1e-15:
            return
        if i == len(p):
            value = sum(abs(load - target) for load in loads)
            if value < best[0]:
                best[0] = value
                best[1] = tuple(assign)
            return
        for b in range(min(used + 1, M)):
            loads[b] += p[i]
            assign[i] = b
            visit(i + 1, max(used, b + 1))
            loads[b] -= p[i]

    visit(0, 0)
    bins = [0] * len(p)
    for pos, i in enumerate(order):
        bins[i] = best[1][pos]
    return best[0], tuple(bins)


def intrinsic_distance(classes: ClassedDistribution, M: int,
                       mode: str = "heuristic") -> AllocationResult:
    """Distance from uniform on ``M`` of a deterministic map of the source.

    ``heuristic`` gives an upper bound on the optimum (greedy bin packing);
    ``exhaustive`` searches every assignment of at most 12 elements to at
    most 6 bins.
    """
    M = _check_M(M)
    if mode == "heuristic":
        value, groups = _lpt(classes, M)
        return AllocationResult("intrinsic", M, min(2.0, value), groups,
                                "heuristic-upper-bound")
    if mode != "exhaustive":
        raise ValueError(f"unknown mode {mode!r}")
    if classes.size > EXHAUSTIVE_ELEMENTS or M > EXHAUSTIVE_BINS:
        raise ExhaustiveTooLarge(
            f"exhaustive search needs <= {EXHAUSTIVE_ELEMENTS} elements and "
            f"M <= {EXHAUSTIVE_BINS} (got {classes.size}, {M})")
    probs = list(classes.element_probabilities())
    value, bins = _exhaustive(probs, M)
    return AllocationResult("intrinsic", M, value, bins, "exact")


def ir_distance_lower_bound(classes: ClassedDistribution, M: int) -> float:
    """A bound every map obeys: ``d >= 2 max(Pr{P >= p}(1 - 1/(M p)), (M - N)/M)``.

    ``N`` is the support size.  It is non-decreasing in ``M``.
    """
    M = _check_M(M)
    inverse = np.exp(np.minimum(classes.values - math.log(M), 700.0))
    heavy = np.cumsum(classes.masses) * (1.0 - inverse)
    empty = max(0, M - classes.size) / M
    return 2.0 * max(float(heavy.max()), empty, 0.0)


def _ir_upper_size(classes, delta) -> int:
    def fails(m):
        return ir_distance_lower_bound(classes, m) > delta + BUDGET_TOL

    hi = 1
    while not fails(hi * 2):
        hi *= 2
        if hi > 2**100000:
            raise OverflowError("intrinsic size search diverged")
    lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fails(mid):
            hi = mid
        else:
            lo = mid
    return lo


def max_ir_size(classes: ClassedDistribution, delta: float,
                mode: str = "heuristic") -> int:
    """Largest ``M`` whose intrinsic distance (under ``mode``) is within ``delta``.

    Sizes above a certified bound can never work, so the search runs below
    it: a downward scan on short ranges, bisection otherwise.
    """
    if not 0.0 <= delta < 2.0:
        raise ValueError(f"delta must lie in [0, 2), got {delta!r}")
    top = _ir_upper_size(classes, delta)
    if mode == "exhaustive" and top > EXHAUSTIVE_BINS:
        raise ExhaustiveTooLarge(f"sizes up to {top} would need exhaustive search")

    def ok(m):
        return within(intrinsic_distance(classes, m, mode).objective, delta)

    if top <= IR_SCAN_LIMIT:
        for m in range(top, 0, -1):
            if ok(m):
                return m
        return 1
    lo, hi = 1, top
    if ok(hi):
        return hi
    while hi - lo > max(1, hi >> FLOAT_RESOLUTION_BITS):
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def ir_converse_log_size(classes: ClassedDistribution, delta: float) -> float:
    """Upper bound on ``log M`` for any map with intrinsic distance ``<= delta``.

    A map of the source onto ``U_M`` with ``log M > s + t`` has distance at
    least ``2 Pr{-log P(Y) < s} - 2 exp(-t)``.  Taking ``s`` just above a class
    value and the smallest admissible ``t`` gives
    ``log M <= min_j [v_j - log(C_j - delta/2)]`` over classes whose cumulative
    mass ``C_j`` exceeds ``delta/2``.
    """
    if not 0.0 <= delta < 2.0:
        raise ValueError(f"delta must lie in [0, 2), got {delta!r}")
    cum = np.cumsum(classes.masses)
    excess = cum - delta / 2.0
    ok = excess > BUDGET_TOL
    return float(np.min(classes.values[ok] - np.log(excess[ok])))
