"""Explicit mappings and codes realizing the achievability and converse bounds.

Each builder returns the object together with the distance or error it
achieves and the bound it is supposed to meet; a violated bound raises
:class:`BoundViolation` because it can only mean a bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BoundViolation, EmptyTypicalSet, PreconditionViolated
from .oracles import apportion, optimal_coding_error
from .sources import Source, as_mixture
from .spectrum import ClassedDistribution, element_table, same_value_tol

CHECK_TOL = 1e-12


def default_gamma(n: int) -> float:
    """``n ** -1/4``: tends to 0 while ``sqrt(n) * gamma`` grows like ``n ** 1/4``."""
    return n ** -0.25


@dataclass(frozen=True)
class ResolvabilityMapping:
    """A map from ``{1..M}`` onto sequences, stored per class.

    ``units[j]`` lists ``(units per element, element count)`` pairs for the
    elements of class ``j`` that are hit; the other elements of the class get
    nothing.
    """

    M: int
    units: tuple

    def __post_init__(self):
        total = sum(u * c for pairs in self.units for u, c in pairs)
        if total != self.M:
            raise ValueError(f"mapping spends {total} units, not M={self.M}")

    def distance(self, classes: ClassedDistribution) -> float:
        """Variational distance between ``phi(U_M)`` and the class law."""
        if len(self.units) != len(classes):
            raise ValueError("mapping and classes disagree on the class count")
        terms = []
        log_m = math.log(self.M)
        for j, pairs in enumerate(self.units):
            c = classes.multiplicities[j]
            hit = sum(k for _, k in pairs)
            if hit > c:
                raise ValueError(f"class {j} has only {c} elements")
            x = math.exp(min(700.0, log_m - classes.values[j]))
            for u, k in pairs:
                terms.append((k / self.M) * abs(x - u))
            if hit < c:
                terms.append(classes.masses[j] * ((c - hit) / c))
        return math.fsum(terms)

    def support_counts(self) -> tuple:
        return tuple(sum(k for u, k in pairs if u > 0) for pairs in self.units)


@dataclass(frozen=True)
class FixedLengthCode:
    """Code keeping ``kept[j]`` elements of class ``j``; everything else is an error."""

    M: int
    kept: tuple

    def __post_init__(self):
        if sum(self.kept) > self.M:
            raise ValueError("a code cannot keep more than M sequences")

    def error(self, classes: ClassedDistribution) -> float:
        terms = []
        for j, k in enumerate(self.kept):
            c = classes.multiplicities[j]
            if k < c:
                terms.append(classes.masses[j] * ((c - k) / c))
        return math.fsum(terms)


@dataclass(frozen=True)
class Checked:
    """A constructed object with the value it achieves and the bound it meets."""

    obj: object
    achieved: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.achieved


def _assert_le(lhs, rhs, what):
    if lhs > rhs + CHECK_TOL:
        raise BoundViolation(f"{what}: {lhs!r} > {rhs!r}")


def _root_n(classes):
    return math.sqrt(classes.n)


def _at_most(values, threshold):
    return values <= threshold + same_value_tol(threshold)


def build_lemma1_mapping(classes: ClassedDistribution, M: int, z: float,
                         gamma: float) -> Checked:
    """Map ``U_M`` onto ``T(z) = {y : -log P(y) <= sqrt(n) z}`` by largest remainder.

    Requires ``z + gamma <= log(M)/sqrt(n)``; the achieved distance then stays
    below ``2 Pr{Y not in T(z)} + 2 exp(-sqrt(n) gamma)``.
    """
    if gamma <= 0:
        raise PreconditionViolated("gamma must be positive")
    rn = _root_n(classes)
    if z + gamma > math.log(M) / rn + CHECK_TOL:
        raise PreconditionViolated(
            f"z + gamma = {z + gamma!r} exceeds log(M)/sqrt(n) = {math.log(M) / rn!r}")
    keep = _at_most(classes.values, rn * z)
    if not keep.any():
        raise EmptyTypicalSet(f"no sequence has -log P <= sqrt(n) z = {rn * z!r}")
    plan = apportion(classes, M, keep=keep)
    outside = math.fsum(classes.masses[~keep])
    bound = 2.0 * outside + 2.0 * math.exp(-rn * gamma)
    _assert_le(plan.distance, bound, "typical-set mapping bound")
    return Checked(ResolvabilityMapping(M, plan.units), plan.distance, bound)


def lemma2_lower_bound(classes: ClassedDistribution, M: int, z: float, gamma: float) -> float:
    """Converse bound on the distance of any map of ``U_M`` (clamped at 0).

    ``2 Pr{Y not in T(z + gamma)} - 2 Pr{U_M in S(z)} - 2 exp(-sqrt(n) gamma)``,
    where ``Pr{U_M in S(z)}`` is 1 when ``z <= log(M)/sqrt(n)`` and 0 otherwise.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rn = _root_n(classes)
    outside = math.fsum(classes.masses[~_at_most(classes.values, rn * (z + gamma))])
    uniform_in_s = 1.0 if z <= math.log(M) / rn else 0.0
    return max(0.0, 2.0 * outside - 2.0 * uniform_in_s - 2.0 * math.exp(-rn * gamma))


def lemma3_bound(classes: ClassedDistribution, M: int) -> float:
    """``Pr{-log P(Y) >= log M}`` (boundary inclusive)."""
    log_m = math.log(M)
    return math.fsum(classes.masses[~(classes.values < log_m - same_value_tol(log_m))])


def lemma4_lower_bound(classes: ClassedDistribution, M: int, gamma: float) -> float:
    """``Pr{-log P(Y) >= log M + sqrt(n) gamma} - exp(-sqrt(n) gamma)``: any code errs at least this."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rn = _root_n(classes)
    t = math.log(M) + rn * gamma
    tail = math.fsum(classes.masses[~(classes.values < t - same_value_tol(t))])
    return tail - math.exp(-rn * gamma)


def build_lemma3_code(classes: ClassedDistribution, M: int) -> Checked:
    """Keep exactly the sequences with ``P(y) > 1/M`` (strict)."""
    log_m = math.log(M)
    keep = classes.values < log_m - same_value_tol(log_m)
    kept = tuple(c if k else 0 for c, k in zip(classes.multiplicities, keep))
    if sum(kept) >= M and sum(kept) > 0:
        raise BoundViolation(f"{sum(kept)} sequences have P > 1/M = 1/{M}")
    code = FixedLengthCode(M, kept)
    achieved = code.error(classes)
    bound = lemma3_bound(classes, M)
    _assert_le(achieved, bound, "threshold code bound")
    _assert_le(optimal_coding_error(classes, M).objective, achieved, "coding optimum")
    return Checked(code, achieved, bound)


def code_from_oracle(classes: ClassedDistribution, M: int) -> FixedLengthCode:
    """The optimal top-``M`` code as a :class:`FixedLengthCode`."""
    result = optimal_coding_error(classes, M)
    kept = [0] * len(classes)
    for j, k in result.allocation:
        kept[j] = k
    return FixedLengthCode(M, tuple(kept))


def _split_kept(classes, kept):
    """Classes with every partially kept class split in two (kept part first)."""
    values, mult, log_mult, owner, is_kept = [], [], [], [], []
    for j, (c, k) in enumerate(zip(classes.multiplicities, kept)):
        for part, flag in ((k, True), (c - k, False)):
            if part > 0:
                values.append(classes.values[j])
                mult.append(part)
                log_mult.append(classes.log_multiplicities[j] + math.log(part / c)
                                if part != c else classes.log_multiplicities[j])
                owner.append(j)
                is_kept.append(flag)
    split = ClassedDistribution(classes.n, np.array(values), tuple(mult), np.array(log_mult))
    return split, owner, np.array(is_kept)


def code_to_mapping(code: FixedLengthCode, classes: ClassedDistribution,
                    gamma: float) -> Checked:
    """Resolvability map onto the kept set with ``M' = ceil(M exp(sqrt(n) gamma))``.

    The distance is at most ``2 * error + 2 exp(-sqrt(n) gamma)``.
    """
    if gamma <= 0:
        raise PreconditionViolated("gamma must be positive")
    if not any(code.kept):
        raise EmptyTypicalSet("the code keeps no sequence")
    rn = _root_n(classes)
    big_m = math.ceil(Fraction(math.exp(rn * gamma)) * code.M)
    split, owner, is_kept = _split_kept(classes, code.kept)
    plan = apportion(split, big_m, keep=is_kept)
    units = [()] * len(classes)
    for s, j in enumerate(owner):
        if plan.units[s]:
            units[j] = units[j] + plan.units[s]
    mapping = ResolvabilityMapping(big_m, tuple(units))
    err = code.error(classes)
    bound = 2.0 * err + 2.0 * math.exp(-rn * gamma)
    _assert_le(plan.distance, bound, "code-to-mapping bound")
    return Checked(mapping, plan.distance, bound)


def mapping_to_code(mapping: ResolvabilityMapping, classes: ClassedDistribution) -> Checked:
    """Code keeping the image of the mapping; its error is at most half the distance."""
    code = FixedLengthCode(mapping.M, mapping.support_counts())
    err = code.error(classes)
    bound = 0.5 * mapping.distance(classes)
    _assert_le(err, bound, "mapping-to-code bound")
    return Checked(code, err, bound)


def oracle_mapping(classes: ClassedDistribution, M: int) -> ResolvabilityMapping:
    """The optimal largest-remainder mapping as a :class:`ResolvabilityMapping`."""
    plan = apportion(classes, M)
    return ResolvabilityMapping(M, plan.units)


# -- mixed-source spectrum inequalities ------------------------------------------


@dataclass(frozen=True)
class SpectrumInequality:
    """Both directions of the mixture-versus-component spectrum comparison for one component.

    ``mixed`` is ``Pr{-log P_{Y^n}(Y_i^n) >= sqrt(n) z}``; ``lower`` and
    ``upper`` are the component-tail expressions it must lie between.
    """

    component: int
    mixed: float
    lower: float
    upper: float

    @property
    def lower_margin(self) -> float:
        return self.mixed - self.lower

    @property
    def upper_margin(self) -> float:
        return self.upper - self.mixed

    @property
    def holds(self) -> bool:
        return self.lower_margin >= -CHECK_TOL and self.upper_margin >= -CHECK_TOL


def appendix_b_inequalities(source: Source, n: int, z: float, gamma: float,
                            table=None) -> tuple:
    """Evaluate, for every component ``i``,

    ``Pr{-log P(Y_i)/sqrt(n) >= z} >= Pr{-log P_i(Y_i)/sqrt(n) >= z + gamma} - exp(-sqrt(n) gamma)``
    and
    ``Pr{-log P(Y_i)/sqrt(n) >= z} <= Pr{-log P_i(Y_i)/sqrt(n) >= z - gamma}``

    exactly on the enumerated sequence groups.  The second direction needs
    ``gamma >= -log w(i) / sqrt(n)`` for every component.
    """
    if gamma <= 0:
        raise PreconditionViolated("gamma must be positive")
    mix = as_mixture(source)
    rn = math.sqrt(n)
    need = max(-math.log(w) for w in mix.weights) / rn
    if gamma < need - CHECK_TOL:
        raise PreconditionViolated(
            f"gamma={gamma!r} is below max_i -log w(i)/sqrt(n) = {need!r}; n is too small")
    if table is None:
        table = element_table(mix, n)
    mixed_v = table.neg_log_probs
    reports = []
    slack = math.exp(-rn * gamma)
    for i in range(len(mix.weights)):
        comp_v = -table.component_log_probs[i]
        with np.errstate(invalid="ignore"):
            prob = np.exp(table.log_multiplicities - comp_v)
        prob = np.where(np.isfinite(comp_v), prob, 0.0)

        def tail(values, t):
            hit = values >= t - same_value_tol(t)
            return math.fsum(prob[hit & np.isfinite(values)])

        mixed = tail(mixed_v, rn * z)
        lower = tail(comp_v, rn * (z + gamma)) - slack
        upper = tail(comp_v, rn * (z - gamma))
        reports.append(SpectrumInequality(i, mixed, lower, upper))
    return tuple(reports)

