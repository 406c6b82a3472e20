"""Information spectra: the law of the self-information -log P_{Y^n}(Y^n).

Exact spectra come from grouping the sequences of Y^n into probability
classes.  For i.i.d. components (and mixtures of them) the probability of a
sequence depends only on its composition, so classes are built from the
C(n+k-1, k-1) compositions with exact multinomial counts.  Markov sources are
enumerated sequence by sequence.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidDistribution, TooLarge
from .rates import q_tail
from .sources import IidSource, Source, SourceStatistics, as_mixture, sampled_neg_log_probs

COMPOSITION_LIMIT = 10_000_000
SEQUENCE_LIMIT = 10_000_000
MERGE_RTOL = 1e-12
MASS_TOL = 1e-9


def same_value_tol(value):
    """Tolerance under which two self-information values are one class."""
    return MERGE_RTOL * np.maximum(np.abs(value), 1.0)


@dataclass(frozen=True)
class ElementTable:
    """Per-group view of Y^n: each column is a set of equiprobable sequences.

    ``component_log_probs[i, g]`` is log P_{Y_i^n}(y) for any y in group g and
    ``multiplicities[g]`` is the exact group size (a tuple of Python ints, or
    an int64 array when every group is a single sequence).
    """

    n: int
    log_weights: np.ndarray
    component_log_probs: np.ndarray
    multiplicities: object
    log_multiplicities: np.ndarray

    @cached_property
    def neg_log_probs(self) -> np.ndarray:
        """Mixture self-information per element of each group."""
        with np.errstate(divide="ignore"):
            return -logsumexp(self.log_weights[:, None] + self.component_log_probs, axis=0)


def compositions(n: int, k: int) -> np.ndarray:
    """All count vectors of length ``k`` summing to ``n``, one per row."""
    rows = np.zeros((1, 0), dtype=np.int64)
    remaining = np.array([n], dtype=np.int64)
    for _ in range(k - 1):
        reps = remaining + 1
        parent = np.repeat(np.arange(len(rows)), reps)
        starts = np.cumsum(reps) - reps
        values = np.arange(reps.sum()) - np.repeat(starts, reps)
        rows = np.column_stack([rows[parent], values])
        remaining = remaining[parent] - values
    return np.column_stack([rows, remaining])


def _multinomial(n: int, counts) -> int:
    total = 1
    left = n
    for c in counts:
        total *= math.comb(left, int(c))
        left -= int(c)
    return total


def element_table(source: Source, n: int) -> ElementTable:
    """Exact grouped enumeration of Y^n; raises :class:`TooLarge` past the bounds."""
    if n < 1:
        raise ValueError("blocklength must be >= 1")
    mix = as_mixture(source)
    k = mix.alphabet_size
    log_w = np.log(mix.weights)
    if all(isinstance(s, IidSource) for s in mix.sources):
        count = math.comb(n + k - 1, k - 1)
        if count > COMPOSITION_LIMIT:
            raise TooLarge(f"{count} compositions exceed {COMPOSITION_LIMIT}")
        comps = compositions(n, k)
        logps = np.stack([s.pmf.log_array for s in mix.sources])
        with np.errstate(invalid="ignore"):
            terms = np.where(comps[None, :, :] > 0, comps[None, :, :] * logps[:, None, :], 0.0)
        comp_lp = terms.sum(axis=2)
        mult = tuple(_multinomial(n, row) for row in comps)
        log_mult = gammaln(n + 1.0) - gammaln(comps + 1.0).sum(axis=1)
        return ElementTable(n, log_w, comp_lp, mult, log_mult)
    if k**n > SEQUENCE_LIMIT:
        raise TooLarge(f"{k}^{n} sequences exceed {SEQUENCE_LIMIT}")
    comp_lp = []
    for s in mix.sources:
        if isinstance(s, IidSource):
            init, step = s.pmf.log_array, np.tile(s.pmf.log_array, (k, 1))
        else:
            init, step = s.start.log_array, s.log_matrix
        lp = np.array(init, dtype=float)
        for _ in range(n - 1):
            last = np.arange(lp.size) % k
            lp = (lp[:, None] + step[last]).ravel()
        comp_lp.append(lp)
    size = k**n
    return ElementTable(n, log_w, np.stack(comp_lp), np.ones(size, dtype=np.int64), np.zeros(size))


@dataclass(frozen=True)
class ClassedDistribution:
    """Probability classes of Y^n, sorted by self-information (most likely first).

    ``values[j]`` is -log P(y) for each of the ``multiplicities[j]`` elements of
    class j.  Classes built by :func:`exact_classes` have distinct values;
    hand-built ones (e.g. split classes) may repeat a value.
    """

    n: int
    values: np.ndarray
    multiplicities: tuple
    log_multiplicities: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) != len(self.multiplicities):
            raise InvalidDistribution("values and multiplicities differ in length")
        if len(values) == 0:
            raise InvalidDistribution("no classes")
        if np.any(np.diff(values) < 0):
            raise InvalidDistribution("class values must be sorted ascending")
        if any(int(m) < 1 for m in self.multiplicities):
            raise InvalidDistribution("multiplicities must be positive integers")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "multiplicities", tuple(int(m) for m in self.multiplicities))
        object.__setattr__(self, "log_multiplicities",
                           np.asarray(self.log_multiplicities, dtype=float))
        total = math.fsum(self.masses)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistribution(f"class masses sum to {total!r}")

    @cached_property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_multiplicities - self.values)

    @property
    def size(self) -> int:
        return sum(self.multiplicities)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_probabilities(cls, probs: Sequence[float], n: int = 1) -> "ClassedDistribution":
        """Classes of an explicit element pmf (zero-probability elements dropped)."""
        probs = np.asarray(probs, dtype=float)
        keep = probs > 0.0
        values = -np.log(probs[keep])
        count = int(keep.sum())
        return _merge(n, values, np.ones(count, dtype=np.int64), np.zeros(count))

    def split(self) -> "ClassedDistribution":
        """Same law with every class broken into multiplicity-1 classes."""
        reps = list(self.multiplicities)
        return ClassedDistribution(
            self.n, np.repeat(self.values, reps), (1,) * sum(reps), np.zeros(sum(reps)))

    def element_probabilities(self) -> np.ndarray:
        """Probabilities of every element, most likely first (small instances)."""
        return np.repeat(np.exp(-self.values), list(self.multiplicities))


def _merge(n, values, mult, log_mult) -> ClassedDistribution:
    order = np.argsort(values, kind="stable")
    values = np.asarray(values, dtype=float)[order]
    log_mult = np.asarray(log_mult, dtype=float)[order]
    new = np.ones(len(values), dtype=bool)
    new[1:] = np.diff(values) > same_value_tol(values[1:])
    starts = np.flatnonzero(new)
    group = np.cumsum(new) - 1
    top = np.maximum.reduceat(log_mult, starts)
    merged_lm = top + np.log(np.add.reduceat(np.exp(log_mult - top[group]), starts))
    if isinstance(mult, np.ndarray):
        merged_m = tuple(int(m) for m in np.add.reduceat(mult[order], starts))
    else:
        ordered = [mult[i] for i in order]
        ends = np.append(starts[1:], len(values))
        merged_m = tuple(sum(ordered[s:e]) for s, e in zip(starts, ends))
    return ClassedDistribution(n, values[starts], merged_m, merged_lm)


def exact_classes(source: Source, n: int) -> ClassedDistribution:
    """One class per distinct value of -log P_{Y^n}(y), with exact multiplicities."""
    table = element_table(source, n)
    values = table.neg_log_probs
    support = np.isfinite(values)
    idx = np.flatnonzero(support)
    if isinstance(table.multiplicities, np.ndarray):
        mult = table.multiplicities[idx]
    else:
        mult = [table.multiplicities[i] for i in idx]
    return _merge(n, values[idx], mult, table.log_multiplicities[idx])


# -- spectra ----------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumDistribution:
    """Atoms ``(value, mass)`` of the self-information at blocklength ``n``.

    ``kind`` is ``"exact"`` or ``"empirical"``; empirical spectra carry the
    sample count and integer ``counts`` so masses are exactly k/N.
    """

    n: int
    values: np.ndarray
    masses: np.ndarray
    kind: str = "exact"
    samples: int | None = None
    counts: tuple | None = None

    def __post_init__(self):
        if np.any(np.diff(self.values) <= 0):
            raise InvalidDistribution("spectrum values must be strictly increasing")
        if abs(math.fsum(self.masses) - 1.0) > MASS_TOL:
            raise InvalidDistribution("spectrum masses do not sum to 1")

    @cached_property
    def _upper(self) -> np.ndarray:
        # _upper[i] = mass of atoms i..end
        return np.append(np.cumsum(self.masses[::-1])[::-1], 0.0)

    @cached_property
    def _lower(self) -> np.ndarray:
        # _lower[i] = mass of atoms 0..i-1
        return np.concatenate([[0.0], np.cumsum(self.masses)])

    def mass_at_least(self, threshold):
        """Pr{-log P >= threshold}, boundary inclusive."""
        t = np.asarray(threshold, dtype=float)
        idx = np.searchsorted(self.values, t - same_value_tol(t), side="left")
        return self._upper[idx]

    def mass_at_most(self, threshold):
        """Pr{-log P <= threshold}, boundary inclusive."""
        t = np.asarray(threshold, dtype=float)
        idx = np.searchsorted(self.values, t + same_value_tol(t), side="right")
        return self._lower[idx]

    def cdf(self, x):
        return self._lower[np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["value_nats", "mass"])
            for v, m in zip(self.values, self.masses):
                writer.writerow([f"{v:.17g}", f"{m:.17g}"])


def spectrum_from_classes(classes: ClassedDistribution) -> SpectrumDistribution:
    merged = classes if _distinct(classes.values) else _merge(
        classes.n, classes.values, list(classes.multiplicities), classes.log_multiplicities)
    return SpectrumDistribution(merged.n, merged.values.copy(), merged.masses.copy())


def _distinct(values) -> bool:
    return bool(np.all(np.diff(values) > same_value_tol(values[1:])))


def mc_spectrum(source: Source, n: int, samples: int, seed: int) -> SpectrumDistribution:
    """Empirical spectrum of ``samples`` draws of -log P(Y^n)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    values = np.sort(sampled_neg_log_probs(source, n, samples, seed))
    new = np.ones(len(values), dtype=bool)
    new[1:] = np.diff(values) > same_value_tol(values[1:])
    starts = np.flatnonzero(new)
    counts = np.diff(np.append(starts, len(values)))
    return SpectrumDistribution(n, values[starts], counts / samples, "empirical",
                                samples, tuple(int(c) for c in counts))


def tail_F_a(spec: SpectrumDistribution, n: int, a: float, R):
    """Pr{(1/n)(-log P(Y^n)) >= a + R/sqrt(n)} at blocklength ``n``."""
    _check_n(spec, n)
    return spec.mass_at_least(n * a + math.sqrt(n) * np.asarray(R, dtype=float))


def tail_G_a(spec: SpectrumDistribution, n: int, a: float, R):
    """Pr{(1/n)(-log P(Y^n)) <= a + R/sqrt(n)} at blocklength ``n``."""
    _check_n(spec, n)
    return spec.mass_at_most(n * a + math.sqrt(n) * np.asarray(R, dtype=float))


def _check_n(spec, n):
    if spec.n != n:
        raise ValueError(f"spectrum is for n={spec.n}, not n={n}")


def _components(stats) -> list:
    comps = [(float(w), s) for w, s in stats]
    if any(s.varsigma < 0 for _, s in comps):
        raise ValueError("negative variance")
    return comps


def gaussian_tail_prediction(stats: Sequence, n: int, a: float, R):
    """Two-peak (multi-peak) normal approximation of :func:`tail_F_a`.

    ``stats`` holds ``(w(i), SourceStatistics_i)`` pairs; returns
    ``sum_i w(i) q_tail((sqrt(n)(a - H_i) + R) / sigma_i)`` with a zero-width
    component contributing 1, 1/2 or 0 as its argument is <0, =0 or >0.
    """
    R = np.asarray(R, dtype=float)
    total = np.zeros_like(R)
    root_n = math.sqrt(n)
    for w, s in _components(stats):
        x = root_n * (a - s.entropy) + R
        if s.varsigma > 0.0:
            total = total + w * q_tail(x / s.sigma)
        else:
            total = total + w * np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5))
    return total


def gaussian_lower_prediction(stats: Sequence, n: int, a: float, R):
    """Normal approximation of :func:`tail_G_a` (lower tail)."""
    return 1.0 - gaussian_tail_prediction(stats, n, a, R)


def ks_distance(p: SpectrumDistribution, q: SpectrumDistribution) -> float:
    """Kolmogorov-Smirnov distance between two spectra."""
    grid = np.union1d(p.values, q.values)
    return float(np.max(np.abs(p.cdf(grid) - q.cdf(grid))))
