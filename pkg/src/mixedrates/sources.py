"""Source models: i.i.d., first-order Markov, and blocklength-level mixtures.

All logarithms are natural, so entropies are in nats per symbol and
self-information variances in nats squared per symbol.

A mixture is a convex combination of the *n-letter* laws,
``P(y^n) = sum_i w(i) P_i(y^n)``: the component is drawn once per sequence,
never per symbol.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .errors import (
    EmptyNodeSet,
    InvalidDistribution,
    NonIrreducible,
    ZeroProbability,
)

SUM_TOL = 1e-12
STATIONARY_RESIDUAL = 1e-12
DENSE_SOLVE_LIMIT = 64
TAIL_TOL = 1e-12


def _as_float_tuple(values) -> tuple:
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise InvalidDistribution(f"not a sequence of reals: {values!r}") from exc


@dataclass(frozen=True)
class ProbabilityVector:
    """Finite pmf over the alphabet ``{0, ..., len(masses) - 1}``."""

    masses: tuple

    def __post_init__(self):
        masses = _as_float_tuple(self.masses)
        if not masses:
            raise InvalidDistribution("empty probability vector")
        if any(not math.isfinite(m) or m < 0.0 for m in masses):
            raise InvalidDistribution(f"masses must be finite and >= 0: {masses}")
        total = math.fsum(masses)
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"masses sum to {total!r}, not 1")
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return len(self.masses)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.masses, dtype=float)
        arr.flags.writeable = False
        return arr

    @cached_property
    def log_array(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            arr = np.log(self.array)
        arr.flags.writeable = False
        return arr


def _pmf(value) -> ProbabilityVector:
    return value if isinstance(value, ProbabilityVector) else ProbabilityVector(tuple(value))


@dataclass(frozen=True)
class IidSource:
    pmf: ProbabilityVector

    def __post_init__(self):
        object.__setattr__(self, "pmf", _pmf(self.pmf))

    @property
    def alphabet_size(self) -> int:
        return len(self.pmf)


def bernoulli(p: float) -> IidSource:
    """I.i.d. binary source with ``P(1) = p``."""
    return IidSource(ProbabilityVector((1.0 - p, p)))


def _reachable(adj: np.ndarray, start: int) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        j = queue.popleft()
        for k in np.flatnonzero(adj[j]):
            k = int(k)
            if k not in seen:
                seen.add(k)
                queue.append(k)
    return seen


@dataclass(frozen=True)
class MarkovSource:
    """Stationary-start (by default) first-order Markov chain.

    ``transition[j][k]`` is Q(k|j): row j is the current symbol.
    """

    transition: tuple
    initial: ProbabilityVector | None = None

    def __post_init__(self):
        try:
            rows = tuple(_pmf(row) for row in self.transition)
        except InvalidDistribution as exc:
            raise InvalidDistribution(f"transition row is not a pmf: {exc}") from exc
        k = len(rows)
        if k == 0 or any(len(r) != k for r in rows):
            raise InvalidDistribution("transition matrix must be square")
        object.__setattr__(self, "transition", tuple(r.masses for r in rows))
        adj = self.matrix > 0.0
        if len(_reachable(adj, 0)) != k or len(_reachable(adj.T, 0)) != k:
            raise NonIrreducible("transition graph is not strongly connected")
        if self.initial is not None:
            init = _pmf(self.initial)
            if len(init) != k:
                raise InvalidDistribution("initial distribution has the wrong length")
            object.__setattr__(self, "initial", init)

    @property
    def alphabet_size(self) -> int:
        return len(self.transition)

    @cached_property
    def matrix(self) -> np.ndarray:
        arr = np.array(self.transition, dtype=float)
        arr.flags.writeable = False
        return arr

    @cached_property
    def log_matrix(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            arr = np.log(self.matrix)
        arr.flags.writeable = False
        return arr

    @cached_property
    def start(self) -> ProbabilityVector:
        return self.initial if self.initial is not None else markov_stationary(self)


Component = Union[IidSource, MarkovSource]


@dataclass(frozen=True)
class Mixture:
    """``components`` is a sequence of ``(weight, source)`` pairs.

    Zero-weight components are dropped; nested mixtures are flattened.
    """

    components: tuple

    def __post_init__(self):
        flat = []
        for weight, source in self.components:
            weight = float(weight)
            if not math.isfinite(weight) or weight < 0.0:
                raise InvalidDistribution(f"mixture weight {weight!r} is negative")
            if isinstance(source, Mixture):
                flat.extend((weight * w, s) for w, s in source.components)
            elif isinstance(source, (IidSource, MarkovSource)):
                flat.append((weight, source))
            else:
                raise InvalidDistribution(f"unsupported component {source!r}")
        total = math.fsum(w for w, _ in flat)
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"mixture weights sum to {total!r}, not 1")
        flat = [(w, s) for w, s in flat if w > 0.0]
        sizes = {s.alphabet_size for _, s in flat}
        if len(sizes) != 1:
            raise InvalidDistribution("mixture components do not share one alphabet")
        object.__setattr__(self, "components", tuple(flat))

    @property
    def alphabet_size(self) -> int:
        return self.components[0][1].alphabet_size

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def sources(self) -> tuple:
        return tuple(s for _, s in self.components)


Source = Union[IidSource, MarkovSource, Mixture]


def as_mixture(source: Source) -> Mixture:
    """View any source as a mixture (a pure source gets weight 1)."""
    if isinstance(source, Mixture):
        return source
    return Mixture(((1.0, source),))


@dataclass(frozen=True)
class SourceStatistics:
    """Entropy (rate) in nats and self-information variance in nats^2."""

    entropy: float
    varsigma: float

    def __post_init__(self):
        if self.entropy < 0.0 or self.varsigma < 0.0:
            raise InvalidDistribution(f"negative statistics: {self}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.varsigma)


def _clip_small_negative(x: float, scale: float) -> float:
    return 0.0 if -1e-14 * max(1.0, scale) < x < 0.0 else x


def iid_statistics(source: IidSource | ProbabilityVector) -> SourceStatistics:
    pmf = source.pmf if isinstance(source, IidSource) else _pmf(source)
    p = pmf.array
    pos = p > 0.0
    info = -pmf.log_array[pos]
    h = math.fsum(p[pos] * info)
    var = math.fsum(p[pos] * (info - h) ** 2)
    return SourceStatistics(_clip_small_negative(h, 1.0), var)


def markov_stationary(source: MarkovSource) -> ProbabilityVector:
    """Stationary distribution pi with pi Q = pi."""
    q = source.matrix
    k = q.shape[0]
    if k == 1:
        return ProbabilityVector((1.0,))
    if k <= DENSE_SOLVE_LIMIT:
        a = np.vstack([q.T - np.eye(k), np.ones((1, k))])
        b = np.zeros(k + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(a, b, rcond=None)[0]
    else:
        # lazy chain: same stationary law, aperiodic
        lazy = 0.5 * (q + np.eye(k))
        pi = np.full(k, 1.0 / k)
        for _ in range(1_000_000):
            nxt = pi @ lazy
            if np.abs(nxt - pi).sum() <= STATIONARY_RESIDUAL * 1e-2:
                pi = nxt
                break
            pi = nxt
    pi = np.clip(pi, 0.0, None)
    pi = pi / math.fsum(pi)
    residual = np.abs(pi @ q - pi).max()
    if residual > STATIONARY_RESIDUAL:
        raise NonIrreducible(f"stationary solve did not converge (residual {residual:.3g})")
    return ProbabilityVector(tuple(pi))


def _markov_pieces(source: MarkovSource):
    q = source.matrix
    pi = markov_stationary(source).array
    pos = q > 0.0
    info = np.where(pos, -np.where(pos, source.log_matrix, 0.0), 0.0)
    joint = pi[:, None] * q
    h = math.fsum((joint * info).ravel())
    return q, pi, pos, info, joint, h


def markov_statistics(source: MarkovSource) -> SourceStatistics:
    """Entropy rate and the per-step-plus-lag-1 self-information variance.

    The variance is ``sum pi(j)Q(k|j)(l_jk - H)^2 + 2 sum pi(j)Q(k|j)Q(l|k)
    (l_kl - H)(l_jk - H)`` with ``l_jk = -log Q(k|j)``; covariances at lags
    beyond one are not included (see :func:`markov_clt_variance`).
    """
    q, pi, pos, info, joint, h = _markov_pieces(source)
    centered = np.where(pos, info - h, 0.0)
    per_step = math.fsum((joint * centered**2).ravel())
    inflow = (joint * centered).sum(axis=0)  # indexed by the middle state k
    outflow = (q * centered).sum(axis=1)
    lag1 = math.fsum(inflow * outflow)
    var = _clip_small_negative(per_step + 2.0 * lag1, per_step)
    return SourceStatistics(_clip_small_negative(h, 1.0), var)


def markov_clt_variance(source: MarkovSource) -> float:
    """Full asymptotic variance of -log P(Y^n)/sqrt(n), all lags included.

    Solves the Poisson equation of the pair chain; used to audit how much the
    lag-1 truncation in :func:`markov_statistics` leaves out.
    """
    q, pi, pos, info, joint, h = _markov_pieces(source)
    k = q.shape[0]
    # f(j) = E[l(Y_t, Y_{t+1}) - H | Y_t = j]; sum of covariances via fundamental matrix
    f = (q * np.where(pos, info - h, 0.0)).sum(axis=1)
    fundamental = np.linalg.inv(np.eye(k) - q + np.outer(np.ones(k), pi))
    g = fundamental @ f  # solves (I - Q) g = f - pi.f, pi.f = 0
    centered = np.where(pos, info - h, 0.0)
    per_step = float((joint * centered**2).sum())
    # 2 sum_{t>=1} Cov(X_0, X_t) = 2 sum_k (sum_j pi_j Q_jk c_jk) g(k)
    cross = float(((joint * centered).sum(axis=0) * g).sum())
    return max(per_step + 2.0 * cross, 0.0)


def statistics(source: IidSource | MarkovSource) -> SourceStatistics:
    if isinstance(source, IidSource):
        return iid_statistics(source)
    if isinstance(source, MarkovSource):
        return markov_statistics(source)
    raise TypeError(f"statistics are defined per component, got {type(source).__name__}")


def component_statistics(source: Source) -> tuple:
    """``((w(i), SourceStatistics_i), ...)`` for the components of ``source``."""
    return tuple((w, statistics(s)) for w, s in as_mixture(source).components)


# -- sequence probabilities --------------------------------------------------


def _component_log_probs(source: Component, ys: np.ndarray) -> np.ndarray:
    """log P(y^n) for each row of ``ys`` (shape count x n)."""
    if isinstance(source, IidSource):
        logp = source.pmf.log_array
        out = np.zeros(ys.shape[0])
        for symbol in range(len(logp)):
            counts = (ys == symbol).sum(axis=1)
            with np.errstate(invalid="ignore"):
                term = np.where(counts > 0, counts * logp[symbol], 0.0)
            out += term
        return out
    logq = source.log_matrix
    out = source.start.log_array[ys[:, 0]].copy()
    if ys.shape[1] > 1:
        out += logq[ys[:, :-1], ys[:, 1:]].sum(axis=1)
    return out


def log_probs(source: Source, ys) -> np.ndarray:
    """log P_{Y^n}(y) for a batch of sequences; ``-inf`` where P = 0."""
    ys = np.atleast_2d(np.asarray(ys, dtype=np.int64))
    mix = as_mixture(source)
    if ys.min(initial=0) < 0 or ys.max(initial=0) >= mix.alphabet_size:
        raise InvalidDistribution("sequence contains symbols outside the alphabet")
    if len(mix.components) == 1:
        return _component_log_probs(mix.components[0][1], ys)
    stacked = np.stack(
        [math.log(w) + _component_log_probs(s, ys) for w, s in mix.components]
    )
    with np.errstate(divide="ignore"):
        return logsumexp(stacked, axis=0)


def sequence_neg_log_prob(source: Source, y: Sequence[int], allow_zero: bool = False) -> float:
    """-log P_{Y^n}(y) in nats.

    Raises :class:`ZeroProbability` when P(y) = 0 unless ``allow_zero``, in which
    case ``math.inf`` is returned.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or y.size == 0:
        raise InvalidDistribution("need a non-empty 1-d symbol sequence")
    value = -float(log_probs(source, y[None, :])[0])
    if math.isinf(value):
        if allow_zero:
            return math.inf
        raise ZeroProbability(f"sequence {y.tolist()} has probability zero")
    return value


# -- sampling ---------------------------------------------------------------

_COMPONENT_STREAM = 0x6D697874  # distinct entropy word for the component draw


def _generators(seed: int):
    seed = int(seed) & (2**64 - 1)
    return np.random.default_rng(seed), np.random.default_rng([seed, _COMPONENT_STREAM])


def _draw_component(source: Component, n: int, count: int, rng) -> np.ndarray:
    k = source.alphabet_size
    if isinstance(source, IidSource):
        return rng.choice(k, size=(count, n), p=source.pmf.array).astype(np.int64)
    cum = np.cumsum(source.matrix, axis=1)
    out = np.empty((count, n), dtype=np.int64)
    out[:, 0] = rng.choice(k, size=count, p=source.start.array)
    for t in range(1, n):
        u = rng.random(count)
        nxt = (cum[out[:, t - 1]] <= u[:, None]).sum(axis=1)
        out[:, t] = np.minimum(nxt, k - 1)
    return out


def _draw(source: Source, n: int, count: int, rng, comp_rng) -> np.ndarray:
    mix = as_mixture(source)
    if len(mix.components) == 1:
        return _draw_component(mix.components[0][1], n, count, rng)
    labels = comp_rng.choice(len(mix.components), size=count, p=mix.weights)
    out = np.empty((count, n), dtype=np.int64)
    for i, (_, comp) in enumerate(mix.components):
        rows = np.flatnonzero(labels == i)
        if rows.size:
            out[rows] = _draw_component(comp, n, rows.size, rng)
    return out


def sample_many(source: Source, n: int, count: int, seed: int) -> np.ndarray:
    """``count`` independent length-``n`` sequences; deterministic in ``seed``."""
    if n < 1 or count < 1:
        raise ValueError("n and count must be >= 1")
    rng, comp_rng = _generators(seed)
    return _draw(source, n, count, rng, comp_rng)


def sample(source: Source, n: int, seed: int) -> np.ndarray:
    return sample_many(source, n, 1, seed)[0]


def sampled_neg_log_probs(source: Source, n: int, count: int, seed: int,
                          chunk: int = 1 << 16) -> np.ndarray:
    """-log P(Y^n) for ``count`` sampled sequences, generated in chunks."""
    rng, comp_rng = _generators(seed)
    out = np.empty(count)
    for start in range(0, count, chunk):
        size = min(chunk, count - start)
        ys = _draw(source, n, size, rng, comp_rng)
        out[start:start + size] = -log_probs(source, ys)
    return out


# -- countable alphabets and continuous mixtures -------------------------------


def truncate_pmf(mass: Callable[[int], float], tail_tol: float = TAIL_TOL,
                 max_support: int = 1_000_000) -> ProbabilityVector:
    """Finite pmf from a pmf on {0, 1, 2, ...}.

    Symbols are kept until the remaining tail mass is at most ``tail_tol``;
    the tail is folded into the last kept symbol.
    """
    masses = []
    for k in range(max_support):
        masses.append(float(mass(k)))
        tail = 1.0 - math.fsum(masses)
        if tail <= tail_tol:
            masses[-1] += max(tail, 0.0)
            scale = math.fsum(masses)
            return ProbabilityVector(tuple(m / scale for m in masses))
    raise InvalidDistribution(f"tail mass still above {tail_tol} after {max_support} symbols")


def geometric(p: float, tail_tol: float = TAIL_TOL) -> IidSource:
    """I.i.d. geometric source ``P(k) = p (1-p)^k`` on {0, 1, ...}, truncated."""
    return IidSource(truncate_pmf(lambda k: p * (1.0 - p) ** k, tail_tol))


def discretize_general_mixture(nodes: Iterable) -> Mixture:
    """Finite mixture from ``(component, weight)`` quadrature nodes."""
    nodes = list(nodes)
    if not nodes:
        raise EmptyNodeSet("no quadrature nodes")
    total = math.fsum(float(w) for _, w in nodes)
    if not total > 0.0:
        raise EmptyNodeSet("node weights do not sum to a positive value")
    return Mixture(tuple((float(w) / total, comp) for comp, w in nodes))


def quadrature_nodes(family: Callable[[float], Component], lo: float, hi: float,
                     count: int, density: Callable[[float], float] | None = None) -> list:
    """Midpoint-rule nodes ``(family(theta), weight)`` for a density on [lo, hi]."""
    if count < 1:
        raise EmptyNodeSet("need at least one node")
    width = (hi - lo) / count
    thetas = [lo + (i + 0.5) * width for i in range(count)]
    dens = density or (lambda _: 1.0)
    return [(family(t), dens(t) * width) for t in thetas]


def enumerable(source: Source, n: int, limit: int = 2_000_000) -> bool:
    """True when ``n * |alphabet|**n`` is within ``limit``."""
    return n * as_mixture(source).alphabet_size ** n <= limit


def all_sequences(alphabet_size: int, n: int) -> np.ndarray:
    """Every sequence of length ``n`` in lexicographic order (rows)."""
    grids = np.indices((alphabet_size,) * n).reshape(n, -1).T
    return grids.astype(np.int64)

