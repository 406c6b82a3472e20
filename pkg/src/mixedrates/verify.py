"""Cross-module invariant checks run by ``mixedrates verify``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .constructions import (
    appendix_b_inequalities,
    build_lemma1_mapping,
    build_lemma3_code,
    code_from_oracle,
    code_to_mapping,
    default_gamma,
    lemma2_lower_bound,
    lemma4_lower_bound,
    mapping_to_code,
    oracle_mapping,
)
from .errors import MixedRatesError, PreconditionViolated
from .oracles import (
    min_code_size,
    min_resolvability_size,
    optimal_coding_error,
    optimal_resolvability_distance,
)
from .rates import coding_second_order, resolvability_second_order
from .sources import IidSource, Mixture, component_statistics
from .spectrum import exact_classes

TOL = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    n: int
    passed: bool
    margin: float
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _check(name, n, margin, detail=""):
    return Check(name, n, bool(margin >= -TOL), float(margin), detail)


def _failed(name, n, exc):
    return Check(name, n, False, float("nan"), f"{type(exc).__name__}: {exc}")


def _checks_at(source, n, delta, epsilon):
    out = []
    classes = exact_classes(source, n)
    rn = math.sqrt(n)
    gamma = default_gamma(n)
    out.append(_check("class-masses-sum-to-one", n,
                      1e-9 - abs(math.fsum(classes.masses) - 1.0)))

    m_res = min_resolvability_size(classes, delta)
    # the typical set must be non-empty: at small n that needs M above m_res
    m_map = max(m_res, math.ceil(math.exp(classes.values[0] + rn * gamma) * (1 + 1e-9)))
    oracle_d = optimal_resolvability_distance(classes, m_map, with_units=False).objective
    z = math.log(m_map) / rn - gamma
    try:
        built = build_lemma1_mapping(classes, m_map, z, gamma)
        out.append(_check("typical-set-mapping-sandwich", n,
                          min(built.achieved - oracle_d, built.margin),
                          f"oracle={oracle_d!r} built={built.achieved!r} bound={built.bound!r}"))
    except MixedRatesError as exc:
        out.append(_failed("typical-set-mapping-sandwich", n, exc))

    worst = math.inf
    for m in sorted({1, max(1, m_res // 2), m_res, 2 * m_res}):
        d = optimal_resolvability_distance(classes, m, with_units=False).objective
        for zz in np.linspace(0.0, 2.0 * math.log(2 * m_res + 1) / rn + 1.0, 12):
            for g in (0.1 * gamma, gamma, 3.0 * gamma):
                worst = min(worst, d - lemma2_lower_bound(classes, m, float(zz), g))
    out.append(_check("resolvability-converse", n, worst))

    m_code = min_code_size(classes, epsilon)
    try:
        code = build_lemma3_code(classes, m_code)
        out.append(_check("threshold-code", n, code.margin))
    except MixedRatesError as exc:
        out.append(_failed("threshold-code", n, exc))
    worst = math.inf
    for m in sorted({1, m_code, 2 * m_code}):
        err = optimal_coding_error(classes, m).objective
        for g in (0.1 * gamma, gamma, 3.0 * gamma):
            worst = min(worst, err - lemma4_lower_bound(classes, m, g))
    out.append(_check("coding-converse", n, worst))

    try:
        mapped = code_to_mapping(code_from_oracle(classes, m_code), classes, gamma)
        out.append(_check("code-to-mapping", n, mapped.margin))
        back = mapping_to_code(oracle_mapping(classes, m_res), classes)
        out.append(_check("mapping-to-code", n, back.margin))
    except MixedRatesError as exc:
        out.append(_failed("code-mapping-transforms", n, exc))

    try:
        worst_lo = worst_hi = math.inf
        for zz in np.linspace(0.0, 1.5 * max(classes.values) / rn + 0.1, 16):
            for rep in appendix_b_inequalities(source, n, float(zz), gamma):
                worst_lo = min(worst_lo, rep.lower_margin)
                worst_hi = min(worst_hi, rep.upper_margin)
        out.append(_check("mixture-spectrum-lower", n, worst_lo))
        out.append(_check("mixture-spectrum-upper", n, worst_hi))
    except PreconditionViolated as exc:
        out.append(Check("mixture-spectrum", n, True, float("nan"), f"skipped: {exc}"))
    return out


def _duality_checks(source, epsilon):
    out = []
    for w, s in component_statistics(source):
        a = s.entropy
        try:
            lhs = coding_second_order(source, a, epsilon)
            rhs = resolvability_second_order(source, a, 2.0 * epsilon)
            same = lhs.b == rhs.b and lhs.case_label == rhs.case_label
            out.append(Check("coding-resolvability-duality", 0, same, 0.0 if same else -1.0,
                             f"a={a!r}"))
        except MixedRatesError as exc:
            out.append(Check("coding-resolvability-duality", 0, True, float("nan"),
                             f"a={a!r} not admissible: {exc}"))
    return out


def run_checks(source, n_values=(4, 8, 12), delta: float = 0.6, epsilon: float = 0.3) -> list:
    checks = _duality_checks(source, epsilon)
    for n in n_values:
        checks.extend(_checks_at(source, int(n), delta, epsilon))
    return checks


def random_mixture(rng: np.random.Generator, alphabet: int = 2, components: int = 2) -> Mixture:
    """A mixture of i.i.d. sources with Dirichlet pmfs and weights bounded away from 0."""
    weights = rng.dirichlet(np.full(components, 2.0)) * 0.8 + 0.2 / components
    weights = weights / weights.sum()
    weights[-1] = 1.0 - weights[:-1].sum()
    comps = []
    for w in weights:
        pmf = rng.dirichlet(np.ones(alphabet)) * 0.9 + 0.1 / alphabet
        pmf[-1] = 1.0 - pmf[:-1].sum()
        comps.append((float(w), IidSource(tuple(float(p) for p in pmf))))
    return Mixture(comps)
