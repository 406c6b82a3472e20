"""TOML run configuration.

Sources are described in a ``[source]`` table::

    [source]
    kind = "mixture"

    [[source.components]]
    weight = "0.5"
    kind = "iid"
    pmf = ["0.89", "0.11"]

    [[source.components]]
    weight = "0.5"
    kind = "markov"
    transition = [["0.75", "0.25"], ["0.25", "0.75"]]

Probabilities and weights must be decimal *strings*; each is parsed to the
nearest double exactly once, here.  ``kind = "quadrature"`` builds a
midpoint-rule mixture of Bernoulli sources (``lo``, ``hi``, ``nodes``).
Everything outside ``[source]`` is optional run settings for the CLI.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .sources import (
    IidSource,
    MarkovSource,
    Mixture,
    bernoulli,
    discretize_general_mixture,
    quadrature_nodes,
)


def decimal(value, where: str) -> float:
    if not isinstance(value, str):
        raise ConfigError(f"{where}: probabilities must be decimal strings, got {value!r}")
    try:
        parsed = Decimal(value.strip())
    except InvalidOperation as exc:
        raise ConfigError(f"{where}: {value!r} is not a decimal number") from exc
    if not parsed.is_finite():
        raise ConfigError(f"{where}: {value!r} is not finite")
    return float(parsed)


def _vector(values, where):
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where}: expected a non-empty list")
    return tuple(decimal(v, f"{where}[{i}]") for i, v in enumerate(values))


def _component(table: dict, where: str):
    kind = table.get("kind")
    if kind == "iid":
        if "pmf" not in table:
            raise ConfigError(f"{where}: iid source needs 'pmf'")
        return IidSource(_vector(table["pmf"], f"{where}.pmf"))
    if kind == "markov":
        rows = table.get("transition")
        if not isinstance(rows, list) or not rows:
            raise ConfigError(f"{where}: markov source needs 'transition'")
        matrix = tuple(_vector(r, f"{where}.transition[{i}]") for i, r in enumerate(rows))
        initial = table.get("initial")
        if initial is not None:
            initial = _vector(initial, f"{where}.initial")
        return MarkovSource(matrix, initial)
    raise ConfigError(f"{where}: unknown kind {kind!r}")


def source_from_table(table: dict):
    if not isinstance(table, dict):
        raise ConfigError("[source] must be a table")
    kind = table.get("kind")
    if kind in ("iid", "markov"):
        return _component(table, "source")
    if kind == "mixture":
        comps = table.get("components")
        if not isinstance(comps, list) or not comps:
            raise ConfigError("source: mixture needs [[source.components]]")
        pairs = []
        for i, comp in enumerate(comps):
            where = f"source.components[{i}]"
            pairs.append((decimal(comp.get("weight"), f"{where}.weight"), _component(comp, where)))
        return Mixture(pairs)
    if kind == "quadrature":
        if table.get("family", "bernoulli") != "bernoulli":
            raise ConfigError("source: only the bernoulli quadrature family is supported")
        lo = decimal(table.get("lo"), "source.lo")
        hi = decimal(table.get("hi"), "source.hi")
        count = table.get("nodes")
        if not isinstance(count, int) or count < 1:
            raise ConfigError("source: 'nodes' must be a positive integer")
        return discretize_general_mixture(quadrature_nodes(bernoulli, lo, hi, count))
    raise ConfigError(f"source: unknown kind {kind!r}")


@dataclass
class RunConfig:
    source: object
    settings: dict = field(default_factory=dict)
    raw: bytes = b""


def parse_config(data: bytes) -> RunConfig:
    try:
        doc = tomllib.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    if "source" not in doc:
        raise ConfigError("configuration has no [source] table")
    settings = {k: v for k, v in doc.items() if k != "source"}
    return RunConfig(source_from_table(doc["source"]), settings, data)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(data)
