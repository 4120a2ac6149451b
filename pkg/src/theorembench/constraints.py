"""Constraint grammar and deterministic parameter sampling.

The grammar is deliberately tiny. Three shapes parse; everything else
raises UnparseableConstraint rather than guessing:

* membership: ``VAR in [v1, v2, ...]`` (the word ``in``), a finite pool;
* interval: ``VAR ∈ [lo, hi]`` / ``VAR \\in [lo, hi]`` (the math symbol,
  exactly two integer endpoints), or a chained comparison ``lo < VAR <= hi``;
* predicate: the word ``prime`` anywhere conjoins a primality predicate
  onto the membership/interval found in the same text.

The membership/interval split follows the source texts: set-builder
brackets after the math symbol denote a range, after the plain word they
enumerate a pool. Intervals are integer-valued; real intervals are out
of scope and fail to parse.

Sampling is a pure function of (template_id, seed, index): each binding
draws from a splitmix64 stream keyed by a hash of those three values, so
regenerating index k never depends on other indices.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .templates import MetaTemplate

Number = Union[int, Fraction]


class ConstraintError(Exception):
    """Base class for constraint parsing and sampling failures."""


class UnparseableConstraint(ConstraintError):
    pass


class UnsatisfiableConstraint(ConstraintError):
    pass


class EmptyDomain(ConstraintError):
    pass


class UnknownVariable(ConstraintError):
    pass


@dataclass(frozen=True)
class Membership:
    values: tuple[Number, ...]

    def contains(self, value: Number) -> bool:
        return value in self.values


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int
    integer_only: bool = True

    def contains(self, value: Number) -> bool:
        if self.integer_only and not (isinstance(value, int) or value.denominator == 1):
            return False
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class PredicateConj:
    predicates: tuple[str, ...]
    base: Membership | Interval

    def contains(self, value: Number) -> bool:
        if not self.base.contains(value):
            return False
        for predicate in self.predicates:
            if predicate == "prime":
                if not (isinstance(value, int) or value.denominator == 1):
                    return False
                if not is_prime(int(value)):
                    return False
            else:  # unreachable while "prime" is the only predicate
                raise UnparseableConstraint(f"unknown predicate {predicate!r}")
        return True


ConstraintExpr = Union[Membership, Interval, PredicateConj]


@dataclass(frozen=True)
class ParamBinding:
    assignments: Mapping[str, Number]
    seed: int
    template_id: str
    index: int = 0

    def key(self) -> tuple:
        return tuple(sorted(self.assignments.items()))


@dataclass
class SamplerConfig:
    seed: int
    instances_per_template: int = 10
    max_rejections: int = 10_000


# --- primality -------------------------------------------------------------

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)  # deterministic below 3.3e24


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n == p:
            return True
        if n % p == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# --- keyed deterministic stream ---------------------------------------------

_MASK64 = (1 << 64) - 1


class KeyedStream:
    """splitmix64 stream seeded from a hash of arbitrary key parts."""

    def __init__(self, *key_parts: object):
        material = "\x1f".join(str(p) for p in key_parts).encode("utf-8")
        self._state = int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform draw in [0, n) by bounded rejection, no modulo bias."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (_MASK64 + 1) - (_MASK64 + 1) % n
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n


def splitmix64_sequence(seed: int, count: int) -> list[int]:
    """Raw splitmix64 outputs from an integer state; exposed for auditing."""
    state = seed & _MASK64
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


# --- parsing ----------------------------------------------------------------

_BRACKET_RE = re.compile(
    r"(?P<var>[A-Za-z_][A-Za-z0-9_]*)?\s*(?P<op>\bin\b|∈|\\in)\s*\$?\s*\[(?P<body>[^\]]*)\]",
)
_CHAIN_RE = re.compile(
    r"(?P<lo>-?\d+)\s*(?P<lop><=|<|≤)\s*(?P<var>[A-Za-z_][A-Za-z0-9_]*)\s*(?P<rop><=|<|≤)\s*(?P<hi>-?\d+)"
)


def _parse_number(text: str) -> Number:
    text = text.strip()
    if not text:
        raise UnparseableConstraint("empty value in list")
    try:
        if re.fullmatch(r"-?\d+", text):
            return int(text)
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UnparseableConstraint(f"bad numeric value {text!r}") from exc


def _as_int_endpoint(value: Number, text: str) -> int:
    if isinstance(value, Fraction):
        raise UnparseableConstraint(f"interval endpoints must be integers, got {text!r}")
    return value


def parse_constraint(text: str) -> ConstraintExpr:
    """Parse one constraint text into a ConstraintExpr, or raise.

    Examples: ``"n in [5, 7, 11, 13]"`` is a four-value pool;
    ``"n is a prime number, with n \\in [5, 400]"`` is primality over the
    integer interval [5, 400]; ``"5 <= k < 20"`` is an interval.
    """
    if not isinstance(text, str) or not text.strip():
        raise UnparseableConstraint("empty constraint text")

    predicates: tuple[str, ...] = ()
    if re.search(r"\bprimes?\b", text, flags=re.IGNORECASE):
        predicates = ("prime",)

    base: Membership | Interval | None = None
    bracket = _BRACKET_RE.search(text)
    if bracket:
        values = [_parse_number(v) for v in bracket.group("body").split(",") if v.strip()]
        if not values:
            raise UnparseableConstraint(f"empty bracket list in {text!r}")
        symbol_form = bracket.group("op") != "in"
        if symbol_form and len(values) == 2:
            lo = _as_int_endpoint(values[0], text)
            hi = _as_int_endpoint(values[1], text)
            if lo > hi:
                raise UnparseableConstraint(f"interval [{lo}, {hi}] is empty")
            base = Interval(lo, hi)
        else:
            deduped: list[Number] = []
            for v in values:
                if v not in deduped:
                    deduped.append(v)
            base = Membership(tuple(deduped))
    else:
        chain = _CHAIN_RE.search(text)
        if chain:
            lo = int(chain.group("lo")) + (1 if chain.group("lop") == "<" else 0)
            hi = int(chain.group("hi")) - (1 if chain.group("rop") == "<" else 0)
            if lo > hi:
                raise UnparseableConstraint(f"interval in {text!r} is empty")
            base = Interval(lo, hi)

    if base is None:
        raise UnparseableConstraint(f"unsupported constraint text: {text!r}")
    if predicates:
        return PredicateConj(predicates, base)
    return base


_RULE_VAR_RE = re.compile(r"^\s*\$?\s*(?P<var>[A-Za-z_][A-Za-z0-9_]*)\b")


def rule_variable(rule_text: str) -> str | None:
    """Leading variable token of a param_check rule, if any."""
    m = _RULE_VAR_RE.match(rule_text)
    return m.group("var") if m else None


def effective_constraints(t: MetaTemplate) -> dict[str, list[ConstraintExpr]]:
    """Conjunction of declared constraint and param_check pools, per variable.

    param_check rules that name an undeclared variable raise
    UnknownVariable; rules that fail to parse are skipped here (they are
    surfaced by validate_template and by rule application).
    """
    table: dict[str, list[ConstraintExpr]] = {}
    declared = {p.var_name for p in t.param_definitions}
    for p in t.param_definitions:
        table[p.var_name] = [parse_constraint(p.var_constraint)]
    for r in t.rules_of_kind("param_check"):
        var = rule_variable(r.rule)
        if var is None:
            continue
        if var not in declared:
            raise UnknownVariable(f"param_check rule names undeclared variable {var!r}")
        try:
            table[var].append(parse_constraint(r.rule))
        except UnparseableConstraint:
            continue
    return table


def _satisfies_all(value: Number, conjuncts: Sequence[ConstraintExpr]) -> bool:
    return all(c.contains(value) for c in conjuncts)


def param_violations(b: ParamBinding, t: MetaTemplate) -> list[str]:
    """Human-readable descriptions of every constraint the binding breaks."""
    table = effective_constraints(t)
    violations = []
    for name, value in sorted(b.assignments.items()):
        if name not in table:
            raise UnknownVariable(f"binding assigns undeclared variable {name!r}")
        for conjunct in table[name]:
            if not conjunct.contains(value):
                violations.append(f"{name}={value} violates {conjunct}")
    return violations


def check_params(b: ParamBinding, t: MetaTemplate) -> bool:
    return not param_violations(b, t)


def _sampling_domain(conjuncts: Sequence[ConstraintExpr]) -> Membership | Interval:
    """Primary domain to draw from: an explicit pool wins over an interval."""
    flattened: list[Membership | Interval] = []
    for c in conjuncts:
        flattened.append(c.base if isinstance(c, PredicateConj) else c)
    for expr in flattened:
        if isinstance(expr, Membership):
            if not expr.values:
                raise EmptyDomain("membership pool is empty")
            return expr
    for expr in flattened:
        if isinstance(expr, Interval):
            if expr.lo > expr.hi:
                raise EmptyDomain(f"interval [{expr.lo}, {expr.hi}] is empty")
            return expr
    raise EmptyDomain("no bounded domain to sample from")


def _draw(stream: KeyedStream, domain: Membership | Interval) -> Number:
    if isinstance(domain, Membership):
        return domain.values[stream.below(len(domain.values))]
    return domain.lo + stream.below(domain.hi - domain.lo + 1)


def sample_binding(t: MetaTemplate, seed: int, index: int, max_rejections: int = 10_000) -> ParamBinding:
    """Draw the index-th binding for a template; pure in (template_id, seed, index)."""
    table = effective_constraints(t)
    assignments: dict[str, Number] = {}
    for p in t.param_definitions:
        conjuncts = table[p.var_name]
        domain = _sampling_domain(conjuncts)
        stream = KeyedStream(t.template_id, seed, index, p.var_name)
        for _ in range(max_rejections):
            candidate = _draw(stream, domain)
            if _satisfies_all(candidate, conjuncts):
                assignments[p.var_name] = candidate
                break
        else:
            raise UnsatisfiableConstraint(
                f"no value for {p.var_name!r} satisfied {p.var_constraint!r} "
                f"within {max_rejections} draws"
            )
    return ParamBinding(assignments=assignments, seed=seed, template_id=t.template_id, index=index)


def sample_params(t: MetaTemplate, cfg: SamplerConfig) -> list[ParamBinding]:
    """Up to cfg.instances_per_template distinct bindings, deterministic in cfg.seed.

    Exact-duplicate assignments are dropped, keeping the first occurrence,
    so the result may be shorter than requested for small pools.
    """
    bindings: list[ParamBinding] = []
    seen: set[tuple] = set()
    for index in range(cfg.instances_per_template):
        b = sample_binding(t, cfg.seed, index, cfg.max_rejections)
        if b.key() in seen:
            continue
        seen.add(b.key())
        bindings.append(b)
    return bindings
