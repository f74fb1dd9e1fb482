"""RDF data model: terms, triples, graphs, patterns, and a brute-force evaluator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

IRI = "iri"
BLANK = "blank"
LITERAL = "literal"

# Pseudo-prefixes so non-IRI terms have a total prefix function (used by the
# partitioned filters, which group hashed values by namespace).
LITERAL_PREFIX = "_lit:"
BLANK_PREFIX = "_bn:"


@dataclass(frozen=True, slots=True)
class Term:
    """An RDF term. ``lexical`` is the IRI, blank-node label, or literal value."""

    kind: str
    lexical: str
    datatype: Optional[str] = None
    lang: Optional[str] = None

    def is_iri(self) -> bool:
        return self.kind == IRI

    @property
    def prefix(self) -> str:
        """Namespace-style prefix: up to and including the last '/' or '#'.

        Falls back to the scheme (up to the last ':') for IRIs without either
        separator. Literals and blank nodes map to reserved pseudo-prefixes.
        """
        if self.kind == LITERAL:
            return LITERAL_PREFIX
        if self.kind == BLANK:
            return BLANK_PREFIX
        s = self.lexical
        cut = max(s.rfind("/"), s.rfind("#"))
        if cut < 0:
            cut = s.rfind(":")
        if cut < 0:
            return s
        return s[: cut + 1]

    @property
    def localname(self) -> str:
        if self.kind != IRI:
            return self.lexical
        return self.lexical[len(self.prefix):]

    def nt(self) -> str:
        """Render in N-Triples syntax."""
        if self.kind == IRI:
            return f"<{self.lexical}>"
        if self.kind == BLANK:
            return f"_:{self.lexical}"
        body = f'"{escape_literal(self.lexical)}"'
        if self.lang:
            return f"{body}@{self.lang}"
        if self.datatype:
            return f"{body}^^<{self.datatype}>"
        return body

    def filter_key(self) -> tuple[str, str]:
        """(partition prefix, hashed string) pair for Bloom filter insertion."""
        return self.prefix, self.nt()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return self.nt()


def iri(value: str) -> Term:
    return Term(IRI, value)


def blank(label: str) -> Term:
    return Term(BLANK, label)


def literal(value: str, datatype: Optional[str] = None, lang: Optional[str] = None) -> Term:
    return Term(LITERAL, value, datatype, lang)


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def escape_literal(value: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in value)


@dataclass(frozen=True, slots=True)
class Variable:
    name: str  # without the leading '?'

    def nt(self) -> str:
        return f"?{self.name}"

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"?{self.name}"


PatternTerm = Union[Term, Variable]


@dataclass(frozen=True, slots=True)
class Triple:
    s: Term
    p: Term
    o: Term

    def __post_init__(self) -> None:
        if self.s.kind == LITERAL:
            raise ValueError("triple subject cannot be a literal")
        if self.p.kind != IRI:
            raise ValueError("triple predicate must be an IRI")

    def nt(self) -> str:
        return f"{self.s.nt()} {self.p.nt()} {self.o.nt()} ."

    def sort_key(self) -> tuple[str, str, str]:
        return (self.s.nt(), self.p.nt(), self.o.nt())


class KnowledgeGraph:
    """An immutable set of triples with a subject index."""

    __slots__ = ("triples", "_by_subject")

    def __init__(self, triples: Iterable[Triple] = ()):
        self.triples: frozenset[Triple] = frozenset(triples)
        by_subject: dict[Term, list[Triple]] = {}
        for t in self.triples:
            by_subject.setdefault(t.s, []).append(t)
        self._by_subject = {s: tuple(sorted(ts, key=Triple.sort_key)) for s, ts in by_subject.items()}

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self.triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, KnowledgeGraph) and self.triples == other.triples

    def __hash__(self) -> int:
        return hash(self.triples)

    def subjects(self) -> list[Term]:
        return sorted(self._by_subject, key=Term.nt)

    def triples_with_subject(self, s: Term) -> tuple[Triple, ...]:
        return self._by_subject.get(s, ())

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples, key=Triple.sort_key)


@dataclass(frozen=True, slots=True)
class TriplePattern:
    s: PatternTerm
    p: PatternTerm
    o: PatternTerm

    def terms(self) -> tuple[PatternTerm, PatternTerm, PatternTerm]:
        return (self.s, self.p, self.o)

    def variables(self) -> set[str]:
        return {t.name for t in self.terms() if isinstance(t, Variable)}

    def nt(self) -> str:
        return f"{self.s.nt()} {self.p.nt()} {self.o.nt()} ."

    def sort_key(self) -> tuple[str, str, str]:
        return (self.s.nt(), self.p.nt(), self.o.nt())


BGP = tuple  # tuple[TriplePattern, ...]; order follows the source document


def bgp_variables(patterns: Iterable[TriplePattern]) -> set[str]:
    out: set[str] = set()
    for tp in patterns:
        out |= tp.variables()
    return out


@dataclass(frozen=True)
class StarPattern:
    """Triple patterns sharing one subject term or variable."""

    subject: PatternTerm
    patterns: tuple[TriplePattern, ...]

    def __post_init__(self) -> None:
        for tp in self.patterns:
            if tp.s != self.subject:
                raise ValueError("star pattern requires a common subject")

    @property
    def key(self) -> str:
        """Stable identifier (the subject's rendering)."""
        return self.subject.nt()

    def variables(self) -> set[str]:
        return bgp_variables(self.patterns)

    def predicates(self) -> tuple[str, ...]:
        """Sorted non-variable predicate IRIs."""
        return tuple(sorted({tp.p.lexical for tp in self.patterns if isinstance(tp.p, Term)}))

    def has_variable_predicate(self) -> bool:
        return any(isinstance(tp.p, Variable) for tp in self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)


def star_decompose(patterns: Iterable[TriplePattern]) -> list[StarPattern]:
    """Group a BGP into one star per distinct subject. Union of stars equals the BGP."""
    pats = list(patterns)
    if not pats:
        raise ValueError("cannot decompose an empty BGP")
    by_subject: dict[PatternTerm, list[TriplePattern]] = {}
    for tp in pats:
        by_subject.setdefault(tp.s, []).append(tp)
    stars = [StarPattern(s, tuple(ps)) for s, ps in by_subject.items()]
    stars.sort(key=lambda st: st.key)
    return stars


@dataclass(frozen=True)
class Query:
    """A parsed SELECT query over the supported subset."""

    bgp: tuple[TriplePattern, ...]
    distinct: bool = False
    projection: Optional[tuple[str, ...]] = None  # None means '*'

    def __post_init__(self) -> None:
        if self.projection is not None:
            missing = set(self.projection) - bgp_variables(self.bgp)
            if missing:
                raise ValueError(f"projection variables not in pattern: {sorted(missing)}")

    def variables(self) -> tuple[str, ...]:
        if self.projection is not None:
            return self.projection
        return tuple(sorted(bgp_variables(self.bgp)))


Binding = dict[str, Term]  # solution mapping: variable name -> term


def _match_term(pattern: PatternTerm, value: Term, binding: Binding) -> Optional[Binding]:
    if isinstance(pattern, Variable):
        bound = binding.get(pattern.name)
        if bound is None:
            new = dict(binding)
            new[pattern.name] = value
            return new
        return binding if bound == value else None
    return binding if pattern == value else None


def _match_pattern(tp: TriplePattern, triple: Triple, binding: Binding) -> Optional[Binding]:
    b = _match_term(tp.s, triple.s, binding)
    if b is None:
        return None
    b = _match_term(tp.p, triple.p, b)
    if b is None:
        return None
    return _match_term(tp.o, triple.o, b)


def match_star(star: StarPattern, graph: KnowledgeGraph, seed: Optional[Binding] = None) -> list[Binding]:
    """All bindings extending ``seed`` that satisfy every pattern of the star in ``graph``."""
    results: list[Binding] = []

    def candidates(binding: Binding) -> Iterable[Triple]:
        subj = star.subject
        if isinstance(subj, Variable):
            bound = binding.get(subj.name)
            if bound is not None:
                return graph.triples_with_subject(bound)
            return graph.sorted_triples()
        return graph.triples_with_subject(subj)

    def walk(i: int, binding: Binding) -> None:
        if i == len(star.patterns):
            results.append(binding)
            return
        tp = star.patterns[i]
        for triple in candidates(binding):
            b = _match_pattern(tp, triple, binding)
            if b is not None:
                walk(i + 1, b)

    walk(0, dict(seed or {}))
    return results


def evaluate_bgp(
    patterns: Iterable[TriplePattern],
    graph: KnowledgeGraph,
    distinct: bool = False,
    projection: Optional[tuple[str, ...]] = None,
) -> list[Binding]:
    """Brute-force BGP evaluation; the ground-truth oracle for everything else.

    Without DISTINCT the result is a bag over the projected variables (full
    solutions are naturally duplicate-free; projection may introduce
    duplicates). With DISTINCT, duplicate projected rows collapse.
    """
    pats = sorted(patterns, key=TriplePattern.sort_key)
    solutions: list[Binding] = [{}]
    for tp in pats:
        next_solutions: list[Binding] = []
        for binding in solutions:
            subj = tp.s
            if isinstance(subj, Variable) and subj.name in binding:
                pool: Iterable[Triple] = graph.triples_with_subject(binding[subj.name])
            elif isinstance(subj, Term):
                pool = graph.triples_with_subject(subj)
            else:
                pool = graph.sorted_triples()
            for triple in pool:
                b = _match_pattern(tp, triple, binding)
                if b is not None:
                    next_solutions.append(b)
        solutions = next_solutions
        if not solutions:
            break
    return project_bindings(solutions, distinct=distinct, projection=projection)


def project_bindings(
    rows: Iterable[Binding],
    distinct: bool = False,
    projection: Optional[tuple[str, ...]] = None,
) -> list[Binding]:
    """Apply projection and, when requested, duplicate elimination."""
    out: list[Binding] = []
    for row in rows:
        if projection is None:
            out.append(dict(row))
        else:
            out.append({v: row[v] for v in projection if v in row})
    if distinct:
        seen: set[tuple[tuple[str, str], ...]] = set()
        deduped = []
        for row in out:
            key = binding_key(row)
            if key not in seen:
                seen.add(key)
                deduped.append(row)
        return deduped
    return out


def binding_key(row: Binding) -> tuple[tuple[str, str], ...]:
    return tuple(sorted((v, t.nt()) for v, t in row.items()))


def bindings_multiset(rows: Iterable[Binding]) -> dict[tuple[tuple[str, str], ...], int]:
    """Multiset view of a result list, for order-insensitive comparison."""
    counts: dict[tuple[tuple[str, str], ...], int] = {}
    for row in rows:
        key = binding_key(row)
        counts[key] = counts.get(key, 0) + 1
    return counts
