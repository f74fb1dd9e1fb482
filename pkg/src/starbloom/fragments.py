"""Characteristic-set fragmentation and infrequent-set merging."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .model import KnowledgeGraph, Term, Triple
from .ntriples import parse_ntriples, serialize_ntriples

DEFAULT_MIN_SUBJECTS = 50


class SubjectNotFoundError(KeyError):
    pass


@dataclass(frozen=True, order=True)
class CharacteristicSet:
    """The set of predicates occurring with one subject, in canonical order."""

    predicates: tuple[str, ...]

    @staticmethod
    def of(predicates: Iterable[str]) -> "CharacteristicSet":
        return CharacteristicSet(tuple(sorted(set(predicates))))

    def canonical(self) -> str:
        return " ".join(self.predicates)

    def __contains__(self, predicate: str) -> bool:
        return predicate in self.predicates

    def __len__(self) -> int:
        return len(self.predicates)

    def issubset(self, other: "CharacteristicSet") -> bool:
        return set(self.predicates) <= set(other.predicates)

    def intersection(self, predicates: Iterable[str]) -> tuple[str, ...]:
        other = set(predicates)
        return tuple(p for p in self.predicates if p in other)


def fragment_id(cs: CharacteristicSet, graph_id: str = "g") -> str:
    digest = hashlib.sha256(f"{graph_id}|{cs.canonical()}".encode("utf-8")).hexdigest()
    return digest[:12]


@dataclass(frozen=True)
class Fragment:
    """A disjoint subset of a graph keyed by a (merged) characteristic set."""

    id: str
    cs: CharacteristicSet
    triples: frozenset[Triple]
    subject_count: int

    @staticmethod
    def build(cs: CharacteristicSet, triples: Iterable[Triple], graph_id: str = "g",
              id: Optional[str] = None) -> "Fragment":
        ts = frozenset(triples)
        for t in ts:
            if t.p.lexical not in cs:
                raise ValueError(f"triple predicate {t.p.lexical} outside characteristic set")
        return Fragment(
            id=id or fragment_id(cs, graph_id),
            cs=cs,
            triples=ts,
            subject_count=len({t.s for t in ts}),
        )

    def graph(self) -> KnowledgeGraph:
        return KnowledgeGraph(self.triples)

    def sort_key(self) -> tuple[str, str]:
        return (self.cs.canonical(), self.id)


def characteristic_set(s: Term, graph: KnowledgeGraph) -> CharacteristicSet:
    """Exactly the predicates of triples with subject ``s``."""
    triples = graph.triples_with_subject(s)
    if not triples:
        raise SubjectNotFoundError(s.nt())
    return CharacteristicSet.of(t.p.lexical for t in triples)


def fragment_by_cs(graph: KnowledgeGraph, graph_id: str = "g") -> list[Fragment]:
    """One fragment per distinct characteristic set; fragments partition the graph."""
    groups: dict[CharacteristicSet, list[Triple]] = {}
    for s in graph.subjects():
        triples = graph.triples_with_subject(s)
        cs = CharacteristicSet.of(t.p.lexical for t in triples)
        groups.setdefault(cs, []).extend(triples)
    frags = [Fragment.build(cs, ts, graph_id) for cs, ts in groups.items()]
    frags.sort(key=Fragment.sort_key)
    return frags


@dataclass
class MergeReport:
    """What happened during a merge pass."""

    absorbed: list[tuple[str, str]] = field(default_factory=list)  # (source id, target id)
    split: list[tuple[str, tuple[str, ...], str]] = field(default_factory=list)  # (src, piece preds, target)
    residual: list[str] = field(default_factory=list)  # fragments left untouched for lack of a target
    achieved_count: Optional[int] = None
    feasible: bool = True


def _absorb(target: Fragment, triples: Iterable[Triple]) -> Fragment:
    merged = target.triples | frozenset(triples)
    return Fragment(target.id, target.cs, merged, len({t.s for t in merged}))


def _pick_subset_target(cs: CharacteristicSet, targets: list[Fragment]) -> Optional[Fragment]:
    candidates = [t for t in targets if cs.issubset(t.cs) and t.cs != cs]
    if not candidates:
        return None
    # smallest predicate set wins; canonical text breaks remaining ties
    return min(candidates, key=lambda f: (len(f.cs), f.cs.canonical()))


def _split_pieces(frag: Fragment, targets: list[Fragment]) -> tuple[list[tuple[tuple[str, ...], Fragment]], tuple[str, ...]]:
    """Greedy split of ``frag`` into predicate pieces, largest overlap first.

    Returns (pieces as (predicates, target) pairs, leftover predicates).
    """
    remaining = set(frag.cs.predicates)
    pieces: list[tuple[tuple[str, ...], Fragment]] = []
    while remaining:
        best: Optional[tuple[int, int, str, Fragment]] = None
        for t in targets:
            overlap = t.cs.intersection(remaining)
            if not overlap:
                continue
            rank = (-len(overlap), len(t.cs), t.cs.canonical())
            if best is None or rank < best[:3]:
                best = (*rank, t)
        if best is None:
            break
        target = best[3]
        piece = target.cs.intersection(remaining)
        pieces.append((piece, target))
        remaining -= set(piece)
    return pieces, tuple(sorted(remaining))


def merge_infrequent(fragments: Iterable[Fragment], min_subjects: int = DEFAULT_MIN_SUBJECTS,
                     graph_id: str = "g") -> tuple[list[Fragment], MergeReport]:
    """Fold fragments with fewer than ``min_subjects`` subjects into larger ones.

    Step 1 absorbs a small fragment whole when its predicate set is contained
    in a surviving fragment's set (the target with the fewest predicates wins).
    Step 2 splits the remainder into pieces that fit surviving fragments;
    leftover predicates with no target stay behind as residual fragments.
    The two steps repeat until stable, so the operation is idempotent.
    Triples are never lost or duplicated.
    """
    frags = sorted(fragments, key=Fragment.sort_key)
    report = MergeReport()
    for _ in range(max(1, len(frags))):
        merged, pass_report = _merge_pass(frags, min_subjects, graph_id)
        report.absorbed.extend(pass_report.absorbed)
        report.split.extend(pass_report.split)
        report.residual = pass_report.residual
        if {f.id: f.triples for f in merged} == {f.id: f.triples for f in frags}:
            break
        frags = merged
    return frags, report


def _merge_pass(fragments: list[Fragment], min_subjects: int,
                graph_id: str) -> tuple[list[Fragment], MergeReport]:
    if min_subjects < 1:
        raise ValueError("min_subjects must be >= 1")
    frags = sorted(fragments, key=Fragment.sort_key)
    report = MergeReport()

    survivors = {f.id: f for f in frags if f.subject_count >= min_subjects}
    infrequent = [f for f in frags if f.subject_count < min_subjects]
    infrequent.sort(key=lambda f: (f.subject_count, f.cs.canonical()))

    needs_split: list[Fragment] = []
    for f in infrequent:
        target = _pick_subset_target(f.cs, list(survivors.values()))
        if target is None:
            needs_split.append(f)
        else:
            survivors[target.id] = _absorb(survivors[target.id], f.triples)
            report.absorbed.append((f.id, target.id))

    residuals: dict[CharacteristicSet, set[Triple]] = {}
    for f in needs_split:
        pieces, leftover = _split_pieces(f, list(survivors.values()))
        if not pieces:
            report.residual.append(f.id)
            residuals.setdefault(f.cs, set()).update(f.triples)
            continue
        for preds, target in pieces:
            piece_triples = [t for t in f.triples if t.p.lexical in set(preds)]
            survivors[target.id] = _absorb(survivors[target.id], piece_triples)
            report.split.append((f.id, preds, target.id))
        if leftover:
            left_triples = [t for t in f.triples if t.p.lexical in set(leftover)]
            cs = CharacteristicSet.of(leftover)
            residuals.setdefault(cs, set()).update(left_triples)
            report.split.append((f.id, leftover, "(residual)"))

    out = list(survivors.values())
    for cs, triples in residuals.items():
        out.append(Fragment.build(cs, triples, graph_id))
    out.sort(key=Fragment.sort_key)
    return out, report


def merge_to_count(fragments: Iterable[Fragment], target_count: int,
                   graph_id: str = "g") -> tuple[list[Fragment], MergeReport]:
    """Repeatedly merge the fragment with the fewest subjects until
    ``target_count`` fragments remain or no further merge is feasible."""
    frags = sorted(fragments, key=Fragment.sort_key)
    if not 1 <= target_count <= len(frags):
        raise ValueError(f"target_count must be in [1, {len(frags)}]")
    report = MergeReport()
    stuck: set[str] = set()

    while len(frags) > target_count:
        candidates = [f for f in frags if f.id not in stuck]
        if not candidates:
            break
        f = min(candidates, key=lambda x: (x.subject_count, x.cs.canonical()))
        others = [x for x in frags if x.id != f.id]
        target = _pick_subset_target(f.cs, others)
        if target is not None:
            merged = _absorb(target, f.triples)
            frags = [merged if x.id == target.id else x for x in others]
            report.absorbed.append((f.id, target.id))
            continue
        pieces, leftover = _split_pieces(f, others)
        if not pieces or leftover:
            # splitting would not reduce the fragment count
            stuck.add(f.id)
            report.residual.append(f.id)
            continue
        by_id = {x.id: x for x in others}
        for preds, target in pieces:
            piece_triples = [t for t in f.triples if t.p.lexical in set(preds)]
            by_id[target.id] = _absorb(by_id[target.id], piece_triples)
            report.split.append((f.id, preds, target.id))
        frags = sorted(by_id.values(), key=Fragment.sort_key)

    report.achieved_count = len(frags)
    report.feasible = len(frags) <= target_count
    frags.sort(key=Fragment.sort_key)
    return frags, report


def write_fragments(fragments: Iterable[Fragment], outdir: Path) -> Path:
    """Persist fragments as one N-Triples file each plus a JSON-lines manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = outdir / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as mf:
        for f in sorted(fragments, key=Fragment.sort_key):
            name = f"{f.id}.nt"
            (outdir / name).write_text(serialize_ntriples(f.triples), encoding="utf-8")
            mf.write(json.dumps({
                "id": f.id,
                "predicates": list(f.cs.predicates),
                "subject_count": f.subject_count,
                "triple_count": len(f.triples),
                "file": name,
            }, sort_keys=True) + "\n")
    return manifest


def load_fragments(outdir: Path) -> list[Fragment]:
    outdir = Path(outdir)
    manifest = outdir / "manifest.jsonl"
    frags: list[Fragment] = []
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        meta = json.loads(line)
        graph = parse_ntriples((outdir / meta["file"]).read_text(encoding="utf-8"))
        frags.append(Fragment(
            id=meta["id"],
            cs=CharacteristicSet.of(meta["predicates"]),
            triples=graph.triples,
            subject_count=meta["subject_count"],
        ))
    frags.sort(key=Fragment.sort_key)
    return frags
