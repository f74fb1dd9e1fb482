"""Query execution plan trees: left-deep joins, Cartesian products, unions of
per-fragment selections, each annotated with the node it is delegated to."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .model import StarPattern


class MalformedPlanError(ValueError):
    pass


@dataclass(frozen=True)
class Selection:
    """Evaluate one star pattern over one fragment at one node."""

    star: StarPattern
    fragment: str
    node: str


@dataclass(frozen=True)
class Join:
    left: "Plan"
    right: "Plan"  # a Selection or a Union of Selections (left-deep invariant)
    node: str


@dataclass(frozen=True)
class Cartesian:
    left: "Plan"
    right: "Plan"
    node: str


@dataclass(frozen=True)
class Union_:
    branches: tuple["Plan", ...]

    def __post_init__(self) -> None:
        if len(self.branches) < 2:
            raise MalformedPlanError("union needs at least two branches")


@dataclass(frozen=True)
class EmptyPlan:
    """A provably empty result (pruning removed every candidate)."""


Plan = Union[Selection, Join, Cartesian, Union_, EmptyPlan]


def union_of(branches: list[Plan]) -> Plan:
    """Union constructor that flattens trivial cases."""
    flat: list[Plan] = []
    for b in branches:
        if isinstance(b, Union_):
            flat.extend(b.branches)
        elif isinstance(b, EmptyPlan):
            continue
        else:
            flat.append(b)
    if not flat:
        return EmptyPlan()
    if len(flat) == 1:
        return flat[0]
    return Union_(tuple(flat))


def branches_of(plan: Plan) -> tuple[Plan, ...]:
    if isinstance(plan, Union_):
        return plan.branches
    return (plan,)


def right_selections(right: Plan) -> tuple[Selection, ...]:
    """The selections on the right side of a join; rejects non-left-deep shapes."""
    if isinstance(right, Selection):
        return (right,)
    if isinstance(right, Union_):
        sels = []
        for b in right.branches:
            if not isinstance(b, Selection):
                raise MalformedPlanError("join right side must be selections only")
            sels.append(b)
        return tuple(sels)
    raise MalformedPlanError(f"join right side cannot be {type(right).__name__}")


def iter_selections(plan: Plan) -> Iterator[Selection]:
    if isinstance(plan, Selection):
        yield plan
    elif isinstance(plan, (Join, Cartesian)):
        yield from iter_selections(plan.left)
        yield from iter_selections(plan.right)
    elif isinstance(plan, Union_):
        for b in plan.branches:
            yield from iter_selections(b)


def plan_fragments(plan: Plan) -> set[str]:
    return {sel.fragment for sel in iter_selections(plan)}


def star_fragments(plan: Plan) -> dict[str, set[str]]:
    """Fragments appearing in the plan, grouped by star key."""
    out: dict[str, set[str]] = {}
    for sel in iter_selections(plan):
        out.setdefault(sel.star.key, set()).add(sel.fragment)
    return out


def plan_stars(plan: Plan) -> dict[str, StarPattern]:
    return {sel.star.key: sel.star for sel in iter_selections(plan)}


def validate_left_deep(plan: Plan) -> None:
    """Raise MalformedPlanError unless the plan obeys the left-deep shape."""
    if isinstance(plan, (Selection, EmptyPlan)):
        return
    if isinstance(plan, Union_):
        for b in plan.branches:
            validate_left_deep(b)
        return
    if isinstance(plan, (Join, Cartesian)):
        for b in branches_of(plan.right):
            if not isinstance(b, Selection):
                raise MalformedPlanError("right side of a join/product must be selections only")
        validate_left_deep(plan.left)
        return
    raise MalformedPlanError(f"unknown plan node {type(plan).__name__}")


def render_plan(plan: Plan) -> str:
    """Compact single-line rendering, used in plan fingerprints and messages."""
    if isinstance(plan, EmptyPlan):
        return "(empty)"
    if isinstance(plan, Selection):
        return f"[[{plan.star.key}]]_{plan.fragment}^{plan.node}"
    if isinstance(plan, Union_):
        return "(" + " UNION ".join(render_plan(b) for b in plan.branches) + ")"
    if isinstance(plan, Join):
        return f"({render_plan(plan.left)} JOIN^{plan.node} {render_plan(plan.right)})"
    if isinstance(plan, Cartesian):
        return f"({render_plan(plan.left)} CROSS^{plan.node} {render_plan(plan.right)})"
    raise MalformedPlanError(f"unknown plan node {type(plan).__name__}")
