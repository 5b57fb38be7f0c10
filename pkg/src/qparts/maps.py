"""Outcome-label plumbing: product labels and surjections between outcome sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import LabelError


def product_label(*parts) -> str:
    """Canonical label of a tuple of outcomes, e.g. ``"(0,1)"``."""
    return "(" + ",".join(str(p) for p in parts) + ")"


@dataclass(frozen=True)
class Surjection:
    """
    A total, onto map from a finite domain of labels to a codomain of labels.

    ``domain`` and ``codomain`` keep their order; ``assignment[i]`` is the image
    of ``domain[i]``.
    """

    domain: tuple[str, ...]
    codomain: tuple[str, ...]
    assignment: tuple[str, ...]

    def __post_init__(self):
        if len(self.assignment) != len(self.domain):
            raise LabelError("surjection must assign every domain label exactly once")
        if len(set(self.domain)) != len(self.domain):
            raise LabelError("duplicate labels in surjection domain")
        if len(set(self.codomain)) != len(self.codomain):
            raise LabelError("duplicate labels in surjection codomain")
        cod = set(self.codomain)
        stray = [v for v in self.assignment if v not in cod]
        if stray:
            raise LabelError(f"labels {stray} are not in the codomain")
        missed = cod.difference(self.assignment)
        if missed:
            raise LabelError(f"map is not surjective; codomain labels {sorted(missed)} are never hit")

    @classmethod
    def from_mapping(cls, mapping: Mapping, codomain: Sequence | None = None) -> "Surjection":
        domain = tuple(str(k) for k in mapping)
        assignment = tuple(str(v) for v in mapping.values())
        if codomain is None:
            codomain = tuple(dict.fromkeys(assignment))
        return cls(domain, tuple(str(c) for c in codomain), assignment)

    @classmethod
    def from_function(cls, domain: Iterable, fn, codomain: Sequence | None = None) -> "Surjection":
        domain = list(domain)
        return cls.from_mapping({d: fn(d) for d in domain}, codomain)

    @classmethod
    def identity(cls, labels: Iterable) -> "Surjection":
        labels = tuple(str(x) for x in labels)
        return cls(labels, labels, labels)

    @classmethod
    def constant(cls, labels: Iterable, value: str = "1") -> "Surjection":
        labels = tuple(str(x) for x in labels)
        return cls(labels, (value,), (value,) * len(labels))

    def __call__(self, label: str) -> str:
        return self.as_dict()[label]

    def as_dict(self) -> dict[str, str]:
        return dict(zip(self.domain, self.assignment))

    def fiber(self, x: str) -> list[str]:
        return [d for d, v in zip(self.domain, self.assignment) if v == x]

    def preimage(self, xs: Iterable[str]) -> set[str]:
        xs = set(xs)
        return {d for d, v in zip(self.domain, self.assignment) if v in xs}

    def is_bijection(self) -> bool:
        return len(self.domain) == len(self.codomain)

    def then(self, other: "Surjection") -> "Surjection":
        """Composite ``other o self``: first apply self, then other."""
        if set(other.domain) != set(self.codomain):
            raise LabelError("cannot compose: codomain and domain differ")
        g = other.as_dict()
        return Surjection(self.domain, other.codomain, tuple(g[v] for v in self.assignment))

    def to_json(self) -> dict:
        return {"domain": list(self.domain), "codomain": list(self.codomain),
                "map": dict(zip(self.domain, self.assignment))}


def projection_maps(*label_lists: Sequence[str]) -> list[Surjection]:
    """Coordinate projections from the product of ``label_lists`` onto each factor."""
    import itertools

    tuples = list(itertools.product(*label_lists))
    domain = [product_label(*t) for t in tuples]
    return [
        Surjection(tuple(domain), tuple(str(x) for x in labels), tuple(str(t[i]) for t in tuples))
        for i, labels in enumerate(label_lists)
    ]
