"""
Model spec & registry.

Constructors in models.py register themselves under a kind name with @register;
build_model dispatches a ModelSpec to the matching constructor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from errors import ValidationError

MODELS: dict[str, Callable] = {}
ALIASES = {"ex31": "max_ar", "ex32": "three_dependent"}


@dataclass(frozen=True)
class ModelSpec:
    """
    Which built-in model to build.

    - kind: one of the registered kinds (max_ar, three_dependent, iid_product)
    - p, q: block sizes, max_ar only
    - d: dimension, iid_product only
    """

    kind: str
    p: int | None = None
    q: int | None = None
    d: int | None = None

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == "max_ar":
            if self.p is None or self.q is None or self.p < 1 or self.q < 1:
                raise ValidationError(f"max_ar needs p >= 1 and q >= 1, got p={self.p}, q={self.q}.")
        elif kind == "iid_product":
            if self.d is None or self.d < 1:
                raise ValidationError(f"iid_product needs d >= 1, got d={self.d}.")

    @property
    def dimension(self) -> int:
        if self.kind == "max_ar":
            return self.p + self.q
        if self.kind == "iid_product":
            return self.d
        return 3

    @classmethod
    def from_dict(cls, data: dict) -> ModelSpec:
        if not isinstance(data, dict) or "kind" not in data:
            raise ValidationError(f"A model spec is a JSON object with a 'kind', got {data!r}.")
        unknown = set(data) - {"kind", "p", "q", "d"}
        if unknown:
            raise ValidationError(f"Unknown model spec fields: {sorted(unknown)}.")
        try:
            return cls(
                kind=str(data["kind"]),
                p=None if data.get("p") is None else int(data["p"]),
                q=None if data.get("q") is None else int(data["q"]),
                d=None if data.get("d") is None else int(data["d"]),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"Bad model spec {data!r}.") from e

    @classmethod
    def from_json(cls, text: str) -> ModelSpec:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ValidationError(f"Model spec is not valid JSON: {e}") from e

    def to_dict(self) -> dict:
        if self.kind == "max_ar":
            return {"kind": self.kind, "p": self.p, "q": self.q}
        if self.kind == "iid_product":
            return {"kind": self.kind, "d": self.d}
        return {"kind": self.kind}


def register(kind: str):
    """
    Model register decorator.

    Usage:  @register("max_ar")
            def max_ar_model(p, q):

    The constructor is called by build_model with the spec fields it needs.
    """
    def wrap(func):
        MODELS[kind] = func
        return func
    return wrap


def get_models() -> dict[str, Callable]:
    import models  # Force all registrations to occur.
    return MODELS


def build_model(spec: ModelSpec):
    """Builds the MevModel a spec names."""
    constructors = get_models()
    if spec.kind not in constructors:
        raise ValidationError(f"Unknown model kind {spec.kind!r}; expected one of {sorted(constructors)}.")
    if spec.kind == "max_ar":
        return constructors[spec.kind](spec.p, spec.q)
    if spec.kind == "iid_product":
        return constructors[spec.kind](spec.d)
    return constructors[spec.kind]()
