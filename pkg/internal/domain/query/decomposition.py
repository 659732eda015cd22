from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict


class ConstraintKind(Enum):
    Equals = "equals"
    AtMost = "at_most"
    AtLeast = "at_least"
    Between = "between"
    Around = "around"


@dataclass(frozen=True)
class Constraint:
    """One typed predicate on a product attribute.

    at_most keeps its bound in numeric_high, at_least and around in numeric_low.
    """

    field: str
    kind: ConstraintKind
    categorical_value: Optional[str] = None
    numeric_low: Optional[float] = None
    numeric_high: Optional[float] = None

    @staticmethod
    def equals(field: str, value: str) -> "Constraint":
        return Constraint(field, ConstraintKind.Equals, categorical_value=value)

    @staticmethod
    def at_most(field: str, value: float) -> "Constraint":
        return Constraint(field, ConstraintKind.AtMost, numeric_high=float(value))

    @staticmethod
    def at_least(field: str, value: float) -> "Constraint":
        return Constraint(field, ConstraintKind.AtLeast, numeric_low=float(value))

    @staticmethod
    def between(field: str, low: float, high: float) -> "Constraint":
        return Constraint(
            field,
            ConstraintKind.Between,
            numeric_low=float(low),
            numeric_high=float(high),
        )

    @staticmethod
    def around(field: str, value: float) -> "Constraint":
        return Constraint(field, ConstraintKind.Around, numeric_low=float(value))

    @property
    def bound(self) -> Optional[float]:
        """The single numeric bound of an at_most / at_least / around constraint."""
        return self.numeric_low if self.numeric_low is not None else self.numeric_high

    def __str__(self) -> str:
        match self.kind:
            case ConstraintKind.Equals:
                return f"{self.field} equals {self.categorical_value!r}"
            case ConstraintKind.Between:
                low, high = self.numeric_low, self.numeric_high
                return f"{self.field} between {low:g} and {high:g}"
            case _:
                return f"{self.field} {self.kind.value} {self.bound:g}"

    def to_wire(self) -> Dict[str, Any]:
        wire: Dict[str, Any] = {"field": self.field, "kind": self.kind.value}
        match self.kind:
            case ConstraintKind.Equals:
                wire["value"] = self.categorical_value
            case ConstraintKind.Between:
                wire["low"] = self.numeric_low
                wire["high"] = self.numeric_high
            case _:
                wire["value"] = self.bound
        return wire


@dataclass(frozen=True)
class DecomposedQuery:
    raw: str
    constraints: Tuple[Constraint, ...]
    semantic_residual: str

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def to_wire(self) -> Dict[str, Any]:
        return {
            "raw": self.raw,
            "constraints": [c.to_wire() for c in self.constraints],
            "semantic_residual": self.semantic_residual,
        }

    @staticmethod
    def from_wire(payload: Dict[str, Any]) -> "DecomposedQuery":
        """Parse the wire shape; raises pydantic.ValidationError or ValueError."""
        wire = DecomposedQueryWire.model_validate(payload)
        return DecomposedQuery(
            raw=wire.raw,
            constraints=tuple(c.to_constraint() for c in wire.constraints),
            semantic_residual=wire.semantic_residual,
        )


class ConstraintWire(BaseModel):
    model_config = ConfigDict(extra="forbid")

    field: str
    kind: ConstraintKind
    value: Optional[Union[float, str]] = None
    low: Optional[float] = None
    high: Optional[float] = None

    def to_constraint(self) -> Constraint:
        match self.kind:
            case ConstraintKind.Equals:
                value = None if self.value is None else str(self.value)
                return Constraint(self.field, self.kind, categorical_value=value)
            case ConstraintKind.Between:
                return Constraint(
                    self.field, self.kind, numeric_low=self.low, numeric_high=self.high
                )
            case ConstraintKind.AtMost:
                high = _number(self.value)
                return Constraint(self.field, self.kind, numeric_high=high)
            case _:
                low = _number(self.value)
                return Constraint(self.field, self.kind, numeric_low=low)


class DecomposedQueryWire(BaseModel):
    raw: str
    constraints: List[ConstraintWire] = []
    semantic_residual: str = ""


def _number(value: Optional[Union[float, str]]) -> Optional[float]:
    if value is None:
        return None
    return float(value)
