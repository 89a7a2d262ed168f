from fractions import Fraction
from typing import Annotated
from typing import Any

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import PlainSerializer
from pydantic import PlainValidator
from pydantic.alias_generators import to_camel

from pcfp._lib.rationals import format_rational


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, float):
        raise ValueError("Exact rationals cannot be built from floats")
    return Fraction(value)


Rational = Annotated[
    Fraction,
    PlainValidator(_to_fraction),
    PlainSerializer(format_rational, return_type=str),
]
"""An exact rational, serialised as `"num/den"`."""


class Record(BaseModel):
    """
    Base class of the structured outputs of the toolkit.

    Fields are written in camelCase when serialised (`original_states` -> `originalStates`) and may
    be populated by either name.
    """

    model_config = ConfigDict(
        alias_generator=to_camel,
        populate_by_name=True,
        frozen=True,
    )

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, exclude_none=True, indent=2)
