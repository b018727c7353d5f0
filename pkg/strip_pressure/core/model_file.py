"""Model files (YAML) and inline built-in model specifications.
"""
import math
import os
import re
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

import strip_pressure.core.utils as utils
from strip_pressure.core.errors import ModelFileError
from strip_pressure.core.interactions import BUILTIN_MODELS, Model, NnInteraction, builtin_model
from strip_pressure.core.lattice import NnSft, PeriodicRow

Number = Union[float, str]

_EXPRESSION = re.compile(r"^\s*(-?)\s*(log|exp)\s*\(\s*([^()]+?)\s*\)\s*$")


def parse_value(value: Number) -> float:
    """A number, or one of log(x), -log(x), exp(x), -exp(x) with numeric x."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"Expected a number or expression, got {value!r}.")
    match = _EXPRESSION.match(value)
    if not match:
        return float(value)
    sign, function, argument = match.groups()
    x = float(argument)
    if function == "log":
        if x <= 0:
            raise ValueError(f"log needs a positive argument, got {x}.")
        result = math.log(x)
    else:
        result = math.exp(x)
    return -result if sign else result


def _stringify(value: Any) -> Any:
    if isinstance(value, list):
        return [_stringify(item) for item in value]
    if isinstance(value, (int, float, str)):
        return str(value)
    return value


class InteractionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vertex: Dict[str, Number] = {}
    hedge: List[Tuple[str, str, Number]] = []
    vedge: List[Tuple[str, str, Number]] = []

    @field_validator("vertex", mode="before")
    @classmethod
    def _vertex_keys(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return {str(key): item for key, item in value.items()}
        return value

    @field_validator("hedge", "vedge", mode="before")
    @classmethod
    def _pair_names(cls, value: Any) -> Any:
        if isinstance(value, list):
            return [
                [str(entry[0]), str(entry[1]), *entry[2:]]
                if isinstance(entry, list) and len(entry) >= 2
                else entry
                for entry in value
            ]
        return value


class BoundarySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: List[str]
    b: List[str]

    @field_validator("t", "b", mode="before")
    @classmethod
    def _names(cls, value: Any) -> Any:
        return _stringify(value)


class BuiltinSpec(BaseModel):
    model_config = ConfigDict(extra="allow")

    name: str


class ModelFileSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alphabet: Optional[List[str]] = None
    e1: Optional[List[Tuple[str, str]]] = None
    e2: Optional[List[Tuple[str, str]]] = None
    interaction: Optional[InteractionSpec] = None
    boundary: Optional[BoundarySpec] = None
    builtin: Optional[BuiltinSpec] = None

    @field_validator("alphabet", "e1", "e2", mode="before")
    @classmethod
    def _names(cls, value: Any) -> Any:
        return _stringify(value)

    @model_validator(mode="after")
    def _one_source(self) -> "ModelFileSpec":
        explicit = [self.alphabet, self.e1, self.e2]
        if self.builtin is not None:
            if any(item is not None for item in explicit) or self.interaction is not None:
                raise ValueError("A builtin model cannot also define alphabet, e1, e2 or interaction.")
        elif any(item is None for item in explicit):
            raise ValueError("A model needs alphabet, e1 and e2, or a builtin entry.")
        return self


def _interaction(spec: Optional[InteractionSpec], sft: NnSft) -> NnInteraction:
    if spec is None:
        return NnInteraction.zero(sft.size)
    index = sft.alphabet.index
    return NnInteraction.from_maps(
        sft.size,
        vertex={index(name): parse_value(value) for name, value in spec.vertex.items()},
        hedge={(index(a), index(b)): parse_value(value) for a, b, value in spec.hedge},
        vedge={(index(a), index(b)): parse_value(value) for a, b, value in spec.vedge},
    )


def _rows(spec: BoundarySpec, sft: NnSft) -> Tuple[PeriodicRow, PeriodicRow]:
    def row(names: List[str]) -> PeriodicRow:
        return PeriodicRow(word=tuple(sft.alphabet.index(name) for name in names))

    return row(spec.t), row(spec.b)


def model_from_spec(spec: ModelFileSpec, name: str) -> Model:
    if spec.builtin is not None:
        params = dict(spec.builtin.model_extra or {})
        model = builtin_model(spec.builtin.name, params)
    else:
        assert spec.alphabet is not None and spec.e1 is not None and spec.e2 is not None
        sft = NnSft.from_names(spec.alphabet, e1=spec.e1, e2=spec.e2)
        zero = PeriodicRow.constant(0)
        model = Model(name, sft, _interaction(spec.interaction, sft), zero, zero, {})
    if spec.boundary is not None:
        model = model.with_rows(*_rows(spec.boundary, model.sft))
    elif spec.builtin is None:
        raise ValueError("A model file without builtin needs a boundary section.")
    return model


def parse_model_text(text: str, name: str = "model") -> Model:
    try:
        content = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ModelFileError(f"Model {name} is not valid YAML: {e}")
    if not isinstance(content, dict):
        raise ModelFileError(f"Model {name} must be a YAML mapping.")
    try:
        return model_from_spec(ModelFileSpec.model_validate(content), name)
    except ValidationError as e:
        raise ModelFileError(f"Model {name} failed validation: {e}")
    except ValueError as e:
        raise ModelFileError(f"Model {name} is invalid: {e}")


def parse_inline(text: str) -> Model:
    """Parse `name` or `name:key=value,...`, e.g. `ising:beta=0.02,h=0`."""
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in BUILTIN_MODELS:
        raise ModelFileError(
            f"[{text}] is neither a model file nor a built-in model {list(BUILTIN_MODELS)}."
        )
    try:
        return builtin_model(name, utils.parse_key_values(rest))
    except ValueError as e:
        raise ModelFileError(f"Built-in model [{text}] is invalid: {e}")


def load_model(source: str) -> Model:
    """Load a model from a YAML file path or an inline built-in specification.

    Args:
        source (str): A path to an existing file, or e.g. `hard_core:a=2.0`.

    Returns:
        Model: The model with its boundary rows.
    """
    if os.path.isfile(source):
        with open(source) as f:
            text = f.read()
        return parse_model_text(text, name=os.path.splitext(os.path.basename(source))[0])
    return parse_inline(source)
