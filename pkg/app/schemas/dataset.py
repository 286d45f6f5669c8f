from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.world.language import COLORS, SHAPES, SIZES


class ObjectRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: str
    color: str
    size: str
    row: int = Field(ge=0)
    col: int = Field(ge=0)

    @field_validator("shape")
    @classmethod
    def check_shape(cls, v: str) -> str:
        if v not in SHAPES:
            raise ValueError(f"unknown shape {v!r}")
        return v

    @field_validator("color")
    @classmethod
    def check_color(cls, v: str) -> str:
        if v not in COLORS:
            raise ValueError(f"unknown color {v!r}")
        return v

    @field_validator("size")
    @classmethod
    def check_size(cls, v: str) -> str:
        if v not in SIZES:
            raise ValueError(f"unknown size {v!r}")
        return v


class QARecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    question: str = Field(min_length=1)
    answer: str
    type: Literal["object", "number", "color", "location"]


class SampleRecord(BaseModel):
    """One line of a dataset file."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(ge=0, lt=2**32)
    grid: List[int] = Field(min_length=3, max_length=3)
    objects: List[ObjectRecord] = Field(min_length=1, max_length=4)
    captions: List[str] = Field(min_length=1)
    qa: List[QARecord]
    y: List[Literal[0, 1]]


class EvalRecord(BaseModel):
    """One line of an evaluation corpus file."""

    model_config = ConfigDict(extra="forbid")

    candidate: str
    references: List[str] = Field(min_length=1)
