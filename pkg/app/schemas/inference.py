from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ObjectSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: str
    color: str
    size: str
    row: int
    col: int


class SceneRequest(BaseModel):
    """Either a generator seed or an explicit object list."""

    model_config = ConfigDict(extra="forbid")

    seed: Optional[int] = Field(None, ge=0)
    objects: Optional[List[ObjectSpec]] = None

    @model_validator(mode="after")
    def one_source(self):
        if (self.seed is None) == (self.objects is None):
            raise ValueError("give exactly one of seed or objects")
        return self


class CaptionRequest(SceneRequest):
    beam_size: Optional[int] = Field(None, ge=1, le=16)


class AnswerRequest(SceneRequest):
    question: str


class ConceptWeight(BaseModel):
    word: str
    probability: float


class CaptionStep(BaseModel):
    token: str
    gate: Optional[float] = None
    region_weights: Optional[List[List[float]]] = None


class CaptionResponse(BaseModel):
    caption: str
    concepts: List[ConceptWeight]
    steps: List[CaptionStep]


class AnswerResponse(BaseModel):
    answer: str
    distribution: Dict[str, float]
    region_weights: Optional[List[List[float]]] = None
