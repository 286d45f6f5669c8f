from typing import Dict, List, Literal

from pydantic import BaseModel


class CaptionReport(BaseModel):
    task: Literal["caption"] = "caption"
    samples: int
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    cider: float
    exact_match: float


class TypeAccuracy(BaseModel):
    accuracy: float
    count: int


class VqaReport(BaseModel):
    task: Literal["vqa"] = "vqa"
    questions: int
    accuracy: float
    per_type: Dict[str, TypeAccuracy]
    wups_0_9: float
    wups_0_0: float


class AblationRow(BaseModel):
    variant: str
    seeds: List[int]
    metrics: Dict[str, float]


class AblationReport(BaseModel):
    task: Literal["caption", "vqa"]
    rows: List[AblationRow]
