from fastapi import APIRouter, Depends, HTTPException

from app.api.deps import get_vqa_pipeline, scene_for
from app.core.errors import DualAttentionError
from app.models.pipeline import ScenePipeline
from app.schemas.inference import AnswerRequest, AnswerResponse

router = APIRouter(prefix="/answers", tags=["answers"])


@router.post("", response_model=AnswerResponse)
def answer_question(request: AnswerRequest, pipeline: ScenePipeline = Depends(get_vqa_pipeline)):
    try:
        scene = scene_for(request, pipeline)
        answer, output, _ = pipeline.answer(scene.canvas, request.question.lower().split())
    except DualAttentionError as e:
        raise HTTPException(status_code=400, detail=str(e))

    weights = None
    if output.alpha is not None:
        weights = output.alpha.data.reshape(pipeline.config.grid_h, pipeline.config.grid_w).tolist()
    return AnswerResponse(
        answer=answer,
        distribution={word: float(p) for word, p in zip(pipeline.vocab.answers, output.probabilities)},
        region_weights=weights,
    )
