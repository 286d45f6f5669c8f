from fastapi import APIRouter, Depends, HTTPException

from app.api.deps import get_caption_pipeline, scene_for
from app.core.errors import DualAttentionError
from app.models.pipeline import ScenePipeline
from app.schemas.inference import CaptionRequest, CaptionResponse, CaptionStep, ConceptWeight

router = APIRouter(prefix="/captions", tags=["captions"])


@router.post("", response_model=CaptionResponse)
def caption_scene(request: CaptionRequest, pipeline: ScenePipeline = Depends(get_caption_pipeline)):
    try:
        scene = scene_for(request, pipeline)
        state = pipeline.concept_state(scene.canvas)
        words, trace, _ = pipeline.caption(scene.canvas, beam_size=request.beam_size)
    except DualAttentionError as e:
        raise HTTPException(status_code=400, detail=str(e))

    shape = (pipeline.config.grid_h, pipeline.config.grid_w)
    steps = [
        CaptionStep(
            token=pipeline.vocab.tokens[step.token],
            gate=step.gate,
            region_weights=None if step.alpha is None else step.alpha.reshape(shape).tolist(),
        )
        for step in trace.steps
    ]
    return CaptionResponse(
        caption=" ".join(words),
        concepts=[ConceptWeight(word=w, probability=p) for w, p in pipeline.top_concepts(state)],
        steps=steps,
    )
