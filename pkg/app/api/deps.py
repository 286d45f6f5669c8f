import logging
from functools import lru_cache
from pathlib import Path
from typing import Optional

from fastapi import HTTPException

from app.core.config import WorldConfig, settings
from app.core.errors import DualAttentionError
from app.models.pipeline import ScenePipeline
from app.schemas.inference import SceneRequest
from app.training.checkpoint import load_pipeline
from app.world.scenes import Scene, SceneObject, build_scene, generate_scene

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def _cached_pipeline(path: str, modified_ns: int) -> ScenePipeline:
    # modified_ns only keys the cache
    logger.info("loading checkpoint %s", path)
    return load_pipeline(path)


def checkpoint_status(path: Optional[str]) -> bool:
    return bool(path) and Path(path).is_file()


def _pipeline(path: Optional[str], task: str) -> ScenePipeline:
    if not checkpoint_status(path):
        raise HTTPException(status_code=503, detail=f"no {task} checkpoint is configured")
    try:
        pipeline = _cached_pipeline(str(path), Path(path).stat().st_mtime_ns)
        pipeline.require(task)
    except DualAttentionError as e:
        raise HTTPException(status_code=503, detail=str(e))
    return pipeline


def get_caption_pipeline() -> ScenePipeline:
    return _pipeline(settings.CAPTION_CHECKPOINT, "caption")


def get_vqa_pipeline() -> ScenePipeline:
    return _pipeline(settings.VQA_CHECKPOINT, "vqa")


def scene_for(request: SceneRequest, pipeline: ScenePipeline) -> Scene:
    config = pipeline.config
    world = WorldConfig(grid_size=config.grid_size, grid_h=config.grid_h, grid_w=config.grid_w, max_objects=min(4, config.regions))
    if request.seed is not None:
        return generate_scene(request.seed, world)
    objects = [SceneObject(**spec.model_dump()) for spec in request.objects]
    return build_scene(objects, world)
