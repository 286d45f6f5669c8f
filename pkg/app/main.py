import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.answers import router as answers_router
from app.api.captions import router as captions_router
from app.api.deps import checkpoint_status
from app.core.config import Settings, settings

logging.basicConfig(level=settings.LOG_LEVEL)
logger = logging.getLogger(__name__)


def create_app(config: Settings = settings) -> FastAPI:
    app = FastAPI(
        title=config.PROJECT_NAME,
        description="Captions and answers for synthetic scenes from trained dual-attention checkpoints",
        version="1.0.0",
    )

    if config.CORS_ORIGINS:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.CORS_ORIGINS,
            allow_credentials=True,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(Exception)
    async def global_exception_handler(request, exc):
        logger.exception("unhandled error on %s", request.url.path)
        return JSONResponse(
            status_code=500,
            content={"detail": str(exc)},
        )

    @app.get("/")
    def root():
        return {
            "message": config.PROJECT_NAME,
            "checkpoints": {
                "caption": checkpoint_status(config.CAPTION_CHECKPOINT),
                "vqa": checkpoint_status(config.VQA_CHECKPOINT),
            },
        }

    app.include_router(captions_router)
    app.include_router(answers_router)
    return app


app = create_app()

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
