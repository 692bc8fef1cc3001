from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from varcalc import __version__
from varcalc.routers.routes import router
import os

app = FastAPI(
    title="varcalc API",
    description="Variational calculus on algebroids and groupoids: continuous, discrete and optimal-control solvers",
    version=__version__,
    docs_url="/docs",
    redoc_url="/redoc"
)


def get_cors_origins():
    """Get CORS origins based on environment"""
    dev_origins = [
        "http://localhost:3000",
        "http://localhost:5173",
        "http://127.0.0.1:3000",
    ]

    # Custom origins from environment variable
    custom_origins = os.getenv("CORS_ORIGINS", "").split(",")
    custom_origins = [origin.strip() for origin in custom_origins if origin.strip()]

    # In development, allow all origins for testing
    if os.getenv("ENVIRONMENT", "development") == "development":
        return ["*"]

    return list(set(dev_origins + custom_origins))


app.add_middleware(
    CORSMiddleware,
    allow_origins=get_cors_origins(),
    allow_credentials=True,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["Accept", "Content-Type", "Authorization", "X-Requested-With"],
)

app.include_router(router, prefix="/api/v1", tags=["varcalc"])


@app.get("/")
def root():
    return {
        "message": "Welcome to the varcalc API",
        "version": __version__,
        "docs": "/docs",
        "redoc": "/redoc"
    }


@app.get("/health")
def health_check():
    return {"status": "healthy", "service": "varcalc"}
