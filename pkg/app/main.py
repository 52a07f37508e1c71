import logging
import os

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .errors import MeuError, ResourceCapError
from .routers import generate, solve

logging.basicConfig(
    level=os.getenv("MEU_LOG_LEVEL", "INFO"),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger("meubp.api")

VERSION = "1.0.0"
HTTP_METHODS = {"GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"}

app = FastAPI(
    title="MEU-BP API",
    description="Maximum expected utility solvers for influence diagrams",
    version=VERSION,
)

# =====================================================
# CORS
# =====================================================
ALLOWED_ORIGINS = [
    o.strip() for o in os.getenv("MEU_ALLOWED_ORIGINS", "http://localhost:3000,http://127.0.0.1:8000").split(",") if o.strip()
]

app.add_middleware(
    CORSMiddleware,
    allow_origins=ALLOWED_ORIGINS,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["*"],
    max_age=3600,
)


# =====================================================
# ERROR HANDLERS
# =====================================================
@app.exception_handler(ResourceCapError)
async def resource_cap_handler(request: Request, exc: ResourceCapError):
    return JSONResponse(status_code=413, content={"success": False, "error": str(exc)})


@app.exception_handler(MeuError)
async def meu_error_handler(request: Request, exc: MeuError):
    return JSONResponse(status_code=400, content={"success": False, "error": str(exc)})


@app.exception_handler(ValidationError)
async def validation_error_handler(request: Request, exc: ValidationError):
    return JSONResponse(status_code=422, content={"success": False, "error": str(exc)})


@app.exception_handler(Exception)
async def unhandled_error_handler(request: Request, exc: Exception):
    logger.exception("unhandled error on %s", request.url.path)
    return JSONResponse(status_code=500, content={"success": False, "error": "internal error"})


# ---------------------------------------------------------------------
# HEALTH ROUTES
# ---------------------------------------------------------------------
@app.get("/")
def root():
    return JSONResponse(
        content={
            "ok": True,
            "service": "meubp-api",
            "version": VERSION,
            "solvers": ["spu", "bp0", "anneal", "anneal-perturbed", "prox-one", "prox-harmonic"],
        }
    )


@app.get("/health")
def health():
    return JSONResponse(content={"status": "ok", "version": VERSION})


@app.get("/api/routes")
def list_routes():
    """Every documented path, included routers too."""
    paths = app.openapi().get("paths", {})
    routes = sorted((p, sorted(m.upper() for m in ops if m.upper() in HTTP_METHODS)) for p, ops in paths.items())
    return {"total_routes": len(routes), "routes": [{"path": p, "methods": m} for p, m in routes]}


# =====================================================
# ROUTERS
# =====================================================
app.include_router(solve.router)
app.include_router(generate.router)

print("\n📦 MEU-BP routers loaded:")
print("  ✅ solve, generate")
