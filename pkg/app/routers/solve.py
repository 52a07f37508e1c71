"""
Solve Router
Run an MEU solver on an influence diagram sent as ID text or a UAI upload
"""

import logging
from typing import Dict, List, Literal, Optional

from fastapi import APIRouter, File, Form, UploadFile
from pydantic import BaseModel, Field

from ..evaluate import policy_map
from ..formats.convert import bn_to_id
from ..formats.idfile import parse_id
from ..formats.uai import parse_uai
from ..models import AlgorithmSpec, InfluenceDiagram, SolveResult
from ..solvers.restarts import run_with_restarts

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/solve", tags=["Solve"])


# ============================================
# REQUEST/RESPONSE MODELS
# ============================================
class SolveOptions(BaseModel):
    algo: Literal["spu", "bp0", "anneal", "anneal-perturbed", "prox"] = "prox"
    w: Literal["one", "harmonic"] = "one"
    junction: Literal["tree", "loopy"] = "tree"
    restarts: int = Field(default=1, ge=1, le=50)
    seed: int = 0
    tol: float = Field(default=AlgorithmSpec().tol, gt=0.0)
    max_iters: int = Field(default=AlgorithmSpec().max_iters, ge=1, le=10_000)
    inner_iters: int = Field(default=AlgorithmSpec().inner_iters, ge=1)
    damping: float = Field(default=0.0, ge=0.0, lt=1.0)
    include_trace: bool = False

    def spec(self) -> AlgorithmSpec:
        return AlgorithmSpec(
            variant=self.algo,
            weights=self.w,
            junction=self.junction,
            restarts=self.restarts,
            seed=self.seed,
            tol=self.tol,
            max_iters=self.max_iters,
            inner_iters=self.inner_iters,
            damping=self.damping,
        )


class SolveRequest(SolveOptions):
    diagram: str


class SolveResponse(BaseModel):
    success: bool = True
    algorithm: str
    junction: str
    eu: float
    log_eu: float
    strategy: Dict[int, List[int]]
    iterations: int
    converged: bool
    restart_index: int
    trace: Optional[List[dict]] = None


def _respond(diagram: InfluenceDiagram, options: SolveOptions) -> SolveResponse:
    result: SolveResult = run_with_restarts(diagram, options.spec())
    logger.info("solve %s/%s: EU %.6g after %d iterations", result.algorithm, result.junction, result.eu, result.iterations)
    return SolveResponse(
        algorithm=result.algorithm,
        junction=result.junction,
        eu=result.eu,
        log_eu=result.log_eu,
        strategy=policy_map(result.strategy),
        iterations=result.iterations,
        converged=result.converged,
        restart_index=result.restart_index,
        trace=[r.model_dump() for r in result.trace] if options.include_trace else None,
    )


# ============================================
# ENDPOINTS
# ============================================
@router.post("", response_model=SolveResponse)
def solve_diagram(req: SolveRequest):
    """Solve a diagram written in the ID text format"""
    return _respond(parse_id(req.diagram), req)


@router.post("/uai", response_model=SolveResponse)
async def solve_uai(
    file: UploadFile = File(...),
    decisions: float = Form(0.0),
    seed: int = Form(0),
    algo: str = Form("prox"),
    w: str = Form("one"),
    junction: str = Form("tree"),
    restarts: int = Form(1),
):
    """Convert an uploaded UAI Bayes net to an influence diagram, then solve it"""
    text = (await file.read()).decode("utf-8")
    options = SolveOptions(algo=algo, w=w, junction=junction, restarts=restarts, seed=seed)
    return _respond(bn_to_id(parse_uai(text), decisions, seed), options)
