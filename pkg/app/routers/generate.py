"""
Generate Router
Random and sensor-network influence diagrams in the ID text format
"""

from fastapi import APIRouter
from pydantic import BaseModel

from ..bench.generators import gen_random_id, gen_sensor_id
from ..formats.idfile import write_id
from ..models import InfluenceDiagram, RandomIdConfig, SensorNetConfig

router = APIRouter(prefix="/api/generate", tags=["Generate"])


class GeneratedDiagram(BaseModel):
    success: bool = True
    n_vars: int
    decisions: int
    utilities: int
    diagram: str


def _describe(diagram: InfluenceDiagram) -> GeneratedDiagram:
    return GeneratedDiagram(
        n_vars=diagram.n_vars,
        decisions=len(diagram.decision_ids),
        utilities=len(diagram.utilities),
        diagram=write_id(diagram),
    )


@router.post("/random", response_model=GeneratedDiagram)
def generate_random(cfg: RandomIdConfig):
    return _describe(gen_random_id(cfg))


@router.post("/sensor", response_model=GeneratedDiagram)
def generate_sensor(cfg: SensorNetConfig):
    return _describe(gen_sensor_id(cfg))
