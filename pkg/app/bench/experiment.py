"""Algorithm comparison grids over generated or converted diagrams."""
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..errors import MeuError, ResourceCapError
from ..formats.convert import bn_to_id
from ..formats.traces import write_report, write_trace
from ..formats.uai import UaiNetwork
from ..models import AlgorithmSpec, InfluenceDiagram, RandomIdConfig, SensorNetConfig, SolveResult
from ..params import section
from ..solvers.restarts import run_with_restarts
from .generators import copy_pair, blind_pair, gen_random_id, gen_sensor_id, signals_sent

logger = logging.getLogger(__name__)

_BENCH = section("bench")
_SENSOR = section("sensor")

REPORT_COLUMNS = [
    "model", "group", "algorithm", "junction", "log_meu", "baseline_log_meu", "rel_log_meu",
    "baseline", "iterations", "ms", "restart_index", "signals", "status", "error",
]
SUITES = ("random20", "alpha", "sensor", "pairs", "uai")


class BenchModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    group: str = ""
    diagram: InfluenceDiagram


class ExperimentReport(BaseModel):
    """Per (model, algorithm, junction) rows and their means per (group, algorithm, junction)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    rows: pd.DataFrame
    summary: pd.DataFrame
    traces: Dict[str, List] = Field(default_factory=dict)


def default_specs(restarts: int = 1, seed: int = 0, junctions: Sequence[str] = ("tree", "loopy")) -> List[AlgorithmSpec]:
    specs = []
    for junction in junctions:
        specs.append(AlgorithmSpec(variant="spu", junction=junction, restarts=restarts, seed=seed))
        specs.append(AlgorithmSpec(variant="bp0", junction=junction, restarts=restarts, seed=seed))
        specs.append(AlgorithmSpec(variant="anneal", junction=junction, restarts=restarts, seed=seed))
        specs.append(AlgorithmSpec(variant="anneal-perturbed", junction=junction, restarts=restarts, seed=seed))
        specs.append(AlgorithmSpec(variant="prox", weights="one", junction=junction, restarts=restarts, seed=seed))
        specs.append(AlgorithmSpec(variant="prox", weights="harmonic", junction=junction, restarts=restarts, seed=seed))
    return specs


def _baseline(diagram: InfluenceDiagram, specs: Sequence[AlgorithmSpec], done: Dict[str, SolveResult]) -> tuple[Optional[SolveResult], str]:
    """SPU on the junction tree, or SPU on the loopy graph when the tree is too large."""
    if "spu/tree" in done:
        return done["spu/tree"], "spu-tree"
    restarts = max((s.restarts for s in specs), default=1)
    seed = min((s.seed for s in specs), default=0)
    try:
        return run_with_restarts(diagram, AlgorithmSpec(variant="spu", junction="tree", restarts=restarts, seed=seed)), "spu-tree"
    except ResourceCapError:
        logger.warning("junction tree too large for the SPU baseline; falling back to the loopy graph")
    if "spu/loopy" in done:
        return done["spu/loopy"], "spu-loopy"
    try:
        return run_with_restarts(diagram, AlgorithmSpec(variant="spu", junction="loopy", restarts=restarts, seed=seed)), "spu-loopy"
    except MeuError as e:
        logger.warning("SPU baseline failed: %s", e)
        return None, "none"


def run_experiment(
    models: Sequence[BenchModel],
    specs: Sequence[AlgorithmSpec],
    output: str | Path | None = None,
) -> ExperimentReport:
    """Every (model, spec) pair through the restart driver; failures become report rows."""
    if not models or not specs:
        raise ValueError("need at least one model and one algorithm spec")
    records, traces = [], {}
    for bm in models:
        done: Dict[str, SolveResult] = {}
        staged = []
        for spec in specs:
            started = time.perf_counter()
            row = {"model": bm.name, "group": bm.group, "algorithm": spec.label, "junction": spec.junction}
            try:
                result = run_with_restarts(bm.diagram, spec)
            except (MeuError, ArithmeticError) as e:
                logger.warning("%s on %s/%s failed: %s", spec.label, bm.name, spec.junction, e)
                row.update(status="failed", error=str(e), ms=(time.perf_counter() - started) * 1000.0)
                staged.append((row, None))
                continue
            done[f"{spec.label}/{spec.junction}"] = result
            traces.setdefault(bm.name, []).extend(r for run in result.restart_traces for r in run)
            row.update(
                log_meu=result.log_eu,
                iterations=result.iterations,
                ms=(time.perf_counter() - started) * 1000.0,
                restart_index=result.restart_index,
                signals=signals_sent(bm.diagram, result.strategy),
                status="ok",
                error="",
            )
            staged.append((row, result))
        base, flag = _baseline(bm.diagram, specs, done)
        for row, result in staged:
            row["baseline"] = flag
            if base is not None:
                row["baseline_log_meu"] = base.log_eu
                if result is not None:
                    row["rel_log_meu"] = result.log_eu - base.log_eu
            records.append(row)

    rows = pd.DataFrame.from_records(records, columns=REPORT_COLUMNS)
    ok = rows[rows["status"] == "ok"]
    summary = (
        ok.groupby(["group", "algorithm", "junction"], sort=True)[["log_meu", "rel_log_meu", "iterations", "ms"]]
        .mean()
        .reset_index()
    )
    summary["failures"] = [
        int(((rows["group"] == g) & (rows["algorithm"] == a) & (rows["junction"] == j) & (rows["status"] != "ok")).sum())
        for g, a, j in zip(summary["group"], summary["algorithm"], summary["junction"])
    ]
    report = ExperimentReport(rows=rows, summary=summary, traces=traces)
    if output is not None:
        write_experiment(report, output)
    return report


def write_experiment(report: ExperimentReport, output: str | Path) -> None:
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report.rows, out / "report.csv")
    if not report.summary.empty:
        write_report(report.summary, out / "summary.csv")
    for name, rows in report.traces.items():
        if rows:
            write_trace(rows, out / f"{name}_trace.csv")


def build_suite(
    suite: str,
    trials: int = int(_BENCH.get("trials", 20)),
    seed: int = 0,
    *,
    random_cfg: RandomIdConfig | None = None,
    sensor_cfg: SensorNetConfig | None = None,
    network: UaiNetwork | None = None,
    decision_fraction: float | None = None,
) -> List[BenchModel]:
    random_cfg = random_cfg or RandomIdConfig()
    sensor_cfg = sensor_cfg or SensorNetConfig()
    models = []
    if suite == "random20":
        for frac in _BENCH.get("fraction_sweep", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]):
            for t in range(trials):
                cfg = random_cfg.model_copy(update={"decision_fraction": float(frac), "seed": seed + t})
                models.append(BenchModel(name=f"random-f{frac}-t{t}", group=f"fraction={frac}", diagram=gen_random_id(cfg)))
    elif suite == "alpha":
        for alpha in _BENCH.get("alpha_sweep", [0.25, 0.5, 1.0, 2.0]):
            for t in range(trials):
                cfg = random_cfg.model_copy(update={"dirichlet_alpha": float(alpha), "gamma_alpha": float(alpha), "seed": seed + t})
                models.append(BenchModel(name=f"random-a{alpha}-t{t}", group=f"alpha={alpha}", diagram=gen_random_id(cfg)))
    elif suite == "sensor":
        for cost in _SENSOR.get("cost_sweep", [0.0, 0.5, 1.0, 1.5, 2.0]):
            cfg = sensor_cfg.model_copy(update={"cost": float(cost), "seed": seed})
            models.append(BenchModel(name=f"sensor-c{cost}", group=f"cost={cost}", diagram=gen_sensor_id(cfg)))
    elif suite == "pairs":
        models = [BenchModel(name="copy-pair", group="pairs", diagram=copy_pair()), BenchModel(name="blind-pair", group="pairs", diagram=blind_pair())]
    elif suite == "uai":
        if network is None:
            raise ValueError("the uai suite needs a network")
        frac = random_cfg.decision_fraction if decision_fraction is None else decision_fraction
        for t in range(trials):
            models.append(BenchModel(name=f"uai-t{t}", group=f"fraction={frac}", diagram=bn_to_id(network, frac, seed + t)))
    else:
        raise ValueError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")
    logger.info("suite %s: %d models", suite, len(models))
    return models
