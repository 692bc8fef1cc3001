from fastapi import APIRouter, HTTPException
from varcalc.exceptions import ChartError, InvalidArgumentError, DimensionError, SolverError, SpecError, StructureError, UnknownProblemError
from varcalc.schemas.schemas import CatalogResponse, CheckReport, CheckRequest, RunRequest, RunResponse
from varcalc.services.catalog import CatalogService
from varcalc.services.invariants import CheckService
from varcalc.services.runner import RunService
from varcalc.services.specfile import parse_spec
from typing import Optional
import math
import logging

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get("/catalog", response_model=CatalogResponse)
def get_catalog():
    """List the built-in problems"""
    entries = CatalogService.entries()
    return CatalogResponse(problems=entries, total=len(entries))


@router.post("/run", response_model=RunResponse)
def run_problem(request: RunRequest):
    """Run a catalog problem or an inline spec file and return the sampled trajectory"""
    try:
        if request.catalog is not None:
            spec = CatalogService.get(request.catalog)
        else:
            spec = parse_spec(request.spec_text, source="<request>")
        spec = RunService.apply_overrides(spec, dt=request.dt, t1=request.t1, steps=request.steps)
        result = RunService.run(spec)
    except UnknownProblemError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except (SpecError, InvalidArgumentError, DimensionError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except (SolverError, ChartError, StructureError) as e:
        logger.error(f"run failed: {type(e).__name__}: {e}")
        raise HTTPException(status_code=422, detail=f"{type(e).__name__}: {e}")

    traj = result.trajectory
    rows = [[float(t)] + [x if math.isfinite(x) else None for x in row.tolist()]
            for t, row in zip(traj.times, traj.states)]
    return RunResponse(time_label=traj.time_label, labels=list(traj.labels), rows=rows, summary=result.summary)


@router.post("/check", response_model=CheckReport)
def run_checks(request: Optional[CheckRequest] = None):
    """Run the invariant suite, optionally filtered by name"""
    return CheckService.run(only=request.only if request else None)
