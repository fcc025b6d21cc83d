from typing import Literal

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from ikg.errors import ConfigError, ConvergenceError
from ikg.services.gaussian_model import ProblemInstance
from ikg.services.presets import resolve_instance
from ikg.services.rates import allocation_for, brute_force_allocation

router = APIRouter(prefix="/rates", tags=["rates"])


class RatesRequest(BaseModel):
    preset: str | None = None
    goal: Literal["bai", "eps_good", "feasible"] | None = None
    instance: ProblemInstance | None = None
    policy: Literal["kg", "ikg", "ttei", "equal", "ikg_eps", "ikg_f"] = "ikg"
    beta: float | None = None


class OracleRequest(BaseModel):
    preset: str | None = None
    goal: Literal["bai", "eps_good", "feasible"] | None = None
    instance: ProblemInstance | None = None
    grid_step: float = Field(default=0.01, gt=0)


class AllocationResponse(BaseModel):
    kind: str
    k: int
    w: list[float]
    gamma: float
    residuals: dict[str, float]


def _raise_http(e: Exception):
    if isinstance(e, ConvergenceError):
        raise HTTPException(status_code=500, detail={"error": str(e), "residuals": e.residuals}) from e
    raise HTTPException(status_code=422, detail=str(e)) from e


@router.post("", response_model=AllocationResponse)
def compute_rates(request: RatesRequest):
    try:
        instance = resolve_instance(request.preset, request.goal, request.instance)
        return allocation_for(instance, request.policy, request.beta).to_report()
    except (ConfigError, ConvergenceError) as e:
        _raise_http(e)


@router.post("/oracle", response_model=AllocationResponse)
def compute_oracle(request: OracleRequest):
    try:
        instance = resolve_instance(request.preset, request.goal, request.instance)
        return brute_force_allocation(instance, request.grid_step).to_report()
    except (ConfigError, ConvergenceError) as e:
        _raise_http(e)
