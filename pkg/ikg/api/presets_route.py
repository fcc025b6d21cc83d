from fastapi import APIRouter, HTTPException
from pydantic import BaseModel

from ikg.errors import ConfigError
from ikg.services.gaussian_model import ProblemInstance
from ikg.services.presets import list_presets, preset, published_budgets, published_pfs

router = APIRouter(prefix="/presets", tags=["presets"])


class PresetSummaryResponse(BaseModel):
    name: str
    goal: str
    k: int
    m: int
    target: str


class PresetDetailResponse(BaseModel):
    instance: ProblemInstance
    published_budgets: list[int]
    published_pfs: dict[str, list[float]]


@router.get("", response_model=list[PresetSummaryResponse])
def get_presets():
    return list_presets()


@router.get("/{name}/{goal}", response_model=PresetDetailResponse)
def get_preset(name: str, goal: str):
    try:
        instance = preset(name, goal)
    except ConfigError as e:
        raise HTTPException(status_code=404, detail=str(e)) from e
    return PresetDetailResponse(
        instance=instance,
        published_budgets=list(published_budgets(name, goal)),
        published_pfs={k: list(v) for k, v in published_pfs(name, goal).items()},
    )
