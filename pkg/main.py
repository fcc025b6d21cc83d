from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from ikg import __version__
from ikg.api.presets_route import router as presets_router
from ikg.api.rates_route import router as rates_router

app = FastAPI(title="iKG Rates API", version=__version__)
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/")
def root():
    return {"ok": True, "name": "iKG Rates API"}


@app.get("/health")
def health():
    return {"status": "healthy"}


app.include_router(presets_router, prefix="/api")
app.include_router(rates_router, prefix="/api")
