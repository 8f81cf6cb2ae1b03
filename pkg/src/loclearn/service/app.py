from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from loclearn import __version__
from loclearn.errors import ConfigError, LoclearnError
from loclearn.service import handlers
from loclearn.service.schemas import (
    BudgetResponse,
    ErrorEstimateBody,
    EstimateRequest,
    ExperimentRequest,
    ExperimentResponse,
    NwEstimateBody,
    NwRequest,
    PreprocessRequest,
    PropertiesRequest,
    PropertiesResponse,
    QueryRequest,
    QueryResponse,
    RestoreRequest,
    SessionCreate,
    SessionInfo,
)


def create_app():
    app = FastAPI(title="loclearn", version=__version__)
    store = handlers.SessionStore()
    app.state.sessions = store

    @app.exception_handler(LoclearnError)
    async def _domain_error(request: Request, exc: LoclearnError):
        errors = [list(e) for e in exc.errors] if isinstance(exc, ConfigError) else []
        return JSONResponse(
            status_code=422, content={"error": type(exc).__name__, "detail": str(exc), "errors": errors}
        )

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"error": type(exc).__name__, "detail": str(exc), "errors": []})

    def _session(sid):
        try:
            return store.get(sid)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {sid}") from None

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/preprocess")
    def preprocess(req: PreprocessRequest):
        return handlers.do_preprocess(req)

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: SessionCreate):
        return handlers.create_session(req, store)

    @app.post("/sessions/restore", response_model=SessionInfo)
    def restore_session(req: RestoreRequest):
        return handlers.restore_session(req, store)

    @app.post("/sessions/{sid}/query", response_model=QueryResponse)
    def query(sid: str, req: QueryRequest):
        _session(sid)
        return handlers.query_session(sid, req, store)

    @app.get("/sessions/{sid}/budget", response_model=BudgetResponse)
    def budget(sid: str):
        _session(sid)
        return handlers.budget(sid, store)

    @app.get("/sessions/{sid}/checkpoint")
    def checkpoint(sid: str):
        _session(sid)
        return handlers.checkpoint(sid, store)

    @app.delete("/sessions/{sid}")
    def drop(sid: str):
        store.drop(sid)
        return {"deleted": sid}

    @app.post("/estimate-error", response_model=ErrorEstimateBody)
    def estimate(req: EstimateRequest):
        return handlers.do_estimate(req)

    @app.post("/nw-error", response_model=NwEstimateBody)
    def nw(req: NwRequest):
        return handlers.do_nw(req)

    @app.post("/experiment", response_model=ExperimentResponse)
    def experiment(req: ExperimentRequest):
        return handlers.do_experiment(req)

    @app.post("/properties", response_model=PropertiesResponse)
    def properties(req: PropertiesRequest):
        return handlers.do_properties(req)

    return app


app = create_app()
