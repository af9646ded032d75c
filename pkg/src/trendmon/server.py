"""HTTP+JSON API over a MonitorEngine: round state, neighbor tables,
projections, forecasts, keyword management, and proposal decisions.
Errors come back as {code, reason, detail}."""

from __future__ import annotations

import logging

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .engine import MonitorEngine
from .errors import (IntervalNotElapsedError, ProposalValidationError,
                     RoundFailedError, StaleProposalError, TokenNotFoundError,
                     TrendmonError)

logger = logging.getLogger(__name__)


def _error(status: int, reason: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": status, "reason": reason, "detail": detail})


def create_app(engine: MonitorEngine) -> FastAPI:
    app = FastAPI(title="trendmon", version="0.1.0")

    @app.exception_handler(TokenNotFoundError)
    async def _not_found(request: Request, exc: TokenNotFoundError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ProposalValidationError)
    async def _validation(request: Request, exc: ProposalValidationError):
        return _error(400, exc.reason, str(exc))

    @app.exception_handler(StaleProposalError)
    async def _stale(request: Request, exc: StaleProposalError):
        return _error(409, "stale_proposal", str(exc))

    @app.exception_handler(IntervalNotElapsedError)
    async def _too_early(request: Request, exc: IntervalNotElapsedError):
        return _error(403, "interval_not_elapsed", str(exc))

    @app.exception_handler(RoundFailedError)
    async def _failed(request: Request, exc: RoundFailedError):
        return _error(502, "round_failed", str(exc))

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return _error(400, "invalid", str(exc))

    @app.exception_handler(TrendmonError)
    async def _other(request: Request, exc: TrendmonError):
        return _error(500, "internal", str(exc))

    @app.get("/state")
    def get_state():
        snap = engine.snapshot
        return {"state": engine.state.to_dict(),
                "snapshot": snap.to_dict() if snap else None}

    @app.get("/keywords")
    def get_keywords():
        return {"round": engine.state.current_round, "keywords": engine.keyword_info()}

    @app.post("/keywords")
    def add_keyword(payload: dict = Body(...)):
        token = payload.get("token")
        if not isinstance(token, str) or not token:
            raise ProposalValidationError("missing token", [])
        next_set = engine.add_keyword(token)
        return {"round": engine.state.current_round, "keywords": list(next_set.keywords)}

    @app.delete("/keywords/{token}")
    def delete_keyword(token: str):
        next_set = engine.remove_keyword(token)
        return {"round": engine.state.current_round, "keywords": list(next_set.keywords)}

    @app.get("/neighbors/{token}")
    def get_neighbors(token: str, k: int = Query(30, ge=1),
                      w_distance: float = 1.0, w_frequency: float = 1.0):
        return engine.neighbor_rows(token, k, w_distance, w_frequency)

    @app.get("/projection")
    def get_projection(tokens: str, seed: int | None = None, method: str = "tsne"):
        requested = [t for t in tokens.split(",") if t]
        return {"points": engine.projection(requested, seed=seed, method=method)}

    @app.get("/forecast/{token}")
    def get_forecast(token: str, h: int = Query(15, ge=1, le=24)):
        return engine.forecast_for(token, h)

    @app.get("/proposal")
    def get_proposal():
        return {"proposal": engine.pending.to_dict() if engine.pending else None}

    @app.post("/proposal/decision")
    def decide(payload: dict = Body(...)):
        record = engine.decide(additions=payload.get("additions", []),
                               removals=payload.get("removals", []),
                               forced=payload.get("forced", []))
        return {"record": record,
                "keywords": list(engine.state.keyword_set.keywords)}

    @app.post("/round/advance")
    def advance():
        snapshot = engine.refresh_round()
        return {"round": snapshot.round, "keywords": list(engine.state.keyword_set.keywords),
                "pending_proposal": snapshot.pending_proposal}

    return app
