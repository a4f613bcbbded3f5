"""Read-only HTTP service over an opened replay store.

Ingest stays on the CLI; this process serves an immutable store, so any
number of requests can run concurrently and identical requests return
identical bodies. Reloading a changed store means restarting the process.
Engine errors map to one stable error code each: client mistakes are 400,
store I/O problems are 500.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from ..aggregates import StatisticRequest
from ..cube import query_pattern
from ..detectors import whatif_replay
from ..errors import EngineError, EpochRangeError
from ..ingest import LeafTable
from ..schema import CohortPattern
from ..store import ReplayStore
from .models import (
    ApiError,
    CohortResponse,
    SchemaResponse,
    WhatifRequest,
    WhatifResponse,
    build_cohort_response,
    build_schema_response,
    build_whatif_response,
)

DEFAULT_PAGE_LIMIT = 10_000


class StoreHandle:
    """Lazily opened store with a per-epoch table cache."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._store: ReplayStore | None = None
        self._tables: dict[int, LeafTable] = {}
        self._lock = threading.Lock()

    def store(self) -> ReplayStore:
        with self._lock:
            if self._store is None:
                self._store = ReplayStore.open(self.path)
            return self._store

    def tables_in_range(self, lo: int, hi: int) -> tuple[list[LeafTable], list[int]]:
        if lo > hi:
            raise EpochRangeError(f"from epoch {lo} > to epoch {hi}")
        store = self.store()
        present = [i for i in store.epoch_indexes if lo <= i <= hi]
        missing = sorted(set(range(lo, hi + 1)) - set(present))
        tables = []
        with self._lock:
            for i in present:
                table = self._tables.get(i)
                if table is None:
                    self._tables[i] = table = store.load(i)
                tables.append(table)
        return tables, missing


def create_app(store_path: str | Path, cors_origins: Sequence[str] = ()) -> FastAPI:
    app = FastAPI(title="aha replay service", version="0.1.0")
    handle = StoreHandle(store_path)

    if cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        error = ApiError(code=exc.api_code, message=str(exc))
        status = 500 if error.code == "io" else 400
        return JSONResponse(status_code=status, content=error.model_dump())

    @app.get("/schema", response_model=SchemaResponse)
    def get_schema() -> SchemaResponse:
        store = handle.store()
        return build_schema_response(store.schema, store.epoch_indexes)

    @app.get("/cohort", response_model=CohortResponse, response_model_by_alias=True)
    def get_cohort(
        pattern: str = Query(...),
        stat: str = Query(...),
        from_epoch: int = Query(..., alias="from"),
        to_epoch: int = Query(..., alias="to"),
        limit: int = Query(DEFAULT_PAGE_LIMIT, ge=1),
        offset: int = Query(0, ge=0),
    ) -> CohortResponse:
        store = handle.store()
        parsed = CohortPattern.parse(pattern, store.schema.attributes)
        request = StatisticRequest.parse(stat)
        tables, missing = handle.tables_in_range(from_epoch, to_epoch)
        values = query_pattern(tables, parsed, [request])
        return build_cohort_response(
            parsed, store.schema, request, values, missing,
            from_epoch, to_epoch, limit, offset,
        )

    @app.post("/whatif", response_model=WhatifResponse, response_model_by_alias=True)
    def post_whatif(body: WhatifRequest) -> WhatifResponse:
        store = handle.store()
        patterns = [
            CohortPattern.parse(text, store.schema.attributes) for text in body.patterns
        ]
        configs = [model.to_config() for model in body.configs]
        tables, missing = handle.tables_in_range(body.from_epoch, body.to_epoch)
        results = whatif_replay(tables, patterns, configs, body.from_epoch, body.to_epoch)
        return build_whatif_response(
            results, store.schema, missing, body.from_epoch, body.to_epoch
        )

    return app
