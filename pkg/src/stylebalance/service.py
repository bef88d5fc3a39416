"""HTTP review service: a thin veneer over the qc-review operations.

Endpoints serve queue state, item metadata, image bytes, and accept the
review decisions; every mutation goes through the single-writer decision
log. Concurrent reviewers are reconciled by the prior_state check: a
stale transition comes back as a 409 conflict instead of silently
winning. When a built UI bundle is configured it is served at the root.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .qc import ConflictError, ReviewError, ReviewItem, ReviewQueue, STATES


class FlagsOut(BaseModel):
    clipped_fraction: float
    structure_score: float
    severity: str


class ItemOut(BaseModel):
    item_id: str
    state: str
    source_id: str
    source_domain: str
    target_domain: str
    copy_index: int
    flags: FlagsOut


class QueueOut(BaseModel):
    items: list[ItemOut]


class DecisionIn(BaseModel):
    item_id: str
    prior_state: str
    new_state: str
    reviewer: str


class DecisionOut(BaseModel):
    item_id: str
    state: str


class ProgressOut(BaseModel):
    counts: dict[str, int]
    predicted: dict[str, int]
    ratio: float | None
    balanced: bool | None
    tolerance: float


def _item_out(item: ReviewItem) -> ItemOut:
    return ItemOut(
        item_id=item.item_id,
        state=item.state,
        source_id=item.source_id,
        source_domain=item.source_domain,
        target_domain=item.target_domain,
        copy_index=item.copy_index,
        flags=FlagsOut(
            clipped_fraction=item.flags.clipped_fraction,
            structure_score=item.flags.structure_score,
            severity=item.flags.severity,
        ),
    )


def create_app(
    queue: ReviewQueue, tolerance: Fraction, ui_dir: Path | None = None
) -> FastAPI:
    app = FastAPI(title="stylebalance review")

    @app.get("/api/queue", response_model=QueueOut)
    def get_queue(state: str | None = Query(default=None)):
        if state is not None and state not in STATES:
            raise HTTPException(status_code=422, detail=f"unknown state {state!r}")
        items = [
            _item_out(item)
            for item in queue.items.values()
            if state is None or item.state == state
        ]
        items.sort(key=lambda i: i.item_id)
        return QueueOut(items=items)

    @app.get("/api/item/{item_id}", response_model=ItemOut)
    def get_item(item_id: str):
        item = queue.items.get(item_id)
        if item is None:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        return _item_out(item)

    @app.get("/api/image/{item_id}")
    def get_image(item_id: str, which: str = Query(default="generated")):
        item = queue.items.get(item_id)
        if item is None:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        if which == "source":
            path = Path(item.source_image_path)
        elif which == "generated":
            path = Path(item.generated_image_path)
        else:
            raise HTTPException(status_code=422, detail="which must be source|generated")
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"image file missing: {path}")
        media = "image/png" if path.suffix.lower() == ".png" else "image/jpeg"
        return Response(content=path.read_bytes(), media_type=media)

    @app.post("/api/decision", response_model=DecisionOut)
    def post_decision(decision: DecisionIn):
        try:
            item = queue.decide(
                decision.item_id,
                decision.new_state,
                decision.reviewer,
                expected_prior=decision.prior_state,
            )
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except ReviewError as exc:
            status = 404 if "unknown item" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc)) from None
        return DecisionOut(item_id=item.item_id, state=item.state)

    @app.get("/api/progress", response_model=ProgressOut)
    def get_progress():
        counts, predicted = queue.summary()
        values = list(predicted.values())
        ratio = None
        if values and min(values) > 0:
            ratio = max(values) / min(values)
        return ProgressOut(
            counts=counts,
            predicted=predicted,
            ratio=ratio,
            balanced=None if ratio is None else ratio <= float(tolerance),
            tolerance=float(tolerance),
        )

    if ui_dir is not None and ui_dir.exists():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(queue_dir: Path, tolerance: Fraction, bind: str, ui_dir: Path | None) -> None:
    """Run the review service until terminated."""
    import uvicorn

    queue = ReviewQueue.load(queue_dir)
    app = create_app(queue, tolerance, ui_dir)
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8765), log_level="info")
