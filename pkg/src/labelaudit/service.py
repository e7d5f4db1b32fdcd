"""HTTP service hosting the proposal review workflow.

All review state lives in an append-only verdict log; the dataset and the
proposal ranking are immutable snapshots loaded at startup.  Statistics are
a pure fold of the log, so restarting the service over the same files
reproduces them exactly.  Verdict writes funnel through one lock.
"""

from __future__ import annotations

import mimetypes
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import HTMLResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import io
from .datamodel import ERROR_KINDS, VERDICT_VALUES, Dataset, Proposal, VerdictRecord
from .errors import InputError, LabelAuditError
from .evaluation import verdict_stats
from .geometry import iou

IMAGE_ROOT_ENV = "LABELAUDIT_IMAGE_ROOT"
UI_DIR_ENV = "LABELAUDIT_UI_DIR"

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>labelaudit review</title></head>
<body>
<h1>labelaudit review service</h1>
<p>No UI bundle is installed. The JSON API is live under <code>/api</code>:</p>
<ul>
<li>GET /api/session</li>
<li>GET /api/proposals?offset=0&amp;limit=50</li>
<li>GET /api/image/{image_id} and /api/image/{image_id}/labels</li>
<li>POST /api/verdict</li>
<li>GET /api/stats</li>
</ul>
</body></html>
"""


@dataclass(frozen=True)
class ReviewSession:
    """Paths and limits for one review run over a ranked proposal file."""

    session_id: str
    dataset_path: str
    proposals_path: str
    verdicts_path: str
    image_root: str | None = None
    k: int = 200
    require_no_label_overlap: bool = False
    alpha: float = 0.3
    ui_dir: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise InputError("alpha must be in (0, 1]")


def filter_no_label_overlap(
    proposals: list[Proposal], noisy: Dataset, alpha: float
) -> list[Proposal]:
    """Keep proposals whose box overlaps no noisy label of its image at alpha
    or more, regardless of class.  Focuses a review session on unlabeled
    objects (candidate missing labels)."""
    kept = []
    for prop in proposals:
        labels = noisy.labels_by_image.get(prop.image_id, [])
        if all(iou(prop.box, l.box) < alpha for l in labels):
            kept.append(prop)
    return kept


class _ReviewState:
    def __init__(self, session: ReviewSession):
        self.session = session
        self.dataset = io.load_dataset(session.dataset_path)
        proposals = io.load_proposals(session.proposals_path)
        if session.require_no_label_overlap:
            proposals = filter_no_label_overlap(proposals, self.dataset, session.alpha)
        self.proposals = proposals
        self.k = min(session.k, len(proposals))
        self.lock = threading.Lock()
        self.verdicts: list[VerdictRecord] = []
        if os.path.exists(session.verdicts_path):
            self.verdicts = io.load_verdicts(session.verdicts_path)
        root = session.image_root or os.environ.get(IMAGE_ROOT_ENV)
        self.image_root = Path(root) if root else None

    def latest(self) -> dict[int, VerdictRecord]:
        latest: dict[int, VerdictRecord] = {}
        for v in self.verdicts:
            latest[v.proposal_rank] = v
        return latest

    def stats(self) -> dict:
        return verdict_stats(self.verdicts)


def _verdict_payload(record: VerdictRecord) -> dict:
    return {
        "proposal_rank": record.proposal_rank,
        "verdict": record.verdict,
        "error_types": list(record.error_types),
        "reviewer": record.reviewer,
        "timestamp": record.timestamp,
    }


def _proposal_payload(rank: int, prop: Proposal, verdict: VerdictRecord | None) -> dict:
    return {
        "rank": rank,
        "image_id": prop.image_id,
        "box": [prop.box.cx, prop.box.cy, prop.box.w, prop.box.h],
        "key": prop.key,
        "method": prop.method,
        "predicted_class": prop.predicted_class,
        "components": dict(prop.components),
        "source": prop.source,
        "label_ref": prop.label_ref,
        "verdict": _verdict_payload(verdict) if verdict else None,
    }


def create_app(session: ReviewSession) -> FastAPI:
    state = _ReviewState(session)
    app = FastAPI(title="labelaudit review service")
    app.state.review = state

    @app.exception_handler(LabelAuditError)
    async def _data_error(_request, exc: LabelAuditError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/session")
    def get_session():
        stats = state.stats()
        return {
            "session_id": session.session_id,
            "k": state.k,
            "num_proposals": len(state.proposals),
            "method": state.proposals[0].method if state.proposals else None,
            "reviewed": stats["reviewed"],
            "num_images": len(state.dataset.images),
            "num_labels": len(state.dataset.labels),
            "class_names": list(state.dataset.class_names),
            "has_images": state.image_root is not None,
        }

    @app.get("/api/proposals")
    def get_proposals(offset: int = 0, limit: int = 50):
        if offset < 0 or limit < 1:
            raise HTTPException(400, "offset must be >= 0 and limit >= 1")
        latest = state.latest()
        end = min(offset + min(limit, 500), state.k)
        items = [
            _proposal_payload(idx + 1, state.proposals[idx], latest.get(idx + 1))
            for idx in range(min(offset, state.k), end)
        ]
        return {"offset": offset, "total": state.k, "items": items}

    @app.get("/api/image/{image_id}")
    def get_image(image_id: int):
        image = state.dataset.images_by_id.get(image_id)
        if image is None:
            raise HTTPException(404, f"unknown image id {image_id}")
        if state.image_root is None or not image.file_name:
            raise HTTPException(404, "no image files configured for this session")
        path = state.image_root / image.file_name
        if not path.is_file():
            raise HTTPException(404, f"image file not found: {image.file_name}")
        media_type = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media_type)

    @app.get("/api/image/{image_id}/labels")
    def get_labels(image_id: int):
        image = state.dataset.images_by_id.get(image_id)
        if image is None:
            raise HTTPException(404, f"unknown image id {image_id}")
        labels = state.dataset.labels_by_image.get(image_id, [])
        names = state.dataset.class_names
        return {
            "image_id": image_id,
            "width": image.width,
            "height": image.height,
            "file_name": image.file_name,
            "labels": [
                {
                    "id": l.id,
                    "class_id": l.class_id,
                    "class_name": names[l.class_id - 1] if l.class_id <= len(names) else str(l.class_id),
                    "box": [l.box.cx, l.box.cy, l.box.w, l.box.h],
                }
                for l in labels
            ],
        }

    @app.post("/api/verdict")
    async def post_verdict(request: Request):
        try:
            data = await request.json()
        except Exception:
            raise HTTPException(400, "body must be JSON")
        if not isinstance(data, dict):
            raise HTTPException(400, "body must be a JSON object")
        rank = data.get("proposal_rank")
        if not isinstance(rank, int) or isinstance(rank, bool) or not 1 <= rank <= state.k:
            raise HTTPException(400, f"proposal_rank must be an integer in [1, {state.k}]")
        verdict = data.get("verdict")
        if verdict not in VERDICT_VALUES:
            raise HTTPException(400, f"verdict must be one of {VERDICT_VALUES}")
        types = data.get("error_types", [])
        if not isinstance(types, list) or any(t not in ERROR_KINDS for t in types):
            raise HTTPException(400, f"error_types must be a list drawn from {ERROR_KINDS}")
        record = VerdictRecord(
            proposal_rank=rank,
            verdict=verdict,
            error_types=tuple(types),
            reviewer=str(data.get("reviewer", "")),
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        with state.lock:
            io.append_verdict(session.verdicts_path, record)
            state.verdicts.append(record)
            stats = state.stats()
        return {"ok": True, "record": _verdict_payload(record), "stats": stats}

    @app.get("/api/stats")
    def get_stats():
        return state.stats()

    ui_dir = session.ui_dir or os.environ.get(UI_DIR_ENV)
    if ui_dir and (Path(ui_dir) / "index.html").is_file():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
