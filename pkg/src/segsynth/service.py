"""HTTP facade over the synthesis engine and the metric suite.

A small JSON API backs the interactive frontend: upload a truth mask to
open a session, then preview or export synthetic segmentations produced
from explicit parameter values. Metric reports ride along with every
preview so the client never computes anything itself.

Sessions live in memory only. Each holds an immutable truth mask plus its
cached contour and is dropped after a configurable idle TTL. Masks travel
back to the client run-length encoded; export returns a small zip with
the synthetic mask image and a provenance record.
"""

import io
import json
import math
import threading
import time
import uuid
import zipfile
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from fastapi import FastAPI, File, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict, Field

from .errors import (
    ContourError,
    DegenerateContourError,
    EmptyMaskError,
    MaskFormatError,
    MetricError,
    RasterError,
    SegsynthError,
    SynthesisError,
)
from .mask_io import (
    BinaryMask,
    Contour,
    boundary_pixels,
    extract_contour,
    load_mask_bytes,
    mask_to_bytes,
    rasterize,
)
from .metrics import DIRECTIONS, METRIC_ORDER, evaluate_all
from .synth import (
    DEFAULT_STAGE_ORDER,
    AffineParams,
    FdParams,
    SeededRng,
    SpiculationParams,
    apply_pipeline,
)

MAX_SEED = 2**64 - 1


# ---------------------------------------------------------------------------
# session store

@dataclass(frozen=True)
class Session:
    id: str
    truth: BinaryMask
    contour: Contour  # cached; extracted once at upload
    truth_boundary: np.ndarray  # cached boundary_pixels(truth) for scoring
    created: float
    last_used: float


class SessionStore:
    """TTL-bounded concurrent map of immutable session records.

    Every access purges idle sessions and refreshes the hit entry by
    replacing it (records are frozen, so a touch swaps in a new one).
    """

    def __init__(self, ttl: float):
        if not (ttl > 0):
            raise ValueError("session ttl must be positive")
        self._ttl = float(ttl)
        self._lock = threading.Lock()
        self._items = {}

    def _purge(self, now: float) -> None:
        dead = [k for k, s in self._items.items() if now - s.last_used > self._ttl]
        for k in dead:
            del self._items[k]

    def put(self, session: Session) -> None:
        with self._lock:
            self._purge(time.monotonic())
            self._items[session.id] = session

    def get(self, session_id: str) -> Optional[Session]:
        now = time.monotonic()
        with self._lock:
            self._purge(now)
            session = self._items.get(session_id)
            if session is not None:
                session = replace(session, last_used=now)
                self._items[session_id] = session
            return session

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


# ---------------------------------------------------------------------------
# request bodies

class FdBody(BaseModel):
    """Fourier-descriptor stage: keep a detail fraction, jitter a range of it."""

    model_config = ConfigDict(extra="forbid")

    detail: float = Field(default=1.0, gt=0.0, le=1.0, allow_inf_nan=False,
                          description="fraction of descriptors kept")
    range: float = Field(default=0.0, ge=0.0, le=1.0, allow_inf_nan=False,
                         description="fraction of descriptors perturbed")
    magnitude: float = Field(default=0.0, ge=0.0, allow_inf_nan=False,
                             description="uniform perturbation scale")


class SpiculationBody(BaseModel):
    """One Gaussian radial bump; angles in degrees for slider friendliness."""

    model_config = ConfigDict(extra="forbid")

    center_deg: float = Field(allow_inf_nan=False, description="bump center angle")
    height: float = Field(allow_inf_nan=False,
                          description="radial peak offset in px; negative pulls inward")
    width_deg: float = Field(gt=0.0, allow_inf_nan=False, description="bump width")


class AffineBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resize_x: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    resize_y: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    rotate_deg: float = Field(default=0.0, allow_inf_nan=False)
    shift_dx: float = Field(default=0.0, allow_inf_nan=False)
    shift_dy: float = Field(default=0.0, allow_inf_nan=False)


class PreviewBody(BaseModel):
    """Explicit pipeline parameters; defaults are the identity transform."""

    model_config = ConfigDict(extra="forbid")

    fd: FdBody = Field(default_factory=FdBody)
    spiculations: List[SpiculationBody] = Field(default_factory=list)
    affine: AffineBody = Field(default_factory=AffineBody)
    seed: int = Field(default=0, ge=0, le=MAX_SEED,
                      description="drives the descriptor jitter draws")


# ---------------------------------------------------------------------------
# payload helpers

def encode_rle(mask: BinaryMask) -> dict:
    """Row-major run lengths, alternating and starting with background.

    counts[0] is 0 when the first pixel is foreground; the counts always
    sum to width*height.
    """
    flat = mask.pixels.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return {"width": mask.width, "height": mask.height,
            "counts": [int(c) for c in counts]}


def decode_rle(payload: dict) -> BinaryMask:
    """Inverse of encode_rle; used by tests and tooling, not by routes."""
    w, h = int(payload["width"]), int(payload["height"])
    counts = [int(c) for c in payload["counts"]]
    if any(c < 0 for c in counts) or sum(counts) != w * h:
        raise ValueError("run lengths must be non-negative and cover the frame")
    flat = np.zeros(w * h, dtype=bool)
    pos, value = 0, False
    for c in counts:
        if value:
            flat[pos:pos + c] = True
        pos += c
        value = not value
    return BinaryMask(flat.reshape(h, w))


def _contour_points(contour: Contour) -> list:
    return [[float(x), float(y)] for x, y in contour.points]


def _session_payload(session: Session) -> dict:
    return {
        "session_id": session.id,
        "width": session.truth.width,
        "height": session.truth.height,
        "foreground_pixels": session.truth.foreground_count,
        "contour": _contour_points(session.contour),
    }


def _metric_rows(report) -> list:
    rows = []
    for sym in METRIC_ORDER:
        row = {"symbol": sym, "direction": DIRECTIONS[sym],
               "value": report.value(sym)}
        reason = report.reasons.get(sym)
        if reason:
            row["reason"] = reason
        rows.append(row)
    return rows


def _run_pipeline(session: Session, body: PreviewBody):
    fd = FdParams(detail=body.fd.detail, range=body.fd.range,
                  magnitude=body.fd.magnitude)
    spiculations = [
        SpiculationParams(center=math.radians(s.center_deg), height=s.height,
                          width=math.radians(s.width_deg))
        for s in body.spiculations
    ]
    affine = AffineParams(
        resize_x=body.affine.resize_x, resize_y=body.affine.resize_y,
        rotate=math.radians(body.affine.rotate_deg),
        shift_dx=body.affine.shift_dx, shift_dy=body.affine.shift_dy,
    )
    contour = apply_pipeline(session.contour, fd, spiculations, affine,
                             rng=SeededRng(body.seed))
    try:
        mask = rasterize(contour, session.truth.width, session.truth.height)
    except RasterError as exc:
        raise SynthesisError("rasterize", str(exc)) from exc
    return contour, mask


_STAGE_BY_TYPE = {
    MaskFormatError: "upload",
    EmptyMaskError: "contour",
    DegenerateContourError: "contour",
    ContourError: "contour",
    RasterError: "rasterize",
    MetricError: "metrics",
}


def _not_found(session_id: str) -> JSONResponse:
    return JSONResponse(status_code=404,
                        content={"message": f"unknown session {session_id!r}"})


# ---------------------------------------------------------------------------
# app factory

def create_app(session_ttl: float = 3600.0, ui_dir=None) -> FastAPI:
    """Build the API app; ui_dir additionally mounts a static frontend at /."""
    app = FastAPI(
        title="segsynth service",
        version="0.1.0",
        description="Synthesize controllable segmentation errors on an "
                    "uploaded truth mask and score them with 20 metrics.",
    )
    store = SessionStore(session_ttl)
    app.state.store = store

    @app.exception_handler(SegsynthError)
    async def engine_error(request, exc: SegsynthError):
        if isinstance(exc, SynthesisError):
            stage = exc.stage
        else:
            stage = _STAGE_BY_TYPE.get(type(exc), "engine")
        return JSONResponse(status_code=422,
                            content={"stage": stage, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request, exc: RequestValidationError):
        fields = [{
            "field": ".".join(str(part) for part in err["loc"]),
            "message": err["msg"],
        } for err in exc.errors()]
        return JSONResponse(status_code=422, content={
            "message": "invalid parameters", "validation_errors": fields,
        })

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(store)}

    @app.post("/sessions", status_code=201)
    async def create_session(file: UploadFile = File(...)):
        """Open a session from an uploaded PNG or PGM truth mask."""
        data = await file.read()
        truth = load_mask_bytes(data)
        contour = extract_contour(truth)
        now = time.monotonic()
        session = Session(id=uuid.uuid4().hex, truth=truth, contour=contour,
                          truth_boundary=boundary_pixels(truth),
                          created=now, last_used=now)
        store.put(session)
        return _session_payload(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _not_found(session_id)
        return _session_payload(session)

    @app.post("/sessions/{session_id}/preview")
    def preview(session_id: str, body: PreviewBody):
        """Synthesize with explicit parameters; return contour, RLE mask, metrics."""
        session = store.get(session_id)
        if session is None:
            return _not_found(session_id)
        contour, mask = _run_pipeline(session, body)
        report = evaluate_all(session.truth, mask,
                              truth_boundary=session.truth_boundary)
        return {
            "session_id": session.id,
            "contour": _contour_points(contour),
            "mask_rle": encode_rle(mask),
            "metrics": _metric_rows(report),
        }

    @app.post("/sessions/{session_id}/export")
    def export(session_id: str, body: PreviewBody):
        """Same pipeline as preview, delivered as a zip of mask + provenance."""
        session = store.get(session_id)
        if session is None:
            return _not_found(session_id)
        _, mask = _run_pipeline(session, body)
        provenance = {
            "seed": body.seed,
            "rng": SeededRng.algorithm,
            "stage_order": list(DEFAULT_STAGE_ORDER),
            "parameters": body.model_dump(exclude={"seed"}),
        }
        prov_bytes = (json.dumps(provenance, sort_keys=True, indent=2) + "\n"
                      ).encode("ascii")
        buf = io.BytesIO()
        # stored entries + frozen timestamps keep the archive byte-stable
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
            for name, payload in (("mask.png", mask_to_bytes(mask, "png")),
                                  ("provenance.json", prov_bytes)):
                info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
                info.external_attr = 0o644 << 16
                zf.writestr(info, payload)
        return Response(
            content=buf.getvalue(), media_type="application/zip",
            headers={"Content-Disposition": 'attachment; filename="export.zip"'},
        )

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def run_server(bind: str = "127.0.0.1:8080", session_ttl: float = 3600.0,
               ui_dir=None) -> None:
    """Blocking uvicorn runner behind the serve command."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind must look like HOST:PORT, got {bind!r}")
    uvicorn.run(create_app(session_ttl=session_ttl, ui_dir=ui_dir),
                host=host, port=int(port), log_level="info")
