"""HTTP front end: every write becomes a StateChangeRequest for the platform's monitor.

Requests are serialized through one lock, so the HTTP layer may accept
connections concurrently while mediation stays single-file.
"""

import threading
import time
from typing import Annotated

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.responses import JSONResponse

from ..errors import DeviceOffline, HomeError, InvalidValue, UnknownVerb
from ..model import AttributeValue, Principal
from ..monitor import AhoChange, DeviceAttributeChange, MediationOutcome, MediationStatus
from ..platform import PhysicalAction, Platform
from .schemas import (
    AdvanceRequest,
    Denial,
    MediationResponse,
    NotificationModel,
    PhysicalRequest,
    PoliciesResponse,
    StatesResponse,
    ValueWrite,
)

_HTTP = {
    MediationStatus.APPLIED: 200,
    MediationStatus.DENIED_PERMISSION: 403,
    MediationStatus.DENIED_ENDORSEMENT: 409,
    MediationStatus.DENIED_TAMPER: 409,
}
_REASON = {
    MediationStatus.DENIED_PERMISSION: "permission_denied",
    MediationStatus.DENIED_ENDORSEMENT: "endorsement_denied",
    MediationStatus.DENIED_TAMPER: "tamper_denied",
}


class WallClock:
    """Drives the logical clock from elapsed monotonic time (serve mode)."""

    def __init__(self, platform: Platform) -> None:
        self.platform = platform
        self.origin = time.monotonic() - platform.now / 1000

    def sync(self) -> None:
        t = int((time.monotonic() - self.origin) * 1000)
        if t > self.platform.now:
            self.platform.advance_to(t)


def _outcome_response(out: MediationOutcome, target: str) -> JSONResponse:
    failed = out.decision.failed_checks() if out.decision else []
    if out.applied:
        body = MediationResponse(status=out.status.value, failed_checks=failed, target=target).model_dump()
    else:
        detail = out.reason or (out.decision.reason if out.decision else None)
        body = Denial(reason=_REASON[out.status], status=out.status.value, detail=detail,
                      failed_checks=failed, target=target).model_dump()
    return JSONResponse(body, status_code=_HTTP[out.status])


def create_app(platform: Platform, wall_clock: bool = False) -> FastAPI:
    app = FastAPI(title="ahoguard", version="0.1.0")
    lock = threading.Lock()
    clock = WallClock(platform) if wall_clock else None
    app.state.platform = platform

    def principal(authorization: Annotated[str | None, Header()] = None) -> Principal:
        scheme, _, token = (authorization or "").partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise HTTPException(401, "missing bearer token", headers={"WWW-Authenticate": "Bearer"})
        if token in platform.local_tokens:
            return Principal.local_user()
        if token in platform.home.tokens:
            return Principal.third_party(token)
        raise HTTPException(401, "unknown token", headers={"WWW-Authenticate": "Bearer"})

    Auth = Annotated[Principal, Depends(principal)]

    def local_only(p: Auth) -> Principal:
        if p.kind.value != "LOCAL_USER":
            raise HTTPException(403, "simulation endpoints need a local token")
        return p

    @app.post("/api/aho/{name}")
    def write_aho(name: str, body: ValueWrite, who: Auth):
        with lock:
            if clock:
                clock.sync()
            aho = platform.home.ahos.get(name)
            if aho is None:
                raise HTTPException(404, f"unknown AHO {name!r}")
            if body.value not in aho.values:
                raise HTTPException(400, f"{body.value!r} not in {list(aho.values)}")
            out = platform.set_aho(who, name, body.value)
            return _outcome_response(out, str(AhoChange(name, body.value)))

    @app.post("/api/device/{device_id}/{attribute}")
    def write_device(device_id: str, attribute: str, body: ValueWrite, who: Auth):
        with lock:
            if clock:
                clock.sync()
            dev = platform.home.devices.get(device_id)
            if dev is None:
                raise HTTPException(404, f"unknown device {device_id!r}")
            spec = platform.home.catalog.attributes_of(dev.device_type).get(attribute)
            if spec is None:
                raise HTTPException(404, f"{dev.device_type} has no attribute {attribute!r}")
            try:
                value = AttributeValue.parse(body.value)
            except ValueError as exc:
                raise HTTPException(400, str(exc)) from None
            if value not in spec.value_domain:
                raise HTTPException(400, f"{body.value!r} not in {[str(v) for v in spec.value_domain]}")
            out = platform.set_attr(who, device_id, attribute, body.value)
            return _outcome_response(out, str(DeviceAttributeChange(device_id, attribute, value)))

    @app.get("/api/states", response_model=StatesResponse)
    def states(who: Auth):
        with lock:
            if clock:
                clock.sync()
            return platform.states()

    @app.get("/api/notifications", response_model=list[NotificationModel])
    def notifications(who: Auth):
        with lock:
            return [n.to_dict() for n in platform.channel]

    @app.get("/api/policies", response_model=PoliciesResponse)
    def policies(who: Auth):
        with lock:
            active = [pol.to_dict() for _, pol in sorted(platform.engine.active.items())]
            return {"active": active,
                    "unprotectable": [f"{a}={v}" for a, v in sorted(platform.engine.unprotectable)]}

    @app.post("/sim/physical")
    def physical(body: PhysicalRequest, who: Annotated[Principal, Depends(local_only)]):
        with lock:
            if clock:
                clock.sync()
            try:
                outs = platform.apply_physical(PhysicalAction(body.device, body.verb, tuple(sorted(body.params.items()))))
            except (DeviceOffline, UnknownVerb) as exc:
                raise HTTPException(409 if isinstance(exc, DeviceOffline) else 400, str(exc)) from None
            except InvalidValue as exc:
                raise HTTPException(400, str(exc)) from None
            except HomeError as exc:
                raise HTTPException(404, str(exc)) from None
            return {"time": platform.now, "applied": [o.status.value for o in outs]}

    @app.post("/sim/advance")
    def advance(body: AdvanceRequest, who: Annotated[Principal, Depends(local_only)]):
        with lock:
            platform.advance_by(body.ms)
            if clock:
                clock.origin -= body.ms / 1000
            return {"time": platform.now}

    return app
