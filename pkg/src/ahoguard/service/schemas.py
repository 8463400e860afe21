"""Request and response bodies for the HTTP surface."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ValueWrite(BaseModel):
    value: str = Field(min_length=1)


class MediationResponse(BaseModel):
    status: str
    reason: str | None = None
    failed_checks: list[str] = []
    target: str


class Denial(BaseModel):
    reason: str
    status: str
    detail: str | None = None
    failed_checks: list[str] = []
    target: str


class StatesResponse(BaseModel):
    time: int
    ahos: dict[str, str]
    devices: dict[str, dict[str, str]]


class NotificationModel(BaseModel):
    seq: int
    time: int
    kind: str
    aho: str | None = None
    value: str | None = None
    principal: str | None = None
    failed_checks: list[str] = []
    message: str


class PolicyCheck(BaseModel):
    device_id: str
    type: str
    attribute: str
    value: str


class PolicyPredicate(BaseModel):
    location: str
    checks: list[PolicyCheck]


class PolicyModel(BaseModel):
    aho: str
    value: str
    template_id: str
    predicates: list[PolicyPredicate]


class PoliciesResponse(BaseModel):
    active: list[PolicyModel]
    unprotectable: list[str]


class PhysicalRequest(BaseModel):
    device: str
    verb: str
    params: dict[str, str] = {}


class AdvanceRequest(BaseModel):
    ms: int = Field(ge=0)
