"""Integrity reference monitor for smart-home abstract objects.

Third-party changes to endorsed home objects (``home``, ``security_state``)
are applied only when recent, trusted device-state changes satisfy the
deployment's endorsement policy.
"""

from .model import AttributeValue, DeviceCatalog, Principal, TrustClass
from .monitor import AhoChange, DeviceAttributeChange, DeviceReport, MediationStatus, StateChangeRequest
from .platform import PhysicalAction, Platform
from .policy import Action, PolicyTemplate, evaluate, instantiate

__all__ = [
    "Action",
    "AhoChange",
    "AttributeValue",
    "DeviceAttributeChange",
    "DeviceCatalog",
    "DeviceReport",
    "MediationStatus",
    "PhysicalAction",
    "Platform",
    "PolicyTemplate",
    "Principal",
    "StateChangeRequest",
    "TrustClass",
    "evaluate",
    "instantiate",
]
