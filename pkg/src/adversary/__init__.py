"""
Adversary Module
================
Channel sources (honest, GHZ probe, intercept-resend) and Eve's decoding.

Leakage statistics over finished transcripts: src.adversary.leakage.
"""

from src.adversary.attacks import (
    EVE_LABEL,
    AttackKind,
    AttackModel,
    EveHandle,
    InterceptPolicy,
    emit_pair,
)
from src.adversary.eve import Eavesdropper, EveObservation, EveRecord, eve_decode

__all__ = [
    "EVE_LABEL",
    "AttackKind",
    "AttackModel",
    "Eavesdropper",
    "EveHandle",
    "EveObservation",
    "EveRecord",
    "InterceptPolicy",
    "emit_pair",
    "eve_decode",
]
