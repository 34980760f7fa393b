# src/adversary/attacks.py
"""
Channel sources, with or without an eavesdropper.

    honest                 exact |Phi+>_AB, Eve holds nothing
    ghz-probe              Eve couples an ancilla E to B with a CNOT while the
                           pair is prepared: CNOT(B->E) |Phi+>_AB |0>_E gives
                           (|000> + |111>)/sqrt2 on (A, B, E)
    intercept-resend[:p]   Eve measures B in transit (policy p: random, z, x)
                           and forwards the collapsed eigenstate

No claim is made that these are the only attacks worth considering; they are
the two the detection statistics are calibrated against.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from src.errors import ConfigError
from src.quantum.rng import RandomStream, StreamId
from src.quantum.state import Basis, StateVector, add_qubit, apply_cnot, make_bell_pair, measure

# Configure module logger
logger = logging.getLogger(__name__)

EVE_LABEL = "E"


class AttackKind(str, Enum):
    HONEST = "honest"
    GHZ_PROBE = "ghz-probe"
    INTERCEPT_RESEND = "intercept-resend"


class InterceptPolicy(str, Enum):
    """Basis Eve uses on each intercepted qubit."""
    RANDOM = "random"
    Z = "z"
    X = "x"


@dataclass(frozen=True)
class AttackModel:
    """
    Immutable description of the channel source.

    Example:
        >>> AttackModel.parse("intercept-resend:z").name
        'intercept-resend:z'
        >>> AttackModel.parse("ghz-probe").has_eve
        True
    """

    kind: AttackKind = AttackKind.HONEST
    policy: InterceptPolicy = InterceptPolicy.RANDOM

    @classmethod
    def honest(cls) -> "AttackModel":
        return cls(AttackKind.HONEST)

    @classmethod
    def ghz_probe(cls) -> "AttackModel":
        return cls(AttackKind.GHZ_PROBE)

    @classmethod
    def intercept_resend(cls, policy: InterceptPolicy = InterceptPolicy.RANDOM) -> "AttackModel":
        return cls(AttackKind.INTERCEPT_RESEND, InterceptPolicy(policy))

    @classmethod
    def parse(cls, text: str) -> "AttackModel":
        """Parse a CLI name such as 'honest' or 'intercept-resend:x'."""
        name, _, option = text.strip().lower().partition(":")
        try:
            kind = AttackKind(name)
        except ValueError:
            valid = ", ".join(kind.value for kind in AttackKind)
            raise ConfigError(f"unknown attack '{text}'", details={"valid": valid}) from None
        if kind != AttackKind.INTERCEPT_RESEND:
            if option:
                raise ConfigError(f"attack '{name}' takes no option", details={"option": option})
            return cls(kind)
        try:
            policy = InterceptPolicy(option or InterceptPolicy.RANDOM.value)
        except ValueError:
            raise ConfigError(
                f"unknown intercept-resend policy '{option}'", details={"valid": "z, x, random"}
            ) from None
        return cls(kind, policy)

    @property
    def name(self) -> str:
        if self.kind == AttackKind.INTERCEPT_RESEND:
            return f"{self.kind.value}:{self.policy.value}"
        return self.kind.value

    @property
    def has_eve(self) -> bool:
        return self.kind != AttackKind.HONEST

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class EveHandle:
    """
    What Eve keeps from one pair.

    GHZ probe: the label of her entangled qubit (measured later).
    Intercept-resend: the basis and outcome of her measurement on B.
    """

    label: Optional[str] = None
    basis: Optional[Basis] = None
    outcome: Optional[int] = None

    @property
    def holds_qubit(self) -> bool:
        return self.label is not None


def _intercept_basis(policy: InterceptPolicy, rng: RandomStream) -> Basis:
    if policy == InterceptPolicy.Z:
        return Basis.Z
    if policy == InterceptPolicy.X:
        return Basis.X
    return Basis.X if rng.fork(StreamId.EVE).bit() else Basis.Z


def emit_pair(model: AttackModel, rng: RandomStream) -> Tuple[StateVector, Optional[EveHandle]]:
    """
    Prepare one channel pair.

    Args:
        model: Channel source.
        rng: The pair's own source lane. Eve's basis choices come from its
             EVE fork, her measurement outcome from the lane itself.

    Returns:
        (state, eve_handle); eve_handle is None on the honest channel.
    """
    bell = make_bell_pair()
    if model.kind == AttackKind.HONEST:
        return bell, None

    if model.kind == AttackKind.GHZ_PROBE:
        probe = apply_cnot(add_qubit(bell, EVE_LABEL), "B", EVE_LABEL)
        return probe, EveHandle(label=EVE_LABEL)

    basis = _intercept_basis(model.policy, rng)
    outcome, forwarded = measure(bell, "B", basis, rng)
    return forwarded, EveHandle(basis=basis, outcome=outcome)
