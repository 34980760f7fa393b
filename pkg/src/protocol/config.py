# src/protocol/config.py
"""
Session configuration.

Seeds resolve in this order: explicit value, EPR_SEED from the environment
(.env is loaded by main.py), then a fresh random seed that the caller must
echo so the run can be replayed.
"""

import logging
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

from src.adversary.attacks import AttackModel
from src.errors import ConfigError
from src.protocol.bits import BitString
from src.quantum.rng import fresh_seed

# Configure module logger
logger = logging.getLogger(__name__)

SEED_ENV_VAR = "EPR_SEED"
MIN_CHECK_PAIRS = 16
DEFAULT_FRAME_TIMEOUT = 10.0
DEFAULT_BROKER = ("127.0.0.1", 7878)
DEFAULT_LISTEN = ("127.0.0.1", 7879)


class DistributionMode(str, Enum):
    """Who prepares the pairs: a stand-alone server, or Alice herself."""
    SERVER = "server"
    ALICE = "alice"


def default_n_check(message_length: int) -> int:
    return max(MIN_CHECK_PAIRS, message_length)


def parse_endpoint(text: str) -> Tuple[str, int]:
    """'host:port' -> (host, port)."""
    host, sep, port = text.strip().rpartition(":")
    if not sep or not host:
        raise ConfigError(f"endpoint must look like host:port, got '{text}'")
    try:
        number = int(port)
    except ValueError:
        raise ConfigError(f"bad port in endpoint '{text}'") from None
    if not 0 <= number <= 65535:
        raise ConfigError(f"port out of range in endpoint '{text}'")
    return host, number


def resolve_seed(seed: Optional[int]) -> Tuple[int, str]:
    """
    Pick the run seed.

    Returns:
        (seed, source) where source is 'flag', 'env' or 'fresh'.

    Raises:
        ConfigError: EPR_SEED is set but not an integer.
    """
    if seed is not None:
        return int(seed), "flag"
    env_value = os.getenv(SEED_ENV_VAR)
    if env_value not in (None, ""):
        try:
            return int(env_value), "env"
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer", details={"value": env_value}) from None
    return fresh_seed(), "fresh"


@dataclass(frozen=True)
class SessionConfig:
    """
    Everything one protocol session needs.

    Attributes:
        message: Secret bits Alice wants to send.
        n_check: Check pairs; None means max(16, len(message)).
        attack: Channel source.
        seed: Session seed.
        broker: Broker address (wire mode).
        listen: Bob's listening address (wire mode).
        distribution: Pair preparation mode.
        frame_timeout: Seconds to wait for any single frame.
        max_rebuilds: Extra sessions started after an Abort.
    """

    message: BitString = field(default_factory=BitString)
    n_check: Optional[int] = None
    attack: AttackModel = field(default_factory=AttackModel.honest)
    seed: int = 0
    broker: Tuple[str, int] = DEFAULT_BROKER
    listen: Tuple[str, int] = DEFAULT_LISTEN
    distribution: DistributionMode = DistributionMode.SERVER
    frame_timeout: float = DEFAULT_FRAME_TIMEOUT
    max_rebuilds: int = 0

    @property
    def check_pairs(self) -> int:
        return default_n_check(len(self.message)) if self.n_check is None else self.n_check

    def with_seed(self, seed: int) -> "SessionConfig":
        return replace(self, seed=seed)

    def validate(self) -> "SessionConfig":
        """Raise ConfigError on the first invalid field; return self otherwise."""
        if self.n_check is not None and self.n_check < 0:
            raise ConfigError("n_check must be >= 0", details={"n_check": self.n_check})
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits", details={"seed": self.seed})
        if self.frame_timeout <= 0:
            raise ConfigError("frame timeout must be positive", details={"timeout": self.frame_timeout})
        if self.max_rebuilds < 0:
            raise ConfigError("max_rebuilds must be >= 0", details={"max_rebuilds": self.max_rebuilds})
        for name, (host, port) in (("broker", self.broker), ("listen", self.listen)):
            if not host or not 0 <= port <= 65535:
                raise ConfigError(f"invalid {name} endpoint", details={"host": host, "port": port})
        return self
