# src/utils/logger.py
"""
Experiment log: one JSON entry per CLI command, appended to a JSON array.

The log is for reproducing runs (every entry carries the seed); protocol
results themselves live in the JSONL transcripts.
"""

import json
import logging
import os
import uuid
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

# Configure module logger
logger = logging.getLogger(__name__)

# Default log location
LOG_FILE = os.path.join("logs", "experiment_data.json")


class ActionType(str, Enum):
    """
    Kinds of logged runs, so entries can be filtered for analysis.
    """
    SIMULATE = "SIMULATE"           # simulate: end-to-end sessions
    ATTACK_SWEEP = "ATTACK_SWEEP"   # attack-sweep: survival vs. check rounds
    STATS = "STATS"                 # stats: JSONL aggregation
    WIRE_SESSION = "WIRE_SESSION"   # serve-broker / run-alice / run-bob


REQUIRED_DETAILS: Dict[ActionType, tuple] = {
    ActionType.SIMULATE: ("seed", "attack", "trials"),
    ActionType.ATTACK_SWEEP: ("seed", "attack", "count_mode"),
    ActionType.STATS: ("input",),
    ActionType.WIRE_SESSION: ("seed", "attack", "role"),
}


def log_experiment(
    role: str,
    action: ActionType,
    details: Dict[str, Any],
    status: str = "SUCCESS",
    log_file: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Append one run to the experiment log.

    Args:
        role: Who ran ("cli", "alice", "bob", "broker").
        action: ActionType or its string value.
        details: Run parameters; must hold the keys REQUIRED_DETAILS lists.
        status: "SUCCESS" or "FAILURE".
        log_file: Target path; defaults to LOG_FILE.

    Returns:
        The entry that was written.

    Raises:
        ValueError: unknown action or missing detail keys.

    Example:
        >>> log_experiment(
        ...     role="cli",
        ...     action=ActionType.SIMULATE,
        ...     details={"seed": 7, "attack": "honest", "trials": 1},
        ... )
    """
    # --- 1. ACTION TYPE ---
    # Accept either the enum member or its string value
    try:
        action_type = ActionType(action)
    except ValueError:
        raise ValueError(f"Invalid action '{action}'. Use ActionType (e.g. ActionType.SIMULATE).") from None

    # --- 2. REQUIRED DETAILS ---
    missing_keys = [key for key in REQUIRED_DETAILS[action_type] if key not in details]
    if missing_keys:
        raise ValueError(
            f"Experiment log entry for '{role}' ({action_type.value}) is missing {missing_keys}"
        )

    # --- 3. ENTRY ---
    path = log_file or LOG_FILE
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    entry = {
        "id": str(uuid.uuid4()),
        "timestamp": datetime.now().isoformat(),
        "role": role,
        "action": action_type.value,
        "details": details,
        "status": status,
    }

    # --- 4. READ & WRITE ---
    data = []
    if os.path.exists(path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                content = f.read().strip()
                if content:
                    data = json.loads(content)
            if not isinstance(data, list):
                raise json.JSONDecodeError("top level is not a list", content, 0)
        except json.JSONDecodeError:
            logger.warning("Experiment log %s was corrupted; starting a new list", path)
            data = []

    data.append(entry)

    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=4, ensure_ascii=False)
    return entry
