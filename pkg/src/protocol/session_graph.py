# src/protocol/session_graph.py
"""
Session Graph - LangGraph Implementation
========================================
One protocol session as a compiled StateGraph.

SESSION FLOW:
-------------
                    ┌─────────────────┐
                    │   DISTRIBUTE    │ ◄──── source emits n_check + |m| pairs,
                    └────────┬────────┘       Alice announces check indices
                             │
                             ▼
                    ┌─────────────────┐
                    │  CHANNEL TEST   │ ◄──── random Z/X rounds, compare kept ones
                    └────────┬────────┘
                             │
                    ┌────────┴────────┐
                    │                 │
                  Pass              Abort
                    │                 │
                    ▼                 ▼
           ┌─────────────────┐   ┌────────┐
           │    ANNOUNCE     │   │  END   │  (no announcement at all)
           │ Alice: c = m^a  │   └────────┘
           └────────┬────────┘
                    ▼
           ┌─────────────────┐
           │     DECODE      │
           │ Bob: m' = c^b   │
           └────────┬────────┘
                    │
           ┌────────┴────────┐
           │                 │
      Eve present        honest
           │                 │
           ▼                 ▼
    ┌─────────────┐     ┌────────┐
    │  EAVESDROP  │────►│  END   │
    └─────────────┘     └────────┘

Eve is only reachable through ANNOUNCE, so she never sees c before the
verdict. Message pairs are measured in Z by both parties.
"""

import logging
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from src.adversary.attacks import AttackModel
from src.adversary.eve import Eavesdropper
from src.protocol.bits import BitString, alice_encode, bob_decode
from src.protocol.config import SessionConfig
from src.protocol.pairs import PairBatch, allocate_batch
from src.protocol.transcript import Transcript
from src.quantum.rng import RandomStream, derive_seed
from src.quantum.state import Basis
from src.security.channel_test import TestVerdict, run_channel_test

# Configure module logger
logger = logging.getLogger(__name__)


# =============================================================================
# GRAPH STATE DEFINITION
# =============================================================================

class SessionPhase(str, Enum):
    """Possible states of one session."""
    IDLE = "idle"
    DISTRIBUTED = "distributed"
    TESTED = "tested"
    ANNOUNCED = "announced"
    DECODED = "decoded"
    EAVESDROPPED = "eavesdropped"
    ABORTED = "aborted"


class SessionState(TypedDict):
    """
    State that flows through the session graph.
    """
    # Inputs
    message: BitString
    attack: AttackModel
    n_check: int
    rng: RandomStream

    # Quantum channel and test
    batch: Optional[PairBatch]
    test: Optional[TestVerdict]

    # Message phase
    outcomes_a: BitString
    outcomes_b: BitString
    announcement: BitString
    decoded: BitString
    classical_bits: int

    # Eve
    eve: Optional[Eavesdropper]

    # Execution tracking
    phase: str
    phase_log: List[str]


def _enter(state: SessionState, phase: SessionPhase) -> None:
    state["phase"] = phase.value
    state["phase_log"].append(phase.value)


# =============================================================================
# NODE FUNCTIONS
# =============================================================================

def distribute_node(state: SessionState) -> SessionState:
    """DISTRIBUTE: pairs for the check rounds plus one per message bit."""
    state["batch"] = allocate_batch(state["attack"], state["n_check"], len(state["message"]), state["rng"])
    _enter(state, SessionPhase.DISTRIBUTED)
    return state


def channel_test_node(state: SessionState) -> SessionState:
    """CHANNEL TEST: sacrifice the check pairs."""
    test = run_channel_test(state["batch"], state["n_check"], state["rng"])
    state["test"] = test
    _enter(state, SessionPhase.TESTED if test.passed else SessionPhase.ABORTED)
    if not test.passed:
        logger.info(
            "Session %d aborted: %d mismatches in %d kept rounds",
            state["rng"].seed, test.mismatch_count, test.kept_count,
        )
    return state


def announce_node(state: SessionState) -> SessionState:
    """ANNOUNCE: Alice Z-measures her message qubits and publishes c = m XOR a."""
    batch = state["batch"]
    outcomes_a = BitString.of(batch.measure(index, "A", Basis.Z) for index in batch.message_indices)
    state["outcomes_a"] = outcomes_a
    state["announcement"] = alice_encode(state["message"], outcomes_a)
    state["classical_bits"] += len(state["announcement"])
    _enter(state, SessionPhase.ANNOUNCED)
    return state


def decode_node(state: SessionState) -> SessionState:
    """DECODE: Bob Z-measures and recovers m' = c XOR b."""
    batch = state["batch"]
    outcomes_b = BitString.of(batch.measure(index, "B", Basis.Z) for index in batch.message_indices)
    state["outcomes_b"] = outcomes_b
    state["decoded"] = bob_decode(state["announcement"], outcomes_b)
    _enter(state, SessionPhase.DECODED)
    return state


def eavesdrop_node(state: SessionState) -> SessionState:
    """EAVESDROP: Eve reads the public announcement and decodes."""
    eve = Eavesdropper(state["attack"])
    batch = state["batch"]
    eve.observe_announcement(batch, batch.message_indices, state["announcement"])
    eve.score(state["message"])
    state["eve"] = eve
    _enter(state, SessionPhase.EAVESDROPPED)
    return state


# =============================================================================
# CONDITIONAL EDGES (DECISION NODES)
# =============================================================================

def should_announce(state: SessionState) -> str:
    """After the test: announce on Pass, stop on Abort."""
    if state["phase"] == SessionPhase.TESTED.value:
        return "announce"
    return "end"


def should_eavesdrop(state: SessionState) -> str:
    """After decoding: let Eve act if the channel has one."""
    return "eavesdrop" if state["attack"].has_eve else "end"


# =============================================================================
# GRAPH BUILDER
# =============================================================================

def build_session_graph():
    """
    Build and compile the session graph.

    Returns:
        Compiled StateGraph ready for invoke().
    """
    workflow = StateGraph(SessionState)

    workflow.add_node("distribute", distribute_node)
    workflow.add_node("channel_test", channel_test_node)
    workflow.add_node("announce", announce_node)
    workflow.add_node("decode", decode_node)
    workflow.add_node("eavesdrop", eavesdrop_node)

    workflow.set_entry_point("distribute")
    workflow.add_edge("distribute", "channel_test")
    workflow.add_conditional_edges(
        "channel_test",
        should_announce,
        {
            "announce": "announce",
            "end": END,
        }
    )
    workflow.add_edge("announce", "decode")
    workflow.add_conditional_edges(
        "decode",
        should_eavesdrop,
        {
            "eavesdrop": "eavesdrop",
            "end": END,
        }
    )
    workflow.add_edge("eavesdrop", END)

    return workflow.compile()


@lru_cache(maxsize=1)
def get_session_graph():
    """Compiled graph, built once per process."""
    return build_session_graph()


# =============================================================================
# SESSION RUNNERS
# =============================================================================

def _to_transcript(final: Dict[str, Any], config: SessionConfig, attempt: int) -> Transcript:
    test: TestVerdict = final["test"]
    eve: Optional[Eavesdropper] = final.get("eve")
    rounds = test.rounds
    transcript = Transcript(
        seed=final["rng"].seed,
        attack=final["attack"],
        n_check=final["n_check"],
        message=final["message"],
        verdict=test.verdict,
        test=test,
        basis_choices={
            "alice": [check.basis_a.value for check in rounds],
            "bob": [check.basis_b.value for check in rounds],
        },
        outcomes_a=final["outcomes_a"],
        outcomes_b=final["outcomes_b"],
        outcomes_e=eve.record.outcomes if eve else None,
        announcement=final["announcement"],
        decoded=final["decoded"],
        classical_bits_sent=final["classical_bits"],
        eve_guess=eve.record.guess if eve else None,
        kept_rounds=test.kept_count,
        mismatches=test.mismatch_count,
        attempt=attempt,
        abort_reason=None if test.passed else "check-mismatch",
        distribution=config.distribution.value,
        phases=list(final["phase_log"]),
    )
    transcript.check_invariants()
    return transcript


def run_session(
    message: BitString,
    channel: AttackModel,
    config: SessionConfig,
    rng: Optional[RandomStream] = None,
    attempt: int = 0,
) -> Transcript:
    """
    Run one full session: distribute, test, then (on Pass) announce and decode.

    Args:
        message: Secret bits.
        channel: Channel source (honest or attacked).
        config: Session settings; n_check falls back to max(16, |m|).
        rng: Session root stream, RandomStream(config.seed) when omitted.
        attempt: Rebuild attempt number recorded in the transcript.

    Returns:
        The populated Transcript, whatever the verdict.

    Raises:
        ConfigError: invalid config.
        InsufficientPairsError: negative pair counts.
    """
    config.validate()
    rng = rng if rng is not None else RandomStream(config.seed)
    initial_state: SessionState = {
        "message": message,
        "attack": channel,
        "n_check": config.check_pairs,
        "rng": rng,
        "batch": None,
        "test": None,
        "outcomes_a": BitString(),
        "outcomes_b": BitString(),
        "announcement": BitString(),
        "decoded": BitString(),
        "classical_bits": 0,
        "eve": None,
        "phase": SessionPhase.IDLE.value,
        "phase_log": [],
    }
    final_state = get_session_graph().invoke(initial_state)
    transcript = _to_transcript(final_state, config, attempt)
    logger.debug(
        "Session %d (%s): %s, %d classical bits",
        transcript.seed, channel.name, transcript.verdict.value, transcript.classical_bits_sent,
    )
    return transcript


def run_until_pass(
    message: BitString,
    channel: AttackModel,
    config: SessionConfig,
    rng: Optional[RandomStream] = None,
) -> List[Transcript]:
    """
    Discard and rebuild: after an Abort, start a new session on fresh pairs
    (seed derived from the first one) up to config.max_rebuilds times.
    """
    config.validate()
    first = rng if rng is not None else RandomStream(config.seed)
    transcripts = [run_session(message, channel, config, first, attempt=0)]
    for attempt in range(1, config.max_rebuilds + 1):
        if transcripts[-1].passed:
            break
        retry_rng = RandomStream(derive_seed(first.seed, attempt))
        logger.info("Rebuilding pairs, attempt %d/%d", attempt, config.max_rebuilds)
        transcripts.append(run_session(message, channel, config, retry_rng, attempt=attempt))
    return transcripts


def get_session_visualization() -> str:
    """ASCII diagram of the session flow."""
    flow = __doc__.split("SESSION FLOW:\n-------------\n")[1]
    return flow.split("\nEve is only reachable")[0].rstrip()
