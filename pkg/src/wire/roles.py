# src/wire/roles.py
"""
Alice and Bob as separate network roles.

Both talk to the broker for measurements and to each other over one framed
TCP connection (Bob listens, Alice connects). Phase order on the Alice-Bob
link:

    HELLO -> CHECK_BASIS (A then B) -> CHECK_OUTCOME (A then B)
          -> VERDICT -> [ANNOUNCE on Pass] -> BYE

Bob rejects any frame that arrives out of that order, in particular an
ANNOUNCE before VERDICT=Pass. Alice forwards the announcement to the broker
only after Bob has decoded, so every pair is measured A, then B, then E,
the same order as the in-process session; with equal seeds the two
transcripts agree field for field.
"""

import asyncio
import logging
import uuid
from typing import Any, Dict, List, Optional, Tuple

from src.adversary.attacks import AttackModel
from src.errors import FrameTimeoutError, ProtocolViolation, TransportError
from src.protocol.bits import BitString, alice_encode, bob_decode
from src.protocol.config import DistributionMode, SessionConfig
from src.protocol.pairs import choose_check_indices
from src.protocol.session_graph import SessionPhase
from src.protocol.transcript import Transcript
from src.quantum.rng import RandomStream, StreamId
from src.quantum.state import Basis
from src.security.channel_test import CheckRound, TestVerdict, Verdict, draw_bases, evaluate_rounds
from src.wire.broker import Broker
from src.wire.framing import FrameChannel, FrameType, open_channel

# Configure module logger
logger = logging.getLogger(__name__)


# =============================================================================
# SHARED HELPERS
# =============================================================================

async def _measure(broker: FrameChannel, index: int, label: str, basis: Basis) -> int:
    await broker.send(FrameType.MEASURE_REQ, {"pair": index, "label": label, "basis": basis.value})
    reply = await broker.expect(FrameType.MEASURE_RESP)
    if reply.body.get("pair") != index or reply.body.get("label") != label:
        raise ProtocolViolation("measurement reply for another qubit", details={"pair": index, "label": label})
    return int(reply.body["bit"])


async def _hello_broker(broker: FrameChannel, role: str, fallback: AttackModel) -> AttackModel:
    await broker.send(FrameType.HELLO, {"role": role})
    hello = await broker.expect(FrameType.HELLO)
    attack = AttackModel.parse(hello.body.get("attack", fallback.name))
    if attack != fallback:
        logger.warning("Broker runs %s, local config said %s; using the broker's", attack.name, fallback.name)
    return attack


def _field(body: Dict[str, Any], key: str, expected: int) -> List[Any]:
    values = body.get(key)
    if not isinstance(values, list) or len(values) != expected:
        raise ProtocolViolation(f"'{key}' must list {expected} entries")
    return values


def _rounds(indices: List[int], bases_a: List[Basis], bases_b: List[Basis],
            outcomes_a: List[int], outcomes_b: List[int]) -> TestVerdict:
    return evaluate_rounds([
        CheckRound(index, basis_a, basis_b, int(bit_a), int(bit_b))
        for index, basis_a, basis_b, bit_a, bit_b in zip(indices, bases_a, bases_b, outcomes_a, outcomes_b)
    ])


def _basis_choices(test: Optional[TestVerdict]) -> Dict[str, List[str]]:
    if test is None:
        return {}
    return {
        "alice": [check.basis_a.value for check in test.rounds],
        "bob": [check.basis_b.value for check in test.rounds],
    }


def _timeout_transcript(
    seed: int, attack: AttackModel, n_check: int, message: BitString,
    config: SessionConfig, phases: List[str], error: FrameTimeoutError,
) -> Transcript:
    logger.warning("Session timed out before the announcement: %s", error)
    phases.append(SessionPhase.ABORTED.value)
    return Transcript(
        seed=seed,
        attack=attack,
        n_check=n_check,
        message=message,
        verdict=Verdict.ABORT,
        abort_reason=f"timeout: {error.message}",
        distribution=config.distribution.value,
        phases=phases,
    )


async def _close(*channels: Optional[FrameChannel]) -> None:
    for channel in channels:
        if channel is not None:
            await channel.close()


# =============================================================================
# ALICE
# =============================================================================

async def alice_session(config: SessionConfig, session_id: Optional[str] = None) -> Transcript:
    """
    Run Alice against a broker and a listening Bob.

    In alice-distribution mode she hosts the broker herself on config.broker.

    Raises:
        TransportError: broker or Bob unreachable, or a peer vanished.
        ProtocolViolation: a peer broke the frame contract.
    """
    config.validate()
    hosted = None
    if config.distribution == DistributionMode.ALICE:
        hosted = await Broker(config.attack, config.seed, config.frame_timeout).start(*config.broker)
    try:
        return await _alice_protocol(config, session_id or uuid.uuid4().hex)
    finally:
        if hosted is not None:
            hosted.close()


async def _alice_protocol(config: SessionConfig, session_id: str) -> Transcript:
    message, n_check, timeout = config.message, config.check_pairs, config.frame_timeout
    root = RandomStream(config.seed)
    total = n_check + len(message)
    check_indices = choose_check_indices(root, total, n_check)
    check_set = set(check_indices)
    message_indices = [index for index in range(total) if index not in check_set]
    attack = config.attack
    phases: List[str] = []

    broker = await open_channel(config.broker, session_id, timeout, "broker")
    bob: Optional[FrameChannel] = None
    try:
        try:
            attack = await _hello_broker(broker, "alice", config.attack)
            await broker.send(FrameType.PAIRS_READY, {
                "n_check": n_check,
                "n_message": len(message),
                "check_indices": check_indices,
                "seed": config.seed,
            })
            await broker.expect(FrameType.PAIRS_READY)
            phases.append(SessionPhase.DISTRIBUTED.value)

            bob = await open_channel(config.listen, session_id, timeout, "bob")
            await bob.send(FrameType.HELLO, {
                "role": "alice",
                "seed": config.seed,
                "attack": attack.name,
                "n_check": n_check,
                "n_message": len(message),
                "check_indices": check_indices,
            })
            await bob.expect(FrameType.HELLO)

            # Channel test: measure first, then publish bases, then outcomes.
            bases_a = draw_bases(root.fork(StreamId.ALICE), n_check)
            outcomes_a = [await _measure(broker, index, "A", basis) for index, basis in zip(check_indices, bases_a)]
            await bob.send(FrameType.CHECK_BASIS, {"indices": check_indices, "bases": [b.value for b in bases_a]})
            bases_b = [Basis(value) for value in _field((await bob.expect(FrameType.CHECK_BASIS)).body, "bases", n_check)]
            await bob.send(FrameType.CHECK_OUTCOME, {"outcomes": outcomes_a})
            outcomes_b = _field((await bob.expect(FrameType.CHECK_OUTCOME)).body, "outcomes", n_check)
            test = _rounds(check_indices, bases_a, bases_b, outcomes_a, outcomes_b)
        except FrameTimeoutError as e:
            for channel in (bob, broker):
                if channel is not None:
                    await channel.send_error("timeout")
            return _timeout_transcript(config.seed, attack, n_check, message, config, phases, e)

        phases.append(SessionPhase.TESTED.value if test.passed else SessionPhase.ABORTED.value)
        for channel in (broker, bob):
            await channel.send(FrameType.VERDICT, {"verdict": test.verdict.value})

        outcomes = announcement = decoded = BitString()
        eve_guess = None
        if test.passed:
            outcomes = BitString.of([await _measure(broker, index, "A", Basis.Z) for index in message_indices])
            announcement = alice_encode(message, outcomes)
            await bob.send(FrameType.ANNOUNCE, {"bits": announcement.to_text()})
            phases.append(SessionPhase.ANNOUNCED.value)

        await bob.send(FrameType.BYE, {})
        decoded = BitString.from_text((await bob.expect(FrameType.BYE)).body.get("decoded") or "")
        if test.passed:
            phases.append(SessionPhase.DECODED.value)
            await broker.send(FrameType.ANNOUNCE, {"bits": announcement.to_text()})
        await broker.send(FrameType.BYE, {})
        guess_text = (await broker.expect(FrameType.BYE)).body.get("eve_guess")
        if guess_text is not None:
            eve_guess = BitString.from_text(guess_text)
            phases.append(SessionPhase.EAVESDROPPED.value)
    finally:
        await _close(bob, broker)

    transcript = Transcript(
        seed=config.seed,
        attack=attack,
        n_check=n_check,
        message=message,
        verdict=test.verdict,
        test=test,
        basis_choices=_basis_choices(test),
        outcomes_a=outcomes,
        announcement=announcement,
        decoded=decoded,
        classical_bits_sent=len(announcement),
        eve_guess=eve_guess,
        kept_rounds=test.kept_count,
        mismatches=test.mismatch_count,
        abort_reason=None if test.passed else "check-mismatch",
        distribution=config.distribution.value,
        phases=phases,
    )
    transcript.check_invariants()
    logger.info("Alice finished session %s: %s", session_id, test.verdict.value)
    return transcript


# =============================================================================
# BOB
# =============================================================================

async def _bob_protocol(alice: FrameChannel, config: SessionConfig, adopt_peer_seed: bool) -> Transcript:
    hello = await alice.expect(FrameType.HELLO)
    body = hello.body
    try:
        n_check, n_message = int(body["n_check"]), int(body["n_message"])
        check_indices = [int(index) for index in _field(body, "check_indices", n_check)]
        seed = int(body["seed"]) if adopt_peer_seed else config.seed
    except (KeyError, TypeError, ValueError):
        raise ProtocolViolation("HELLO from Alice is missing session parameters") from None
    check_set = set(check_indices)
    message_indices = [index for index in range(n_check + n_message) if index not in check_set]
    await alice.send(FrameType.HELLO, {"role": "bob"})

    attack = config.attack
    phases: List[str] = [SessionPhase.DISTRIBUTED.value]
    broker = await open_channel(config.broker, alice.session, config.frame_timeout, "broker")
    try:
        try:
            attack = await _hello_broker(broker, "bob", AttackModel.parse(body.get("attack", config.attack.name)))
            bob_rng = RandomStream(seed).fork(StreamId.BOB)

            basis_frame = await alice.expect(FrameType.CHECK_BASIS)
            if [int(index) for index in basis_frame.body.get("indices", [])] != check_indices:
                raise ProtocolViolation("check indices changed after HELLO")
            bases_a = [Basis(value) for value in _field(basis_frame.body, "bases", n_check)]
            bases_b = draw_bases(bob_rng, n_check)
            outcomes_b = [await _measure(broker, index, "B", basis) for index, basis in zip(check_indices, bases_b)]
            await alice.send(FrameType.CHECK_BASIS, {"bases": [b.value for b in bases_b]})
            outcomes_a = _field((await alice.expect(FrameType.CHECK_OUTCOME)).body, "outcomes", n_check)
            await alice.send(FrameType.CHECK_OUTCOME, {"outcomes": outcomes_b})
            test = _rounds(check_indices, bases_a, bases_b, outcomes_a, outcomes_b)

            announced = Verdict(
                (await alice.expect(FrameType.VERDICT)).body.get("verdict", Verdict.ABORT.value)
            )
        except FrameTimeoutError as e:
            await alice.send_error("timeout")
            return _timeout_transcript(seed, attack, n_check, BitString(), config, phases, e)

        if announced != test.verdict:
            await alice.send_error("verdict-mismatch")
            raise ProtocolViolation(
                "Alice's verdict disagrees with the published rounds",
                details={"announced": announced.value, "computed": test.verdict.value},
            )
        phases.append(SessionPhase.TESTED.value if test.passed else SessionPhase.ABORTED.value)

        announcement = decoded = outcomes = BitString()
        if test.passed:
            announcement = BitString.from_text((await alice.expect(FrameType.ANNOUNCE)).body.get("bits", ""))
            if len(announcement) != n_message:
                raise ProtocolViolation(
                    "announcement length differs from the message pair count",
                    details={"announcement": len(announcement), "pairs": n_message},
                )
            phases.append(SessionPhase.ANNOUNCED.value)
            outcomes = BitString.of([await _measure(broker, index, "B", Basis.Z) for index in message_indices])
            decoded = bob_decode(announcement, outcomes)
            phases.append(SessionPhase.DECODED.value)

        await broker.send(FrameType.BYE, {})
        await broker.expect(FrameType.BYE)
        await alice.expect(FrameType.BYE)
        await alice.send(FrameType.BYE, {"decoded": decoded.to_text()})
    finally:
        await broker.close()

    transcript = Transcript(
        seed=seed,
        attack=attack,
        n_check=n_check,
        message=BitString(),
        verdict=test.verdict,
        test=test,
        basis_choices=_basis_choices(test),
        outcomes_b=outcomes,
        announcement=announcement,
        decoded=decoded,
        classical_bits_sent=len(announcement),
        kept_rounds=test.kept_count,
        mismatches=test.mismatch_count,
        abort_reason=None if test.passed else "check-mismatch",
        distribution=config.distribution.value,
        phases=phases,
    )
    transcript.check_invariants()
    logger.info("Bob finished session %s: %s, decoded %d bits", alice.session, test.verdict.value, len(decoded))
    return transcript


async def serve_bob(
    config: SessionConfig, adopt_peer_seed: bool = True
) -> Tuple[asyncio.AbstractServer, "asyncio.Future[Transcript]"]:
    """
    Start listening on config.listen for one Alice session.

    Returns:
        (server, future) where the future resolves to Bob's transcript or
        carries the exception that ended his session.
    """
    config.validate()
    loop = asyncio.get_running_loop()
    done: "asyncio.Future[Transcript]" = loop.create_future()

    async def on_connect(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        channel = FrameChannel(reader, writer, None, timeout=config.frame_timeout, peer="alice")
        try:
            transcript = await _bob_protocol(channel, config, adopt_peer_seed)
            if not done.done():
                done.set_result(transcript)
        except Exception as e:  # handed to whoever awaits the future
            if not done.done():
                done.set_exception(e)
        finally:
            await channel.close()

    host, port = config.listen
    try:
        server = await asyncio.start_server(on_connect, host, port)
    except OSError as e:
        raise TransportError(f"cannot listen on {host}:{port}", details={"error": str(e)}) from None
    logger.info("Bob listening on %s:%d", *server.sockets[0].getsockname()[:2])
    return server, done


async def bob_session(config: SessionConfig, adopt_peer_seed: bool = True) -> Transcript:
    server, done = await serve_bob(config, adopt_peer_seed)
    try:
        return await done
    finally:
        server.close()
        await server.wait_closed()


# =============================================================================
# PROCESS ENTRY POINTS
# =============================================================================

def run_alice(config: SessionConfig) -> Transcript:
    """Blocking Alice run for the CLI."""
    return asyncio.run(alice_session(config))


def run_bob(config: SessionConfig, adopt_peer_seed: bool = True) -> Transcript:
    """
    Listen for one Alice session and return Bob's transcript.

    With adopt_peer_seed Bob replays with the seed Alice announces in HELLO,
    otherwise with config.seed.
    """
    return asyncio.run(bob_session(config, adopt_peer_seed))
