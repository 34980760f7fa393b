# src/wire/broker.py
"""
Pair broker: the only process that touches quantum state in wire mode.

Alice opens a session with PAIRS_READY, after which Alice and Bob ask for
single-qubit measurements with MEASURE_REQ. On an attacked channel the
broker also plays Eve: it reads Alice's public ANNOUNCE copy (only accepted
after a Pass verdict), measures the E qubits and returns the guess in its
BYE reply to Alice.

A session is forgotten once Alice's BYE has been answered or her connection
is gone. Reply sequence numbers are counted per session, across both client
connections, so the broker is one sender per session like Alice and Bob.
"""

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Set, Tuple

from src.adversary.attacks import AttackModel
from src.adversary.eve import Eavesdropper
from src.errors import EprError, FrameError, ProtocolViolation, TransportError
from src.protocol.bits import BitString
from src.protocol.config import DEFAULT_FRAME_TIMEOUT
from src.protocol.pairs import PairBatch, build_batch
from src.quantum.rng import RandomStream, derive_seed
from src.quantum.state import Basis
from src.security.channel_test import Verdict
from src.wire.framing import FrameType, WireFrame, read_frame, write_frame

# Configure module logger
logger = logging.getLogger(__name__)

CLIENT_LABELS = ("A", "B")


@dataclass
class BrokerSession:
    """Quantum state and public-channel view of one session."""

    session_id: str
    seed: int
    batch: PairBatch
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    verdict: Optional[Verdict] = None
    eve: Optional[Eavesdropper] = None
    eve_guess: Optional[BitString] = None


class _Connection:
    """
    One client socket: incoming seq checks and the sessions it opened.

    Outgoing numbers come from `reply_seq`, which the broker shares between
    all connections.
    """

    def __init__(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, reply_seq: Dict[str, int]
    ) -> None:
        self.reader = reader
        self.writer = writer
        self.reply_seq = reply_seq
        self.last_seen: Dict[str, int] = {}
        self.opened: Set[str] = set()

    async def reply(self, session: str, frame_type: FrameType, body: Dict) -> None:
        seq = self.reply_seq.get(session, 0)
        self.reply_seq[session] = seq + 1
        await write_frame(self.writer, WireFrame(frame_type, session, seq, body))

    def check_seq(self, frame: WireFrame) -> None:
        last = self.last_seen.get(frame.session, -1)
        if frame.seq <= last:
            raise ProtocolViolation("sequence number did not increase", details={"seq": frame.seq, "last": last})
        self.last_seen[frame.session] = frame.seq


class Broker:
    """
    Serves pair batches over TCP.

    Example:
        >>> broker = Broker(AttackModel.ghz_probe(), seed=7)
        >>> server = await broker.start("127.0.0.1", 0)

    A client that sends nothing, or only part of a frame, for
    `frame_timeout` seconds gets ERROR {"reason": "timeout"} and is closed.
    """

    def __init__(
        self, attack: AttackModel, seed: int = 0, frame_timeout: Optional[float] = DEFAULT_FRAME_TIMEOUT
    ) -> None:
        self.attack = attack
        self.seed = seed
        self.frame_timeout = frame_timeout
        self.sessions: Dict[str, BrokerSession] = {}
        self._reply_seq: Dict[str, int] = {}
        self._opened = 0

    # -------------------------------------------------------------------------
    # Server lifecycle
    # -------------------------------------------------------------------------

    async def start(self, host: str, port: int) -> asyncio.AbstractServer:
        try:
            server = await asyncio.start_server(self.handle_connection, host, port)
        except OSError as e:
            raise TransportError(f"cannot bind broker to {host}:{port}", details={"error": str(e)}) from None
        bound = server.sockets[0].getsockname()
        logger.info("Broker listening on %s:%d (%s)", bound[0], bound[1], self.attack.name)
        return server

    async def handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        connection = _Connection(reader, writer, self._reply_seq)
        peer = writer.get_extra_info("peername")
        try:
            while True:
                try:
                    frame = await asyncio.wait_for(read_frame(reader), timeout=self.frame_timeout)
                except asyncio.TimeoutError:
                    logger.warning("No complete frame from %s within %ss", peer, self.frame_timeout)
                    await connection.reply("", FrameType.ERROR, {"reason": "timeout"})
                    break
                except FrameError as e:
                    logger.warning("Malformed frame from %s: %s", peer, e)
                    await connection.reply("", FrameType.ERROR, {"reason": "malformed-frame", "detail": e.message})
                    break
                if frame is None:
                    break
                try:
                    connection.check_seq(frame)
                    keep_open = await self.dispatch(connection, frame)
                except ProtocolViolation as e:
                    logger.warning("Protocol violation from %s: %s", peer, e)
                    await connection.reply(
                        frame.session, FrameType.ERROR, {"reason": "protocol-violation", "detail": e.message}
                    )
                    break
                if not keep_open:
                    break
        except (ConnectionError, OSError) as e:
            logger.debug("Connection from %s dropped: %s", peer, e)
        finally:
            for session_id in list(connection.opened):
                self.close_session(session_id)
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    def close_session(self, session_id: str) -> None:
        """Forget a session's pairs and reply counter."""
        if self.sessions.pop(session_id, None) is not None:
            logger.debug("Session %s closed", session_id)
        self._reply_seq.pop(session_id, None)

    # -------------------------------------------------------------------------
    # Frame handlers
    # -------------------------------------------------------------------------

    async def dispatch(self, connection: _Connection, frame: WireFrame) -> bool:
        """Handle one frame; False closes the connection."""
        handlers = {
            FrameType.HELLO: self._on_hello,
            FrameType.PAIRS_READY: self._on_pairs_ready,
            FrameType.MEASURE_REQ: self._on_measure,
            FrameType.VERDICT: self._on_verdict,
            FrameType.ANNOUNCE: self._on_announce,
        }
        if frame.type == FrameType.BYE:
            await self._on_bye(connection, frame)
            return False
        handler = handlers.get(frame.type)
        if handler is None:
            raise ProtocolViolation("frame type not accepted by the broker", details={"type": frame.type.value})
        await handler(connection, frame)
        return True

    def _session(self, frame: WireFrame) -> BrokerSession:
        session = self.sessions.get(frame.session)
        if session is None:
            raise ProtocolViolation("unknown session", details={"session": frame.session})
        return session

    async def _on_hello(self, connection: _Connection, frame: WireFrame) -> None:
        await connection.reply(frame.session, FrameType.HELLO, {"role": "broker", "attack": self.attack.name})

    async def _on_pairs_ready(self, connection: _Connection, frame: WireFrame) -> None:
        if frame.session in self.sessions:
            raise ProtocolViolation("session already has pairs", details={"session": frame.session})
        body = frame.body
        try:
            n_check, n_message = int(body["n_check"]), int(body["n_message"])
            check_indices = [int(index) for index in body["check_indices"]]
        except (KeyError, TypeError, ValueError):
            raise ProtocolViolation("PAIRS_READY needs n_check, n_message and check_indices") from None
        total = n_check + n_message
        if n_check < 0 or n_message < 0 or len(set(check_indices)) != n_check or any(
            not 0 <= index < total for index in check_indices
        ):
            raise ProtocolViolation("inconsistent PAIRS_READY", details={"n_check": n_check, "total": total})

        self._opened += 1
        seed = body.get("seed")
        seed = int(seed) if seed is not None else derive_seed(self.seed, self._opened)
        batch = build_batch(self.attack, check_indices, total, RandomStream(seed))
        self.sessions[frame.session] = BrokerSession(session_id=frame.session, seed=seed, batch=batch)
        connection.opened.add(frame.session)
        logger.info("Session %s: %d pairs ready (%d check), seed %d", frame.session, total, n_check, seed)
        await connection.reply(frame.session, FrameType.PAIRS_READY, {"pairs": total, "seed": seed})

    async def _on_measure(self, connection: _Connection, frame: WireFrame) -> None:
        session = self._session(frame)
        body = frame.body
        try:
            index, label, basis = int(body["pair"]), str(body["label"]), Basis(body["basis"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolViolation("MEASURE_REQ needs pair, label and basis") from None
        if label not in CLIENT_LABELS:
            await connection.reply(frame.session, FrameType.ERROR, {"reason": "forbidden-label", "label": label})
            return
        async with session.lock:
            try:
                bit = session.batch.measure(index, label, basis)
            except EprError as e:
                await connection.reply(
                    frame.session, FrameType.ERROR,
                    {"reason": e.message, "pair": index, "label": label},
                )
                return
        await connection.reply(
            frame.session, FrameType.MEASURE_RESP, {"pair": index, "label": label, "bit": bit}
        )

    async def _on_verdict(self, connection: _Connection, frame: WireFrame) -> None:
        session = self._session(frame)
        try:
            session.verdict = Verdict(frame.body["verdict"])
        except (KeyError, ValueError):
            raise ProtocolViolation("VERDICT needs Pass or Abort") from None
        logger.debug("Session %s verdict %s", frame.session, session.verdict.value)

    async def _on_announce(self, connection: _Connection, frame: WireFrame) -> None:
        session = self._session(frame)
        if session.verdict != Verdict.PASS:
            raise ProtocolViolation("announcement before a Pass verdict", details={"session": frame.session})
        try:
            announcement = BitString.from_text(frame.body["bits"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolViolation("ANNOUNCE needs a bit string") from None
        if not self.attack.has_eve:
            return
        async with session.lock:
            eve = Eavesdropper(self.attack)
            batch = session.batch
            eve.observe_announcement(batch, batch.message_indices, announcement)
        session.eve = eve
        session.eve_guess = eve.record.guess
        logger.info("Session %s: Eve decoded %d bits", frame.session, len(announcement))

    async def _on_bye(self, connection: _Connection, frame: WireFrame) -> None:
        session = self.sessions.get(frame.session)
        guess = session.eve_guess if session else None
        await connection.reply(
            frame.session, FrameType.BYE,
            {"eve_guess": None if guess is None else guess.to_text()},
        )
        if frame.session in connection.opened:
            connection.opened.discard(frame.session)
            self.close_session(frame.session)


async def serve_forever(
    bind: Tuple[str, int], attack: AttackModel, seed: int, frame_timeout: Optional[float] = DEFAULT_FRAME_TIMEOUT
) -> None:
    broker = Broker(attack, seed, frame_timeout)
    server = await broker.start(*bind)
    async with server:
        await server.serve_forever()


def broker_serve(
    bind: Tuple[str, int], attack: AttackModel, seed: int, frame_timeout: Optional[float] = DEFAULT_FRAME_TIMEOUT
) -> None:
    """Run a broker until interrupted."""
    try:
        asyncio.run(serve_forever(bind, attack, seed, frame_timeout))
    except KeyboardInterrupt:
        logger.info("Broker stopped")
