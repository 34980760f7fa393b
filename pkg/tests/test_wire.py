"""
Tests for the frame codec, the pair broker and the Alice/Bob network roles.

Every socket binds 127.0.0.1 on an ephemeral port.
"""

import asyncio
import socket
import struct
import unittest
from dataclasses import replace

from src.adversary.attacks import AttackModel
from src.errors import FrameError, ProtocolViolation, TransportError
from src.protocol import BitString, SessionConfig, random_message
from src.protocol.config import DistributionMode
from src.protocol.session_graph import run_session
from src.wire import (
    MAX_FRAME_SIZE,
    Broker,
    FrameType,
    WireFrame,
    alice_session,
    open_channel,
    read_frame,
    serve_bob,
)

HOST = "127.0.0.1"
ATTACKS = (AttackModel.honest(), AttackModel.ghz_probe(), AttackModel.intercept_resend())


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.bind((HOST, 0))
        return probe.getsockname()[1]


def bound_port(server: asyncio.AbstractServer) -> int:
    return server.sockets[0].getsockname()[1]


def feed(data: bytes) -> asyncio.StreamReader:
    reader = asyncio.StreamReader()
    reader.feed_data(data)
    reader.feed_eof()
    return reader


class TestFraming(unittest.TestCase):

    def test_length_prefix_is_big_endian(self):
        frame = WireFrame(FrameType.HELLO, "s", 0, {"role": "alice"})
        encoded = frame.encode()
        self.assertEqual(encoded[:4], struct.pack(">I", len(encoded) - 4))
        self.assertEqual(WireFrame.decode(encoded), frame)

    def test_length_mismatch(self):
        encoded = WireFrame(FrameType.BYE, "s", 3).encode()
        with self.assertRaises(FrameError):
            WireFrame.decode(encoded + b" ")
        with self.assertRaises(FrameError):
            WireFrame.decode(encoded[:2])

    def test_bad_payloads(self):
        for payload in (
            b"{not json",
            b"[1, 2]",
            b'{"type": "HELLO", "session": "s", "seq": 0}',
            b'{"type": "TELEPORT", "session": "s", "seq": 0, "body": {}}',
            b'{"type": "HELLO", "session": "s", "seq": -1, "body": {}}',
            b'{"type": "HELLO", "session": 4, "seq": 0, "body": {}}',
        ):
            with self.assertRaises(FrameError, msg=payload):
                WireFrame.from_payload(payload)

    def test_oversize_frame_is_refused(self):
        frame = WireFrame(FrameType.ANNOUNCE, "s", 0, {"bits": "0" * MAX_FRAME_SIZE})
        with self.assertRaises(FrameError):
            frame.encode()


class TestReadFrame(unittest.IsolatedAsyncioTestCase):

    async def test_clean_eof(self):
        self.assertIsNone(await read_frame(feed(b"")))

    async def test_reads_consecutive_frames(self):
        first = WireFrame(FrameType.HELLO, "s", 0, {})
        second = WireFrame(FrameType.BYE, "s", 1, {})
        reader = feed(first.encode() + second.encode())
        self.assertEqual(await read_frame(reader), first)
        self.assertEqual(await read_frame(reader), second)
        self.assertIsNone(await read_frame(reader))

    async def test_truncated_payload(self):
        encoded = WireFrame(FrameType.HELLO, "s", 0, {}).encode()
        with self.assertRaises(FrameError):
            await read_frame(feed(encoded[:-3]))

    async def test_truncated_header(self):
        with self.assertRaises(FrameError):
            await read_frame(feed(b"\x00\x00"))

    async def test_oversize_declaration(self):
        with self.assertRaises(FrameError):
            await read_frame(feed(struct.pack(">I", MAX_FRAME_SIZE + 1) + b"{}"))


class TestBroker(unittest.IsolatedAsyncioTestCase):

    async def asyncSetUp(self):
        self.broker = Broker(AttackModel.ghz_probe(), seed=1)
        self.server = await self.broker.start(HOST, 0)
        self.address = (HOST, bound_port(self.server))

    async def asyncTearDown(self):
        self.server.close()
        await self.server.wait_closed()

    async def open_session(self, session: str):
        channel = await open_channel(self.address, session, 2.0, "broker")
        await channel.send(FrameType.PAIRS_READY, {"n_check": 1, "n_message": 1, "check_indices": [0], "seed": 5})
        reply = await channel.expect(FrameType.PAIRS_READY)
        self.assertEqual(reply.body, {"pairs": 2, "seed": 5})
        return channel

    async def test_second_measurement_is_refused(self):
        channel = await self.open_session("twice")
        await channel.send(FrameType.MEASURE_REQ, {"pair": 0, "label": "A", "basis": "Z"})
        self.assertIn((await channel.expect(FrameType.MEASURE_RESP)).body["bit"], (0, 1))
        await channel.send(FrameType.MEASURE_REQ, {"pair": 0, "label": "A", "basis": "X"})
        with self.assertRaises(ProtocolViolation) as caught:
            await channel.receive()
        self.assertEqual(caught.exception.details["reason"], "already-measured")
        # the session survives a refused measurement
        await channel.send(FrameType.MEASURE_REQ, {"pair": 1, "label": "B", "basis": "Z"})
        await channel.expect(FrameType.MEASURE_RESP)
        await channel.close()

    async def test_eve_label_is_forbidden(self):
        channel = await self.open_session("eve")
        await channel.send(FrameType.MEASURE_REQ, {"pair": 1, "label": "E", "basis": "Z"})
        with self.assertRaises(ProtocolViolation) as caught:
            await channel.receive()
        self.assertEqual(caught.exception.details["reason"], "forbidden-label")
        await channel.close()

    async def test_announce_before_verdict(self):
        channel = await self.open_session("early")
        await channel.send(FrameType.ANNOUNCE, {"bits": "1"})
        with self.assertRaises(ProtocolViolation) as caught:
            await channel.receive()
        self.assertEqual(caught.exception.details["reason"], "protocol-violation")
        with self.assertRaises(TransportError):
            await channel.receive()
        await channel.close()

    async def test_malformed_frame_closes_connection(self):
        reader, writer = await asyncio.open_connection(*self.address)
        writer.write(struct.pack(">I", 9) + b"not json!")
        await writer.drain()
        reply = await read_frame(reader)
        self.assertEqual(reply.type, FrameType.ERROR)
        self.assertEqual(reply.body["reason"], "malformed-frame")
        self.assertIsNone(await read_frame(reader))
        writer.close()
        await writer.wait_closed()

    async def test_duplicate_session(self):
        channel = await self.open_session("dup")
        await channel.send(FrameType.PAIRS_READY, {"n_check": 0, "n_message": 1, "check_indices": []})
        with self.assertRaises(ProtocolViolation):
            await channel.receive()
        await channel.close()

    async def settle(self):
        for _ in range(100):
            if not self.broker.sessions:
                return
            await asyncio.sleep(0.01)

    async def test_stalled_frame_gets_timeout_error(self):
        impatient = Broker(AttackModel.honest(), frame_timeout=0.3)
        server = await impatient.start(HOST, 0)
        try:
            reader, writer = await asyncio.open_connection(HOST, bound_port(server))
            # declares 40 bytes, sends 16, keeps the socket open
            writer.write(struct.pack(">I", 40) + b'{"type":"HELLO"}')
            await writer.drain()
            reply = await asyncio.wait_for(read_frame(reader), timeout=3.0)
            self.assertEqual(reply.type, FrameType.ERROR)
            self.assertEqual(reply.body["reason"], "timeout")
            self.assertIsNone(await asyncio.wait_for(read_frame(reader), timeout=3.0))
            writer.close()
            await writer.wait_closed()
        finally:
            server.close()
            await server.wait_closed()

    async def test_finished_sessions_are_forgotten(self):
        for number in range(20):
            channel = await self.open_session(f"done-{number}")
            await channel.send(FrameType.BYE, {})
            await channel.expect(FrameType.BYE)
            await channel.close()
        await self.settle()
        self.assertEqual(self.broker.sessions, {})
        # the id is free again
        channel = await self.open_session("done-0")
        await channel.close()

    async def test_dropped_opener_releases_session(self):
        channel = await self.open_session("gone")
        self.assertIn("gone", self.broker.sessions)
        await channel.close()
        await self.settle()
        self.assertNotIn("gone", self.broker.sessions)

    async def test_reply_seq_counts_per_session_across_connections(self):
        alice = await open_channel(self.address, "shared", 2.0, "broker")
        await alice.send(FrameType.PAIRS_READY, {"n_check": 1, "n_message": 1, "check_indices": [0], "seed": 5})
        self.assertEqual((await alice.expect(FrameType.PAIRS_READY)).seq, 0)
        bob = await open_channel(self.address, "shared", 2.0, "broker")
        await bob.send(FrameType.HELLO, {"role": "bob"})
        self.assertEqual((await bob.expect(FrameType.HELLO)).seq, 1)
        await alice.send(FrameType.MEASURE_REQ, {"pair": 0, "label": "A", "basis": "Z"})
        self.assertEqual((await alice.expect(FrameType.MEASURE_RESP)).seq, 2)
        await bob.send(FrameType.MEASURE_REQ, {"pair": 0, "label": "B", "basis": "Z"})
        self.assertEqual((await bob.expect(FrameType.MEASURE_RESP)).seq, 3)
        await bob.close()
        await alice.close()


class TestLoopbackSessions(unittest.IsolatedAsyncioTestCase):

    async def run_wire(self, config: SessionConfig, broker_attack: AttackModel = None):
        """One full Alice/Bob session through a local broker; returns both transcripts."""
        broker_server = None
        if config.distribution == DistributionMode.SERVER:
            broker_server = await Broker(broker_attack or config.attack).start(HOST, 0)
            config = replace(config, broker=(HOST, bound_port(broker_server)))
        bob_server, bob_done = await serve_bob(replace(config, listen=(HOST, 0)))
        try:
            alice_config = replace(config, listen=(HOST, bound_port(bob_server)))
            alice = await alice_session(alice_config)
            bob = await asyncio.wait_for(bob_done, timeout=5)
        finally:
            bob_server.close()
            await bob_server.wait_closed()
            if broker_server is not None:
                broker_server.close()
                await broker_server.wait_closed()
        return alice, bob

    def assertSameSession(self, wire, local):
        self.assertEqual(wire.verdict, local.verdict)
        self.assertEqual(wire.announcement, local.announcement)
        self.assertEqual(wire.decoded, local.decoded)
        self.assertEqual(wire.classical_bits_sent, local.classical_bits_sent)
        self.assertEqual(wire.eve_guess, local.eve_guess)
        self.assertEqual(wire.mismatches, local.mismatches)

    async def test_matches_in_process_sessions(self):
        for seed in range(100):
            attack = ATTACKS[seed % len(ATTACKS)]
            message = random_message(seed, 1 + seed % 24)
            config = SessionConfig(message=message, n_check=4, attack=attack, seed=seed)
            alice, bob = await self.run_wire(config)
            local = run_session(message, attack, config)
            with self.subTest(attack=attack.name, seed=seed):
                self.assertSameSession(alice, local)
                self.assertEqual(bob.verdict, local.verdict)
                self.assertEqual(bob.decoded, local.decoded)
                if local.passed:
                    self.assertEqual(alice.classical_bits_sent, len(message))

    async def test_worked_message(self):
        message = BitString.from_text("0100100")
        alice, bob = await self.run_wire(SessionConfig(message=message, seed=7))
        self.assertTrue(alice.passed)
        self.assertEqual(alice.decoded, message)
        self.assertEqual(bob.decoded, message)
        self.assertEqual(alice.classical_bits_sent, 7)

    async def test_alice_hosts_the_broker(self):
        message = random_message(3, 10)
        config = SessionConfig(
            message=message, n_check=0, attack=AttackModel.ghz_probe(), seed=3,
            broker=(HOST, free_port()), distribution=DistributionMode.ALICE,
        )
        alice, _ = await self.run_wire(config)
        local = run_session(message, config.attack, config)
        self.assertSameSession(alice, local)
        self.assertEqual(alice.eve_guess, message)
        self.assertEqual(alice.distribution, "alice")

    async def test_broker_attack_wins(self):
        message = random_message(4, 8)
        config = SessionConfig(message=message, n_check=0, seed=4)
        alice, _ = await self.run_wire(config, broker_attack=AttackModel.ghz_probe())
        self.assertEqual(alice.attack, AttackModel.ghz_probe())
        self.assertEqual(alice.eve_guess, message)


class TestFailures(unittest.IsolatedAsyncioTestCase):

    async def test_broker_down(self):
        config = SessionConfig(message=BitString.from_text("01"), broker=(HOST, free_port()), frame_timeout=1.0)
        with self.assertRaises(TransportError):
            await alice_session(config)

    async def test_silent_bob_times_out_into_abort(self):
        async def silent(reader, writer):
            while await reader.read(1024):
                pass
            writer.close()

        broker_server = await Broker(AttackModel.honest()).start(HOST, 0)
        bob_server = await asyncio.start_server(silent, HOST, 0)
        config = SessionConfig(
            message=BitString.from_text("0110"), seed=2, frame_timeout=0.2,
            broker=(HOST, bound_port(broker_server)), listen=(HOST, bound_port(bob_server)),
        )
        try:
            transcript = await alice_session(config)
        finally:
            for server in (bob_server, broker_server):
                server.close()
                await server.wait_closed()
        self.assertFalse(transcript.passed)
        self.assertTrue(transcript.abort_reason.startswith("timeout"))
        self.assertEqual(transcript.classical_bits_sent, 0)
        self.assertEqual(transcript.phases[-1], "aborted")

    async def test_bob_rejects_early_announcement(self):
        broker_server = await Broker(AttackModel.honest()).start(HOST, 0)
        config = SessionConfig(broker=(HOST, bound_port(broker_server)), listen=(HOST, 0), frame_timeout=2.0)
        bob_server, bob_done = await serve_bob(config)
        rogue = await open_channel((HOST, bound_port(bob_server)), "rogue", 2.0, "bob")
        try:
            await rogue.send(FrameType.HELLO, {
                "role": "alice", "seed": 1, "attack": "honest",
                "n_check": 0, "n_message": 2, "check_indices": [],
            })
            await rogue.expect(FrameType.HELLO)
            await rogue.send(FrameType.ANNOUNCE, {"bits": "01"})
            with self.assertRaises(ProtocolViolation):
                await rogue.receive()
            with self.assertRaises(ProtocolViolation):
                await asyncio.wait_for(bob_done, timeout=5)
        finally:
            await rogue.close()
            for server in (bob_server, broker_server):
                server.close()
                await server.wait_closed()


if __name__ == "__main__":
    unittest.main()
