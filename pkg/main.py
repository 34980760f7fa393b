"""
EPR Direct Communication - Command Line
=======================================
Run protocol sessions in-process, sweep attacks against the channel test,
serve the wire roles, and summarize JSONL transcripts.

SUBCOMMANDS:
------------
    simulate       end-to-end sessions, JSONL transcripts + summary
    attack-sweep   survival of an attack vs. number of check rounds
    serve-broker   pair broker for the wire harness
    run-alice      Alice over TCP (optionally hosting the broker)
    run-bob        Bob over TCP, waits for one Alice session
    stats          aggregate JSONL transcripts by (attack, n_check)

Exit codes: 0 success, 2 usage/config error, 3 protocol violation,
1 transport failure.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

from colorama import Fore, Style, just_fix_windows_console
from dotenv import load_dotenv

from src.adversary.attacks import AttackModel
from src.errors import ConfigError, EprError, FrameError, ProtocolViolation, TransportError
from src.protocol.bits import BitString, random_message
from src.protocol.config import (
    DEFAULT_BROKER,
    DEFAULT_FRAME_TIMEOUT,
    DEFAULT_LISTEN,
    DistributionMode,
    SessionConfig,
    parse_endpoint,
    resolve_seed,
)
from src.protocol.session_graph import get_session_visualization, run_until_pass
from src.protocol.transcript import Transcript
from src.quantum.rng import RandomStream, derive_seed
from src.security.detection import DetectionStats, estimate_detection, estimate_survival
from src.security.oracle import expected_pair_survival, expected_survival, kept_mismatch_probability
from src.utils.logger import LOG_FILE, ActionType, log_experiment
from src.utils.stats_dashboard import StatsDashboard, session_summary
from src.wire.broker import broker_serve
from src.wire.roles import run_alice, run_bob

load_dotenv()

# Configure module logger
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TRANSPORT = 1
EXIT_USAGE = 2
EXIT_PROTOCOL = 3


# =============================================================================
# ARGUMENT HELPERS
# =============================================================================

def parse_check_range(text: str) -> List[int]:
    """'1..32' (inclusive), '1,2,4,8' or a single number."""
    text = text.strip()
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            values = list(range(low, high + 1))
        else:
            values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"bad --n-check range '{text}'") from None
    if not values or any(value < 0 for value in values):
        raise ConfigError(f"--n-check range must be non-empty and non-negative, got '{text}'")
    return values


def trial_seed(seed: int, trial: int) -> int:
    """Trial 0 replays the run seed itself; later trials derive from it."""
    return seed if trial == 0 else derive_seed(seed, trial)


def _add_message_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--message", type=str, default=None, help="Secret bits, e.g. 0100100 (may be empty)")
    group.add_argument("--random-bits", type=int, default=None, metavar="N",
                       help="Draw a uniform N-bit message per session")


def _add_session_options(parser: argparse.ArgumentParser, n_check: bool = True) -> None:
    parser.add_argument("--attack", type=str, default="honest",
                        help="honest | ghz-probe | intercept-resend[:random|z|x] (default: honest)")
    if n_check:
        parser.add_argument("--n-check", type=int, default=None, help="Check pairs (default: max(16, |m|))")
    parser.add_argument("--seed", type=int, default=None, help="Run seed (default: $EPR_SEED, else fresh)")
    parser.add_argument("--output", type=str, default=None, help="JSONL destination, '-' for stdout")


def _add_wire_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--broker", type=str, default="%s:%d" % DEFAULT_BROKER, help="Broker host:port")
    parser.add_argument("--listen", type=str, default="%s:%d" % DEFAULT_LISTEN, help="Bob's host:port")
    parser.add_argument("--timeout", type=float, default=DEFAULT_FRAME_TIMEOUT,
                        help=f"Seconds to wait for any frame (default: {DEFAULT_FRAME_TIMEOUT:g})")


# =============================================================================
# CLI ARGUMENT HANDLING
# =============================================================================

def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse CLI arguments.

    Usage:
        python main.py simulate --message 0100100 --attack honest --seed 7
        python main.py simulate --random-bits 32 --attack ghz-probe --trials 1000 --output runs.jsonl
        python main.py attack-sweep --attack ghz-probe --n-check 1..32 --trials 10000
        python main.py stats --input runs.jsonl
        python main.py --show-graph
    """
    parser = argparse.ArgumentParser(
        prog="epr-direct",
        description="🔐 EPR-pair direct communication simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py simulate --message 0100100 --seed 7
  python main.py attack-sweep --attack intercept-resend --n-check 1,2,4,8,16 --trials 10000
  python main.py serve-broker --attack ghz-probe --broker 127.0.0.1:7878
  python main.py run-bob --listen 127.0.0.1:7879
  python main.py run-alice --message 0100100 --seed 7
        """
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose (INFO) logging")
    parser.add_argument("--experiment-log", type=str, default=LOG_FILE,
                        help=f"Experiment log path (default: {LOG_FILE}); '' disables it")
    parser.add_argument("--show-graph", action="store_true", help="Display the session graph and exit")

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    simulate = commands.add_parser("simulate", help="Run end-to-end sessions")
    _add_message_options(simulate)
    _add_session_options(simulate)
    simulate.add_argument("--trials", type=int, default=1, help="Independent sessions (default: 1)")
    simulate.add_argument("--jobs", type=int, default=1, help="Worker processes (default: 1)")
    simulate.add_argument("--rebuild", type=int, default=0, metavar="N",
                          help="After an Abort, retry on fresh pairs up to N times")

    sweep = commands.add_parser("attack-sweep", help="Survival probability vs. check rounds")
    _add_session_options(sweep, n_check=False)
    sweep.add_argument("--n-check", dest="n_check_range", type=str, default="1..32",
                       help="Rounds to sweep: '1..32', '1,2,4' or 'N' (default: 1..32)")
    sweep.add_argument("--trials", type=int, default=1000, help="Trials per point (default: 1000)")
    sweep.add_argument("--count", choices=("kept", "pairs"), default="kept",
                       help="Count compared (same-basis) rounds or check pairs (default: kept)")
    sweep.add_argument("--jobs", type=int, default=1, help="Worker processes (default: 1)")

    broker = commands.add_parser("serve-broker", help="Serve pairs over TCP")
    broker.add_argument("--attack", type=str, default="honest", help="Channel source the broker emits")
    broker.add_argument("--seed", type=int, default=None, help="Seed for sessions that do not send one")
    broker.add_argument("--broker", type=str, default="%s:%d" % DEFAULT_BROKER, help="Bind host:port")
    broker.add_argument("--timeout", type=float, default=DEFAULT_FRAME_TIMEOUT,
                        help=f"Seconds a client may take to send a frame (default: {DEFAULT_FRAME_TIMEOUT:g})")

    alice = commands.add_parser("run-alice", help="Run Alice against a broker and Bob")
    _add_message_options(alice)
    _add_session_options(alice)
    _add_wire_options(alice)
    alice.add_argument("--distribution", choices=[mode.value for mode in DistributionMode],
                       default=DistributionMode.SERVER.value,
                       help="server: stand-alone broker; alice: host the broker in this process")

    bob = commands.add_parser("run-bob", help="Wait for one Alice session")
    bob.add_argument("--attack", type=str, default="honest", help="Expected channel (the broker's wins)")
    bob.add_argument("--seed", type=int, default=None, help="Own seed; default replays Alice's")
    bob.add_argument("--output", type=str, default=None, help="JSONL destination, '-' for stdout")
    _add_wire_options(bob)

    stats = commands.add_parser("stats", help="Summarize JSONL transcripts")
    stats.add_argument("--input", type=str, required=True, help="JSONL file written by simulate/run-alice")
    stats.add_argument("--no-color", action="store_true", help="Plain table")

    args = parser.parse_args(argv)
    if not args.show_graph and not args.command:
        parser.error("a subcommand is required")
    return args


def validate_arguments(args: argparse.Namespace) -> None:
    """
    Check values argparse cannot.

    Raises:
        ConfigError: invalid combination or range.
    """
    for name in ("trials", "jobs", "rebuild", "random_bits", "n_check"):
        value = getattr(args, name, None)
        if value is None:
            continue
        minimum = 1 if name in ("trials", "jobs") else 0
        if value < minimum:
            raise ConfigError(f"--{name.replace('_', '-')} must be >= {minimum}", details={"value": value})
    if getattr(args, "timeout", None) is not None and args.timeout <= 0:
        raise ConfigError("--timeout must be positive", details={"value": args.timeout})
    if hasattr(args, "attack"):
        args.attack_model = AttackModel.parse(args.attack)
    if hasattr(args, "message") and args.message is not None:
        try:
            args.message_bits = BitString.from_text(args.message)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    if hasattr(args, "n_check_range"):
        args.n_check_values = parse_check_range(args.n_check_range)


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


# =============================================================================
# OUTPUT
# =============================================================================

def _open_output(path: Optional[str]) -> Optional[TextIO]:
    if path is None:
        return None
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def write_jsonl(path: Optional[str], records: Iterable[Dict[str, Any]]) -> None:
    """One compact JSON object per line; '-' is standard output."""
    stream = _open_output(path)
    if stream is None:
        return
    try:
        for record in records:
            stream.write(json.dumps(record, separators=(",", ":")) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
        else:
            stream.flush()


def _report_stream(args: argparse.Namespace) -> TextIO:
    # Keep stdout clean when it carries JSONL.
    return sys.stderr if getattr(args, "output", None) == "-" else sys.stdout


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _color(text: str, tint: str, enabled: bool) -> str:
    return f"{tint}{text}{Style.RESET_ALL}" if enabled else text


def echo_seed(seed: int, source: str, out: TextIO) -> None:
    print(f"🎲 seed={seed} ({source})", file=out)


def record_run(args: argparse.Namespace, action: ActionType, details: Dict[str, Any], status: str) -> None:
    if not args.experiment_log:
        return
    try:
        log_experiment("cli", action, details, status=status, log_file=args.experiment_log)
    except OSError as e:
        logger.warning("Could not write experiment log %s: %s", args.experiment_log, e)


# =============================================================================
# SIMULATE
# =============================================================================

def simulate_trial(task: Tuple[int, Optional[str], Optional[int], str, Optional[int], int]) -> List[Dict[str, Any]]:
    """
    One trial (plus its rebuilds) as JSONL records.

    Runs in worker processes, so it takes and returns plain data only.
    """
    seed, message_text, random_bits, attack_name, n_check, rebuild = task
    message = BitString.from_text(message_text) if message_text is not None else random_message(seed, random_bits or 0)
    config = SessionConfig(
        message=message, n_check=n_check, attack=AttackModel.parse(attack_name), seed=seed, max_rebuilds=rebuild
    )
    return [transcript.to_record() for transcript in run_until_pass(message, config.attack, config)]


def run_trials(tasks: List[tuple], jobs: int) -> List[Dict[str, Any]]:
    """Run tasks on a worker pool; results come back in task order."""
    if jobs <= 1 or len(tasks) <= 1:
        batches = [simulate_trial(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(simulate_trial, tasks, chunksize=max(1, len(tasks) // (jobs * 4))))
    return [record for batch in batches for record in batch]


def print_session_summary(transcripts: List[Transcript], attack: AttackModel, out: TextIO, color: bool) -> None:
    summary = session_summary(transcripts)
    print("\n" + "=" * 60, file=out)
    print(f"📊 SESSION SUMMARY ({attack.name})", file=out)
    print("=" * 60, file=out)
    print(f"Sessions: {summary['sessions']}  Passed: {summary['passed']}  "
          f"Pass rate: {_fmt(summary['pass_rate'])}", file=out)
    print(f"Message bits delivered: {summary['message_bits']}", file=out)
    ber = summary["bob_error_rate"]
    tint = Fore.GREEN if not ber else Fore.RED
    print(f"Bob bit-error rate: {_color(_fmt(ber), tint, color)}", file=out)
    print(f"Eve correct fraction: {_fmt(summary['eve_correct_fraction'])}", file=out)
    print(f"Classical bits per secret bit: {_fmt(summary['classical_bits_per_secret_bit'], 2)} "
          f"(teleportation scheme: {summary['teleportation_bits_per_secret_bit']:.1f})", file=out)
    if len(transcripts) == 1 and transcripts[0].passed:
        only = transcripts[0]
        print(f"Message: '{only.message}'  Announcement: '{only.announcement}'  Decoded: '{only.decoded}'", file=out)
    print("=" * 60, file=out)


def command_simulate(args: argparse.Namespace, seed: int) -> int:
    out = _report_stream(args)
    message_text = args.message_bits.to_text() if args.message is not None else None
    random_bits = args.random_bits if args.message is None else None
    if message_text is None and random_bits is None:
        raise ConfigError("simulate needs --message or --random-bits")
    SessionConfig(n_check=args.n_check, seed=seed, max_rebuilds=args.rebuild).validate()

    tasks = [
        (trial_seed(seed, trial), message_text, random_bits, args.attack_model.name, args.n_check, args.rebuild)
        for trial in range(args.trials)
    ]
    records = run_trials(tasks, args.jobs)
    write_jsonl(args.output, records)
    transcripts = [Transcript.from_record(record) for record in records]
    print_session_summary(transcripts, args.attack_model, out, color=out.isatty())
    record_run(args, ActionType.SIMULATE, {
        "seed": seed, "attack": args.attack_model.name, "trials": args.trials,
        "n_check": args.n_check, "passed": sum(t.passed for t in transcripts), "output": args.output,
    }, "SUCCESS")
    return EXIT_OK


# =============================================================================
# ATTACK SWEEP
# =============================================================================

def sweep_point(task: Tuple[str, int, int, int, str]) -> Dict[str, Any]:
    """One sweep point as a JSONL record, with the oracle's expectation."""
    attack_name, n, trials, seed, count_mode = task
    attack = AttackModel.parse(attack_name)
    rng = RandomStream(derive_seed(seed, n))
    if count_mode == "kept":
        stats = estimate_survival(attack, n, trials, rng)
        expected = expected_survival(attack, n)
    else:
        stats = estimate_detection(attack, n, trials, rng)
        expected = expected_pair_survival(attack, n)
    record = stats.to_record()
    record.update({"seed": seed, "survival": stats.survival, "expected_survival": expected})
    return record


def print_sweep_table(attack: AttackModel, records: List[Dict[str, Any]], out: TextIO, color: bool) -> None:
    mode = records[0]["count_mode"] if records else "kept"
    print("\n" + "=" * 72, file=out)
    print(f"🛡️  ATTACK SWEEP: {attack.name} (per kept round p = {kept_mismatch_probability(attack):.4f}, "
          f"counting {mode})", file=out)
    print("=" * 72, file=out)
    print(f"{'n':>4} {'trials':>7} {'survival':>9} {'95% CI':>19} {'expected':>9}  fit", file=out)
    for record in records:
        stats = DetectionStats(**{key: record[key] for key in DetectionStats.__dataclass_fields__})
        survival_low, survival_high = 1.0 - stats.ci_high, 1.0 - stats.ci_low
        inside = survival_low <= record["expected_survival"] <= survival_high
        mark = _color("✓", Fore.GREEN, color) if inside else _color("✗", Fore.RED, color)
        print(f"{stats.n_check:>4} {stats.trials:>7} {stats.survival:>9.4f} "
              f"[{survival_low:.4f}, {survival_high:.4f}] {record['expected_survival']:>9.4f}  {mark}", file=out)
    print("=" * 72, file=out)


def command_attack_sweep(args: argparse.Namespace, seed: int) -> int:
    out = _report_stream(args)
    tasks = [(args.attack_model.name, n, args.trials, seed, args.count) for n in args.n_check_values]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(sweep_point, tasks))
    else:
        records = [sweep_point(task) for task in tasks]
    write_jsonl(args.output, records)
    print_sweep_table(args.attack_model, records, out, color=out.isatty())
    record_run(args, ActionType.ATTACK_SWEEP, {
        "seed": seed, "attack": args.attack_model.name, "count_mode": args.count,
        "n_check": args.n_check_values, "trials": args.trials,
    }, "SUCCESS")
    return EXIT_OK


# =============================================================================
# WIRE ROLES
# =============================================================================

def command_serve_broker(args: argparse.Namespace, seed: int) -> int:
    bind = parse_endpoint(args.broker)
    print(f"🛰️  Broker for {args.attack_model.name} on {bind[0]}:{bind[1]} (Ctrl+C to stop)")
    record_run(args, ActionType.WIRE_SESSION, {
        "seed": seed, "attack": args.attack_model.name, "role": "broker", "bind": args.broker,
    }, "SUCCESS")
    broker_serve(bind, args.attack_model, seed, args.timeout)
    return EXIT_OK


def _wire_config(args: argparse.Namespace, seed: int, message: BitString) -> SessionConfig:
    return SessionConfig(
        message=message,
        n_check=getattr(args, "n_check", None),
        attack=args.attack_model,
        seed=seed,
        broker=parse_endpoint(args.broker),
        listen=parse_endpoint(args.listen),
        distribution=DistributionMode(getattr(args, "distribution", DistributionMode.SERVER.value)),
        frame_timeout=args.timeout,
    ).validate()


def _print_wire_result(role: str, transcript: Transcript, out: TextIO) -> None:
    print(f"🔗 {role}: verdict={transcript.verdict.value} kept={transcript.kept_rounds} "
          f"mismatches={transcript.mismatches} announcement='{transcript.announcement}' "
          f"decoded='{transcript.decoded}'", file=out)
    if transcript.abort_reason:
        print(f"   abort reason: {transcript.abort_reason}", file=out)


def command_run_alice(args: argparse.Namespace, seed: int) -> int:
    out = _report_stream(args)
    if args.message is not None:
        message = args.message_bits
    elif args.random_bits is not None:
        message = random_message(seed, args.random_bits)
    else:
        raise ConfigError("run-alice needs --message or --random-bits")
    transcript = run_alice(_wire_config(args, seed, message))
    write_jsonl(args.output, [transcript.to_record()])
    _print_wire_result("alice", transcript, out)
    if transcript.eve_guess is not None:
        print(f"   eve guess: '{transcript.eve_guess}'", file=out)
    record_run(args, ActionType.WIRE_SESSION, {
        "seed": seed, "attack": transcript.attack.name, "role": "alice", "verdict": transcript.verdict.value,
    }, "SUCCESS")
    return EXIT_OK


def command_run_bob(args: argparse.Namespace, seed: int, adopt_peer_seed: bool) -> int:
    out = _report_stream(args)
    config = _wire_config(args, seed, BitString())
    print(f"👂 Bob waiting on {config.listen[0]}:{config.listen[1]}", file=out)
    transcript = run_bob(config, adopt_peer_seed=adopt_peer_seed)
    write_jsonl(args.output, [transcript.to_record()])
    _print_wire_result("bob", transcript, out)
    record_run(args, ActionType.WIRE_SESSION, {
        "seed": transcript.seed, "attack": transcript.attack.name, "role": "bob",
        "verdict": transcript.verdict.value,
    }, "SUCCESS")
    return EXIT_OK


# =============================================================================
# STATS
# =============================================================================

def command_stats(args: argparse.Namespace) -> int:
    try:
        dashboard = StatsDashboard(args.input, color=not args.no_color and sys.stdout.isatty())
    except OSError as e:
        raise ConfigError(f"cannot read {args.input}", details={"error": e.strerror}) from None
    dashboard.print_dashboard()
    record_run(args, ActionType.STATS, {
        "input": args.input, "sessions": dashboard.report.sessions, "malformed": len(dashboard.report.malformed),
    }, "SUCCESS")
    return EXIT_OK


# =============================================================================
# MAIN ENTRY POINT
# =============================================================================

def dispatch(args: argparse.Namespace) -> int:
    if args.command == "stats":
        return command_stats(args)

    seed, source = resolve_seed(args.seed)
    if args.command == "run-bob" and args.seed is None:
        source = "unused, replaying Alice's seed"
    echo_seed(seed, source, _report_stream(args))
    if args.command == "simulate":
        return command_simulate(args, seed)
    if args.command == "attack-sweep":
        return command_attack_sweep(args, seed)
    if args.command == "serve-broker":
        return command_serve_broker(args, seed)
    if args.command == "run-alice":
        return command_run_alice(args, seed)
    if args.command == "run-bob":
        return command_run_bob(args, seed, adopt_peer_seed=args.seed is None)
    raise ConfigError(f"unknown command '{args.command}'")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    just_fix_windows_console()
    args = parse_arguments(argv)
    configure_logging(args.verbose)

    if args.show_graph:
        print(get_session_visualization())
        return EXIT_OK

    try:
        validate_arguments(args)
        return dispatch(args)
    except (ProtocolViolation, FrameError) as e:
        print(f"❌ Protocol violation: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except TransportError as e:
        print(f"❌ Transport error: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (EprError, ValueError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
