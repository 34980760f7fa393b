# src/quantum/state.py
"""
Few-qubit pure-state engine.

Conventions:
    - labels[0] is the most significant bit of the basis-state index, so
      amps[0b101] on labels (A, B, E) is the amplitude of |1>_A |0>_B |1>_E
    - Basis.X outcome 0 is (|0> + |1>)/sqrt(2)
    - X-basis measurement is Hadamard, Z measurement, Hadamard; measure()
      does this in one pass and writes the collapsed state back directly
    - states are immutable; every operation returns a new StateVector
    - only user-supplied amplitudes are validated; gates and projections
      build their results through StateVector._trusted

Only H and CNOT are provided. Nothing here knows about Alice, Bob or Eve.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from src.errors import QuantumStateError, UnknownQubitError
from src.quantum.rng import RandomStream

# Configure module logger
logger = logging.getLogger(__name__)

Amplitude = complex

MAX_QUBITS = 4
NORM_TOLERANCE = 1e-9
SQRT2_INV = 1 / np.sqrt(2)

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT2_INV


class Basis(str, Enum):
    """Local measurement bases."""
    Z = "Z"     # {|0>, |1>}
    X = "X"     # {(|0>+|1>)/sqrt2, (|0>-|1>)/sqrt2}


@dataclass(frozen=True)
class StateVector:
    """
    Normalized amplitude vector over 1..4 labelled qubits.

    Attributes:
        amps: complex array of length 2**num_qubits.
        labels: Qubit labels, most significant first.

    Raises:
        QuantumStateError: wrong size, duplicate labels, NaN/Inf or norm
            off by more than NORM_TOLERANCE.
    """

    amps: np.ndarray
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        labels = tuple(self.labels)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "labels", labels)

        if not 1 <= len(labels) <= MAX_QUBITS:
            raise QuantumStateError(
                "unsupported qubit count", details={"num_qubits": len(labels), "max": MAX_QUBITS}
            )
        if len(set(labels)) != len(labels):
            raise QuantumStateError("duplicate qubit labels", details={"labels": labels})
        if amps.shape[0] != 2 ** len(labels):
            raise QuantumStateError(
                "amplitude count does not match labels",
                details={"amps": amps.shape[0], "labels": len(labels)},
            )
        if not np.all(np.isfinite(amps)):
            raise QuantumStateError("non-finite amplitude")
        norm = self.norm()
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise QuantumStateError("state is not normalized", details={"norm": norm})

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def norm(self) -> float:
        """Sum of squared amplitude magnitudes."""
        return float(np.sum(np.abs(self.amps) ** 2))

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownQubitError(
                "unknown qubit label", details={"label": label, "labels": self.labels}
            ) from None

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per qubit."""
        return self.amps.reshape([2] * self.num_qubits)

    def allclose(self, other: "StateVector", atol: float = 1e-12) -> bool:
        return self.labels == other.labels and bool(np.allclose(self.amps, other.amps, atol=atol))

    @classmethod
    def _trusted(cls, amps: np.ndarray, labels: Tuple[str, ...]) -> "StateVector":
        """Wrap amplitudes produced by a unitary or a projection without re-validating."""
        state = object.__new__(cls)
        object.__setattr__(state, "amps", amps)
        object.__setattr__(state, "labels", labels)
        return state


def _axis_slice(num_qubits: int, axis: int, value: int) -> tuple:
    index = [slice(None)] * num_qubits
    index[axis] = value
    return tuple(index)


# =============================================================================
# STATE CONSTRUCTION
# =============================================================================

def basis_state(labels: Sequence[str], bits: Sequence[int]) -> StateVector:
    """Computational basis state |bits> on the given labels."""
    if len(labels) != len(bits):
        raise QuantumStateError("labels and bits differ in length")
    amps = np.zeros(2 ** len(labels), dtype=complex)
    amps[int("".join(str(int(bit)) for bit in bits), 2)] = 1.0
    return StateVector(amps, tuple(labels))


def make_bell_pair(labels: Tuple[str, str] = ("A", "B")) -> StateVector:
    """|Phi+> = (|00> + |11>)/sqrt2 on (A, B)."""
    return StateVector._trusted(np.array([SQRT2_INV, 0, 0, SQRT2_INV], dtype=complex), tuple(labels))


def make_ghz_probe(labels: Tuple[str, str, str] = ("A", "B", "E")) -> StateVector:
    """(|000> + |111>)/sqrt2 on (A, B, E): the channel after Eve's probe coupling."""
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[7] = SQRT2_INV
    return StateVector._trusted(amps, tuple(labels))


def add_qubit(state: StateVector, label: str) -> StateVector:
    """Append an ancilla |0> as the new least significant qubit."""
    if label in state.labels:
        raise QuantumStateError("label already present", details={"label": label})
    if state.num_qubits >= MAX_QUBITS:
        raise QuantumStateError(
            "unsupported qubit count", details={"num_qubits": state.num_qubits + 1, "max": MAX_QUBITS}
        )
    amps = np.zeros(2 * state.amps.shape[0], dtype=complex)
    amps[::2] = state.amps
    return StateVector._trusted(amps, state.labels + (label,))


# =============================================================================
# GATES
# =============================================================================

def _halves(state: StateVector, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Views of the amplitudes with qubit `axis` at 0 and at 1."""
    tensor = state.tensor()
    n = state.num_qubits
    return tensor[_axis_slice(n, axis, 0)], tensor[_axis_slice(n, axis, 1)]


def _join(state: StateVector, axis: int, zero, one) -> StateVector:
    """New state on `state`'s labels from its qubit-`axis` halves (arrays or scalars)."""
    n = state.num_qubits
    tensor = np.empty((2,) * n, dtype=complex)
    tensor[_axis_slice(n, axis, 0)] = zero
    tensor[_axis_slice(n, axis, 1)] = one
    return StateVector._trusted(tensor.reshape(-1), state.labels)


def apply_hadamard(state: StateVector, qubit: str) -> StateVector:
    axis = state.index_of(qubit)
    zero, one = _halves(state, axis)
    return _join(state, axis, (zero + one) * SQRT2_INV, (zero - one) * SQRT2_INV)


def apply_cnot(state: StateVector, control: str, target: str) -> StateVector:
    """Flip target on every basis state whose control bit is 1."""
    if control == target:
        raise QuantumStateError("control and target must differ", details={"qubit": control})
    c_axis, t_axis = state.index_of(control), state.index_of(target)
    n = state.num_qubits
    tensor = state.tensor()
    flipped = tensor.copy()

    def idx(c_value: int, t_value: int) -> tuple:
        index = [slice(None)] * n
        index[c_axis], index[t_axis] = c_value, t_value
        return tuple(index)

    flipped[idx(1, 0)], flipped[idx(1, 1)] = tensor[idx(1, 1)], tensor[idx(1, 0)]
    return StateVector._trusted(flipped.reshape(-1), state.labels)


# =============================================================================
# MEASUREMENT
# =============================================================================

def _frame_halves(state: StateVector, axis: int, basis: Basis) -> Tuple[np.ndarray, np.ndarray]:
    """Amplitudes for outcome 0 and outcome 1 of `basis` on qubit `axis`."""
    zero, one = _halves(state, axis)
    if basis is Basis.X:
        return (zero + one) * SQRT2_INV, (zero - one) * SQRT2_INV
    return zero, one


def _weight(half: np.ndarray) -> float:
    return float(np.vdot(half, half).real)


def _collapse(
    state: StateVector, axis: int, basis: Basis, bit: int, kept: np.ndarray, probability: float
) -> StateVector:
    """Post-measurement state, written straight back in the computational frame."""
    kept = kept / np.sqrt(probability)
    if basis is Basis.X:
        kept = kept * SQRT2_INV
        return _join(state, axis, kept, kept if bit == 0 else -kept)
    return _join(state, axis, kept, 0) if bit == 0 else _join(state, axis, 0, kept)


def probabilities(state: StateVector, qubit: str, basis: Basis) -> Tuple[float, float]:
    """Outcome probabilities (p0, p1) for measuring one qubit."""
    halves = _frame_halves(state, state.index_of(qubit), Basis(basis))
    return _weight(halves[0]), _weight(halves[1])


def project(
    state: StateVector, qubit: str, basis: Basis, bit: int
) -> Tuple[float, Optional[StateVector]]:
    """
    Project one qubit onto outcome `bit` of `basis`.

    Returns:
        (probability, normalized post-measurement state), or (0.0, None)
        when the outcome is impossible.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    axis, basis = state.index_of(qubit), Basis(basis)
    kept = _frame_halves(state, axis, basis)[bit]
    probability = _weight(kept)
    if probability <= 0.0:
        return 0.0, None
    return probability, _collapse(state, axis, basis, bit, kept, probability)


def measure(
    state: StateVector, qubit: str, basis: Basis, rng: RandomStream
) -> Tuple[int, StateVector]:
    """
    Projective measurement with collapse.

    One uniform draw u from `rng` decides the outcome: 0 when u < p0.

    Raises:
        QuantumStateError: the outcome probabilities do not sum to 1.
        UnknownQubitError: `qubit` is not a label of `state`.
    """
    axis, basis = state.index_of(qubit), Basis(basis)
    halves = _frame_halves(state, axis, basis)
    p0, p1 = _weight(halves[0]), _weight(halves[1])
    if abs(p0 + p1 - 1.0) > NORM_TOLERANCE:
        raise QuantumStateError("outcome probabilities do not sum to 1", details={"p0": p0, "p1": p1})
    bit = 0 if rng.uniform() < p0 else 1
    if (p0, p1)[bit] <= 0.0:
        bit = 1 - bit
    collapsed = _collapse(state, axis, basis, bit, halves[bit], (p0, p1)[bit])
    logger.debug("measure %s in %s -> %d (p0=%.6f)", qubit, basis.value, bit, p0)
    return bit, collapsed
