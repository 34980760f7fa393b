# src/security/oracle.py
"""
Exact reference probabilities by brute-force enumeration.

Nothing here samples. Every number comes from enumerating all joint outcomes
of the relevant qubits with `project()`, over every branch of the source
(Eve's basis choice and outcome for intercept-resend). The Monte-Carlo engine
is tested against these values.
"""

import itertools
from typing import Dict, List, Mapping, Optional, Tuple

from src.adversary.attacks import EVE_LABEL, AttackKind, AttackModel, EveHandle, InterceptPolicy
from src.errors import EveAbsentError
from src.quantum.state import (
    Basis,
    StateVector,
    add_qubit,
    apply_cnot,
    make_bell_pair,
    project,
)

Branch = Tuple[float, StateVector, Optional[EveHandle]]


def joint_distribution(state: StateVector, bases: Mapping[str, Basis]) -> Dict[Tuple[int, ...], float]:
    """
    Probability of every joint outcome when the given labels are measured.

    Outcome tuples follow the iteration order of `bases`. Impossible outcomes
    are reported with probability 0.
    """
    labels = list(bases)
    distribution: Dict[Tuple[int, ...], float] = {}
    for outcome in itertools.product((0, 1), repeat=len(labels)):
        probability, current = 1.0, state
        for label, bit in zip(labels, outcome):
            step, current = project(current, label, bases[label], bit)
            probability *= step
            if current is None:
                probability = 0.0
                break
        distribution[outcome] = probability
    return distribution


def source_branches(attack: AttackModel) -> List[Branch]:
    """(weight, state seen by Alice and Bob, Eve's handle) for each source branch."""
    bell = make_bell_pair()
    if attack.kind == AttackKind.HONEST:
        return [(1.0, bell, None)]
    if attack.kind == AttackKind.GHZ_PROBE:
        probe = apply_cnot(add_qubit(bell, EVE_LABEL), "B", EVE_LABEL)
        return [(1.0, probe, EveHandle(label=EVE_LABEL))]

    policy_weights = {
        InterceptPolicy.Z: {Basis.Z: 1.0},
        InterceptPolicy.X: {Basis.X: 1.0},
        InterceptPolicy.RANDOM: {Basis.Z: 0.5, Basis.X: 0.5},
    }[attack.policy]
    branches: List[Branch] = []
    for basis, weight in policy_weights.items():
        for bit in (0, 1):
            probability, collapsed = project(bell, "B", basis, bit)
            if collapsed is not None:
                branches.append((weight * probability, collapsed, EveHandle(basis=basis, outcome=bit)))
    return branches


def mismatch_probability(attack: AttackModel, basis: Basis) -> float:
    """P(a != b) when both parties measure a check pair in `basis`."""
    total = 0.0
    for weight, state, _ in source_branches(attack):
        distribution = joint_distribution(state, {"A": basis, "B": basis})
        total += weight * (distribution[(0, 1)] + distribution[(1, 0)])
    return total


def kept_mismatch_probability(attack: AttackModel) -> float:
    """Per kept round detection probability; the kept basis is Z or X with 1/2 each."""
    return 0.5 * mismatch_probability(attack, Basis.Z) + 0.5 * mismatch_probability(attack, Basis.X)


def expected_survival(attack: AttackModel, kept_rounds: int) -> float:
    """P(Pass) after exactly `kept_rounds` compared rounds: (1 - p)^n."""
    return (1.0 - kept_mismatch_probability(attack)) ** kept_rounds


def expected_pair_survival(attack: AttackModel, n_check: int) -> float:
    """P(Pass) with n_check check pairs; each pair is kept with probability 1/2."""
    return (1.0 - 0.5 * kept_mismatch_probability(attack)) ** n_check


def bob_error_probability(attack: AttackModel) -> float:
    """Message-bit error rate for Bob (Z-Z message rounds)."""
    return mismatch_probability(attack, Basis.Z)


def eve_correct_probability(attack: AttackModel) -> float:
    """
    P(Eve's guess bit = message bit).

    Eve guesses c XOR e = m XOR a XOR e, so she is right exactly when her
    record e equals Alice's Z outcome a.

    Raises:
        EveAbsentError: on the honest channel.
    """
    if not attack.has_eve:
        raise EveAbsentError("no eavesdropper on an honest channel")
    total = 0.0
    for weight, state, handle in source_branches(attack):
        if handle.holds_qubit:
            distribution = joint_distribution(state, {"A": Basis.Z, handle.label: Basis.Z})
            total += weight * (distribution[(0, 0)] + distribution[(1, 1)])
        else:
            distribution = joint_distribution(state, {"A": Basis.Z})
            total += weight * distribution[(handle.outcome,)]
    return total
