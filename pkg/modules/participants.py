"""
Initiator, voter and worker roles as tick-driven state machines.

Each role is parameterized by a Behavior: Honest, or one of the deviations
the adversary model covers. The Scheduler advances a global logical clock;
at every tick each role with a pending action appends to the ledger, in an
order shuffled by the scenario seed. Roles read the ledger as it stood at
the start of the tick.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, ClassVar, List, Optional, Sequence, Tuple

from modules.crypto_suite import Ciphertext, CryptoError, CryptoSuite, KeyPair, ParticipantId
from modules.field_sss import FieldElement, Share, add_shares, share_secret, square_share, zero_share
from modules.ledger import Ledger, Record
from modules.messages import (
    ChecksumShare,
    Envelope,
    InitBroadcast,
    MessageKind,
    MessageSyntaxError,
    ReferendumParams,
    ResultShare,
    VoteShare,
    decode_envelope,
    decode_share,
    encode_share,
    make_signed,
    verify_signature,
)
from modules.verifier import audit
from utils.logger import get_logger, get_trace_logger


class ProtocolOrderError(RuntimeError):
    """An action was attempted out of protocol order."""


# Behaviours

@dataclass(frozen=True)
class Behavior:
    KIND: ClassVar[str] = "abstract"

    def describe(self) -> str:
        return self.KIND


@dataclass(frozen=True)
class Honest(Behavior):
    KIND: ClassVar[str] = "honest"


@dataclass(frozen=True)
class Inactive(Behavior):
    KIND: ClassVar[str] = "inactive"


@dataclass(frozen=True)
class PartialDistribution(Behavior):
    """Send shares only to the listed worker positions (0-based)."""

    KIND: ClassVar[str] = "partial-distribution"
    workers: Tuple[int, ...]


@dataclass(frozen=True)
class SyntacticGarbage(Behavior):
    KIND: ClassVar[str] = "syntactic-garbage"


@dataclass(frozen=True)
class Impersonate(Behavior):
    KIND: ClassVar[str] = "impersonate"
    target: ParticipantId


@dataclass(frozen=True)
class InvalidVote(Behavior):
    """Share an integer outside {+1, -1}; embedded into the field."""

    KIND: ClassVar[str] = "invalid-vote"
    value: int


@dataclass(frozen=True)
class WrongIntermediate(Behavior):
    KIND: ClassVar[str] = "wrong-intermediate"
    offset: int
    apply_to: str = "r"

    def __post_init__(self):
        if self.apply_to not in ("r", "c", "both"):
            raise ValueError(f"apply_to must be r, c or both, got {self.apply_to!r}")


@dataclass(frozen=True)
class DoubleVote(Behavior):
    """Full share sets for each (vote, tick) entry."""

    KIND: ClassVar[str] = "double-vote"
    sequence: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class OffSchedule(Behavior):
    """Honest content, submitted at the given tick instead of the scheduled one."""

    KIND: ClassVar[str] = "off-schedule"
    tick: int


VOTER_BEHAVIORS = (Honest, Inactive, PartialDistribution, SyntacticGarbage, Impersonate,
                   InvalidVote, DoubleVote, OffSchedule)
WORKER_BEHAVIORS = (Honest, Inactive, WrongIntermediate, OffSchedule)

GARBAGE_PAYLOAD = b"\xff\xff not a ciphertext"


# Phases

class Phase(Enum):
    PRE_INIT = "pre-init"
    VOTE_SUBMISSION = "vote-submission"
    INTERMEDIATE_COMPUTATION = "intermediate-computation"
    DETERMINATION = "determination"


@dataclass
class PhaseClock:
    q12: int
    q23: int
    q34: int
    current_tick: int = 0

    @classmethod
    def for_params(cls, params: ReferendumParams) -> "PhaseClock":
        return cls(params.q12, params.q23, params.q34)

    def phase(self, tick: Optional[int] = None) -> Phase:
        tick = self.current_tick if tick is None else tick
        if tick < self.q12:
            return Phase.PRE_INIT
        if tick < self.q23:
            return Phase.VOTE_SUBMISSION
        if tick < self.q34:
            return Phase.INTERMEDIATE_COMPUTATION
        return Phase.DETERMINATION

    def advance(self) -> int:
        self.current_tick += 1
        return self.current_tick


# Role operations

def initiator_publish(params: ReferendumParams, keypair: KeyPair, ledger: Ledger, suite: CryptoSuite,
                      tick: Optional[int] = None) -> int:
    """
    Place the init broadcast; the only action the initiator ever takes.

    Raises:
        ProtocolOrderError: a broadcast from this initiator already exists, or
            tick differs from q12
    """
    tick = params.q12 if tick is None else tick
    if tick != params.q12:
        raise ProtocolOrderError(f"Init broadcast belongs at tick q12={params.q12}, not {tick}")
    if ledger.query(kind=MessageKind.INIT, sender=keypair.id):
        raise ProtocolOrderError("Initiator already published the referendum parameters")
    params.check_role_isolation(keypair.id)
    message = make_signed(InitBroadcast(sender=keypair.id, params=params), keypair, suite)
    seq = ledger.append(message, tick)
    get_logger().info(f"Referendum initiated at seq {seq}: {params.k} voters, {params.n} workers, t={params.threshold}")
    return seq


def _submit_vote(value: FieldElement, keypair: KeyPair, params: ReferendumParams, ledger: Ledger, tick: int,
                 suite: CryptoSuite, randomness, worker_positions: Optional[Sequence[int]] = None,
                 forged_sender: Optional[ParticipantId] = None) -> List[int]:
    shares = share_secret(value, params.sharing_params(), randomness)
    positions = range(params.n) if worker_positions is None else sorted(set(worker_positions))
    seqs = []
    for j in positions:
        worker = params.workers[j]
        ciphertext = suite.encrypt(encode_share(shares[j]), worker, randomness)
        message = VoteShare(sender=keypair.id, to=worker, ciphertext=ciphertext.blob)
        seqs.append(ledger.append(make_signed(message, keypair, suite, forged_sender=forged_sender), tick))
    return seqs


def voter_act(vote_choice: int, behavior: Behavior, keypair: KeyPair, params: ReferendumParams, ledger: Ledger,
              tick: int, suite: CryptoSuite, randomness) -> List[int]:
    """
    Perform the voter's submission for this tick.

    Honest voters share vote_choice (+1 or -1) among all workers, one
    encrypted share per worker. Adversarial behaviours deviate as named;
    DoubleVote submits the entries scheduled for this tick.

    Returns:
        Sequence numbers of the appended records
    """
    if vote_choice not in (1, -1):
        raise ValueError(f"Vote choice must be +1 or -1, got {vote_choice}")
    vote = FieldElement.of(vote_choice, params.modulus)

    if isinstance(behavior, Inactive):
        return []
    if isinstance(behavior, PartialDistribution):
        return _submit_vote(vote, keypair, params, ledger, tick, suite, randomness,
                            worker_positions=behavior.workers)
    if isinstance(behavior, SyntacticGarbage):
        seqs = []
        for worker in params.workers:
            envelope = Envelope(MessageKind.VOTE_SHARE, keypair.id.public_key_bytes,
                                worker.public_key_bytes, GARBAGE_PAYLOAD)
            signed = Envelope(envelope.kind, envelope.sender, envelope.recipient, envelope.payload,
                              suite.sign(envelope.signed_bytes(), keypair))
            seqs.append(ledger.append(signed, tick))
        return seqs
    if isinstance(behavior, Impersonate):
        return _submit_vote(vote, keypair, params, ledger, tick, suite, randomness,
                            forged_sender=behavior.target)
    if isinstance(behavior, InvalidVote):
        return _submit_vote(FieldElement.of(behavior.value, params.modulus), keypair, params, ledger, tick,
                            suite, randomness)
    if isinstance(behavior, DoubleVote):
        seqs = []
        for choice, at in behavior.sequence:
            if at == tick:
                seqs += _submit_vote(FieldElement.of(choice, params.modulus), keypair, params, ledger, tick,
                                     suite, randomness)
        return seqs
    return _submit_vote(vote, keypair, params, ledger, tick, suite, randomness)


def _own_share(record: Record, keypair: KeyPair, params: ReferendumParams, suite: CryptoSuite) -> Optional[Share]:
    """Decrypt one accepted vote share; None when it cannot be used."""
    try:
        message = decode_envelope(record.envelope(), suite)
        plaintext = suite.decrypt(Ciphertext(keypair.id, message.ciphertext), keypair)
        share = decode_share(plaintext)
    except (CryptoError, MessageSyntaxError, AttributeError):
        return None
    if (share.eval_point != params.eval_point_of(keypair.id) or share.power != 1
            or share.degree_hint != params.threshold - 1 or share.modulus != params.modulus):
        return None
    return share


def compute_intermediate(snapshot: Sequence[Record], keypair: KeyPair, params: ReferendumParams,
                         suite: CryptoSuite, initiator: Optional[ParticipantId] = None):
    """
    Worker-side homomorphic sums over the accepted voters' shares.

    Returns:
        (r share, c share, ids of voters whose shares were summed)
    """
    logger = get_logger()
    accepted = audit(snapshot, params, suite, initiator).accepted_shares
    by_seq = {record.seq: record for record in snapshot}
    point = params.eval_point_of(keypair.id)
    degree = params.threshold - 1

    # Sum r and c over the voters the shared audit accepts
    outcome = zero_share(point, degree)
    checksum = zero_share(point, 2 * degree, power=2)
    used = []
    for voter, per_worker in accepted.items():
        share = _own_share(by_seq[per_worker[keypair.id]], keypair, params, suite)
        if share is None:
            # The verifier still counts this voter; this worker's r and c end up outliers
            logger.warning(f"Worker {keypair.id.short()}: share from voter {voter.short()} unusable, voter ignored")
            continue
        outcome = add_shares(outcome, share)
        checksum = add_shares(checksum, square_share(share))
        used.append(voter)
    return outcome, checksum, used


def worker_act(behavior: Behavior, keypair: KeyPair, params: ReferendumParams, ledger: Ledger, tick: int,
               suite: CryptoSuite, snapshot: Optional[Sequence[Record]] = None,
               initiator: Optional[ParticipantId] = None) -> List[int]:
    """
    Compute and publish this worker's result and checksum shares.

    Args:
        snapshot: Ledger view the worker computes on (default: the full ledger)
        initiator: Expected init broadcast sender, passed to the shared audit

    Returns:
        Sequence numbers of the appended r and c records
    """
    if isinstance(behavior, Inactive):
        return []
    if params.worker_position(keypair.id) is None:
        raise ProtocolOrderError(f"{keypair.id.short()} is not a designated worker")
    snapshot = ledger.records() if snapshot is None else snapshot
    outcome, checksum, used = compute_intermediate(snapshot, keypair, params, suite, initiator)

    if isinstance(behavior, WrongIntermediate):
        offset = FieldElement.of(behavior.offset, params.modulus)
        if behavior.apply_to in ("r", "both"):
            outcome = Share(outcome.eval_point, outcome.value + offset, outcome.degree_hint, outcome.power)
        if behavior.apply_to in ("c", "both"):
            checksum = Share(checksum.eval_point, checksum.value + offset, checksum.degree_hint, checksum.power)

    get_logger().debug(f"Worker {keypair.id.short()} summed {len(used)} voters")
    return [
        ledger.append(make_signed(ResultShare(sender=keypair.id, share=outcome), keypair, suite), tick),
        ledger.append(make_signed(ChecksumShare(sender=keypair.id, share=checksum), keypair, suite), tick),
    ]


def published_params(snapshot: Sequence[Record], initiator: ParticipantId, suite: CryptoSuite) -> Optional[ReferendumParams]:
    """Parameters from the initiator's signed broadcast, if it is visible."""
    for record in snapshot:
        envelope = record.envelope()
        if envelope is None or envelope.kind is not MessageKind.INIT or envelope.sender != initiator.public_key_bytes:
            continue
        try:
            message = decode_envelope(envelope, suite)
        except MessageSyntaxError:
            continue
        if verify_signature(message, suite):
            return message.params
    return None


# State machines

class Role:
    """One role of one participant, driven by the scheduler."""

    name = "role"

    def __init__(self, label: str, keypair: KeyPair, behavior: Behavior, suite: CryptoSuite):
        self.label = label
        self.keypair = keypair
        self.behavior = behavior
        self.suite = suite
        self.logger = get_logger()

    def pending(self, tick: int, snapshot: Sequence[Record]) -> bool:
        raise NotImplementedError

    def act(self, tick: int, snapshot: Sequence[Record], ledger: Ledger) -> List[int]:
        raise NotImplementedError

    def last_tick(self) -> int:
        """Latest tick at which this role may still want to act."""
        return 0


class Initiator(Role):
    name = "initiator"

    def __init__(self, label: str, keypair: KeyPair, params: ReferendumParams, suite: CryptoSuite):
        super().__init__(label, keypair, Honest(), suite)
        self.params = params
        self.done = False

    def pending(self, tick, snapshot):
        return not self.done and tick == self.params.q12

    def act(self, tick, snapshot, ledger):
        self.done = True
        return [initiator_publish(self.params, self.keypair, ledger, self.suite, tick)]

    def last_tick(self):
        return self.params.q12


class Voter(Role):
    """
    Votes once the init broadcast is visible, unless the behaviour says otherwise.

    Honest voting happens at the first tick whose snapshot shows the
    broadcast and that still lies before q23.
    """

    name = "voter"

    def __init__(self, label: str, keypair: KeyPair, behavior: Behavior, suite: CryptoSuite,
                 vote_choice: int, initiator: ParticipantId, randomness):
        super().__init__(label, keypair, behavior, suite)
        self.vote_choice = vote_choice
        self.initiator = initiator
        self.randomness = randomness
        self.done_ticks: set = set()
        self.params: Optional[ReferendumParams] = None

    def _planned_ticks(self) -> Optional[set]:
        if isinstance(self.behavior, DoubleVote):
            return {at for _, at in self.behavior.sequence}
        if isinstance(self.behavior, OffSchedule):
            return {self.behavior.tick}
        return None

    def pending(self, tick, snapshot):
        if isinstance(self.behavior, Inactive) or tick in self.done_ticks:
            return False
        if self.params is None:
            self.params = published_params(snapshot, self.initiator, self.suite)
        if self.params is None:
            return False
        planned = self._planned_ticks()
        if planned is not None:
            return tick in planned
        return not self.done_ticks and tick < self.params.q23

    def act(self, tick, snapshot, ledger):
        self.done_ticks.add(tick)
        self.logger.debug(f"{self.label} acting as {self.behavior.describe()}")
        return voter_act(self.vote_choice, self.behavior, self.keypair, self.params, ledger, tick,
                         self.suite, self.randomness)

    def last_tick(self):
        planned = self._planned_ticks()
        return max(planned) if planned else 0


class Worker(Role):
    """Publishes r and c at q23, computing on the ledger as it stood at tick start."""

    name = "worker"

    def __init__(self, label: str, keypair: KeyPair, behavior: Behavior, suite: CryptoSuite,
                 initiator: ParticipantId):
        super().__init__(label, keypair, behavior, suite)
        self.initiator = initiator
        self.done = False
        self.params: Optional[ReferendumParams] = None

    def pending(self, tick, snapshot):
        if self.done or isinstance(self.behavior, Inactive):
            return False
        if self.params is None:
            self.params = published_params(snapshot, self.initiator, self.suite)
        if self.params is None:
            return False
        if isinstance(self.behavior, OffSchedule):
            return tick == self.behavior.tick
        return tick == self.params.q23

    def act(self, tick, snapshot, ledger):
        self.done = True
        return worker_act(self.behavior, self.keypair, self.params, ledger, tick, self.suite,
                          snapshot=snapshot, initiator=self.initiator)

    def last_tick(self):
        return self.behavior.tick if isinstance(self.behavior, OffSchedule) else 0


class Scheduler:
    """
    Round-based driver over a global logical clock.

    At each tick the roles with a pending action run in an order drawn from
    the seeded generator; all of them see the ledger as of the tick start.
    """

    def __init__(self, ledger: Ledger, roles: Sequence[Role], clock: PhaseClock, randomness):
        self.ledger = ledger
        self.roles = list(roles)
        self.clock = clock
        self.randomness = randomness
        self.logger = get_logger()
        self.trace = get_trace_logger()
        self.tick_hooks: List[Callable[[int], None]] = []

    def final_tick(self) -> int:
        return max([self.clock.q34] + [role.last_tick() for role in self.roles])

    def step(self, tick: int):
        # Every role sees the ledger as it stood at the start of the tick
        snapshot = self.ledger.records()
        ready = [role for role in self.roles if role.pending(tick, snapshot)]
        # Seeded interleaving
        order = self.randomness.permutation(len(ready)) if ready else []
        phase = self.clock.phase(tick)
        for index in order:
            role = ready[int(index)]
            seqs = role.act(tick, snapshot, self.ledger)
            if seqs:
                span = f"#{seqs[0]}" if len(seqs) == 1 else f"#{seqs[0]}..#{seqs[-1]}"
                self.trace.info(f"tick {tick:>3} [{phase.value}] {role.label} ({role.behavior.describe()}) "
                                f"appended {len(seqs)} record(s) {span}")
            else:
                self.trace.info(f"tick {tick:>3} [{phase.value}] {role.label} ({role.behavior.describe()}) "
                                f"appended nothing")
        for hook in self.tick_hooks:
            hook(tick)

    def run(self) -> int:
        """Run every tick up to and including the determination deadline."""
        final = self.final_tick()
        self.logger.info(f"Scheduler running ticks 0..{final} with {len(self.roles)} roles")
        while self.clock.current_tick <= final:
            self.step(self.clock.current_tick)
            self.clock.advance()
        return final
