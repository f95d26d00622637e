"""
Client-side validation of a referendum ledger.

audit() applies the compliance rules every honest worker and every
verifying voter share; tally() reconstructs outcome and checksum from the
surviving worker contributions and assembles the verdict.
"""

import copy
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from modules.crypto_suite import CryptoSuite, ParticipantId
from modules.field_sss import (
    AmbiguityError,
    FieldElement,
    Share,
    detect_outliers,
    reconstruct,
)
from modules.ledger import IntegrityResult, Ledger, Record
from modules.messages import (
    ChecksumShare,
    InitBroadcast,
    MessageKind,
    MessageSyntaxError,
    ReferendumParams,
    VoteShare,
    decode_envelope,
    verify_signature,
)
from utils.logger import get_logger


class Role(Enum):
    VOTER = "voter"
    WORKER = "worker"
    UNKNOWN = "unknown"


class ViolationKind(Enum):
    INACTIVITY = "inactivity"
    PARTIAL_DISTRIBUTION = "partial-distribution"
    SYNTAX = "syntax"
    SIGNATURE_MISMATCH = "signature-mismatch"
    LATE = "late"
    DUPLICATE_RESOLVED = "duplicate-resolved"
    ILLEGAL_PHASE = "illegal-phase"
    UNEXPECTED_RECIPIENT = "unexpected-recipient"
    UNAUTHORIZED_ROLE = "unauthorized-role"
    OUTLIER_RESULT = "outlier-result"


class Verdict(Enum):
    VALID = "VALID"
    INVALID = "INVALID"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class ComplianceRecord:
    """What one participant did in one role, and which of it was rejected."""

    participant: ParticipantId
    role: Role
    violations: Dict[ViolationKind, List[int]] = field(default_factory=dict)
    seqs: List[int] = field(default_factory=list)
    accepted: bool = True

    def add(self, kind: ViolationKind, seqs: Sequence[int] = ()):
        self.violations.setdefault(kind, []).extend(seqs)

    @property
    def compliant(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "participant": self.participant.hex(),
            "role": self.role.value,
            "accepted": self.accepted,
            "records": sorted(self.seqs),
            "status": "compliant" if self.compliant else "violations",
            "violations": {kind.value: sorted(seqs) for kind, seqs in sorted(
                self.violations.items(), key=lambda item: item[0].value)},
        }


@dataclass
class AuditResult:
    """
    Classification of every record plus the surviving contributions.

    accepted_shares maps voter -> worker -> seq of the accepted s record.
    result_seqs / checksum_seqs map worker -> seq of the accepted r / c record.
    """

    compliance: List[ComplianceRecord]
    accepted_shares: Dict[ParticipantId, Dict[ParticipantId, int]]
    result_seqs: Dict[ParticipantId, int]
    checksum_seqs: Dict[ParticipantId, int]
    init_seqs: List[int]
    params_match: bool
    unattributed: List[int]

    @property
    def accepted_voters(self) -> List[ParticipantId]:
        return list(self.accepted_shares)

    def record_for(self, participant: ParticipantId, role: Role) -> Optional[ComplianceRecord]:
        for entry in self.compliance:
            if entry.participant == participant and entry.role is role:
                return entry
        return None


@dataclass
class VerdictReport:
    ledger_integrity: str
    accepted_voters: int
    outcome: Optional[int]
    outcome_status: str
    checksum: Optional[int]
    checksum_status: str
    checksum_valid: bool
    outlier_workers: List[str]
    overall: Verdict
    reasons: List[str]
    notes: List[str]
    census_expected: Dict[str, int]
    census_actual: Dict[str, int]
    robustness: Dict[str, int]
    compliance: List[dict]
    unattributed: List[int]

    @property
    def violation_kinds(self) -> Set[str]:
        kinds = set()
        for entry in self.compliance:
            kinds.update(entry["violations"])
        return kinds

    def to_dict(self) -> dict:
        return {
            "ledger_integrity": self.ledger_integrity,
            "accepted_voters": self.accepted_voters,
            "outcome": self.outcome,
            "outcome_status": self.outcome_status,
            "checksum": self.checksum,
            "checksum_status": self.checksum_status,
            "checksum_valid": self.checksum_valid,
            "outlier_workers": sorted(self.outlier_workers),
            "overall": self.overall.value,
            "reasons": sorted(self.reasons),
            "notes": sorted(self.notes),
            "census": {"expected": self.census_expected, "actual": self.census_actual},
            "robustness": self.robustness,
            "compliance": self.compliance,
            "unattributed": sorted(self.unattributed),
        }

    def serialize(self) -> str:
        """Canonical text form: key-ordered JSON, ASCII only."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def census_for(k: int, n: int) -> Dict[str, int]:
    return {"b": 1, "s": k * n, "r": n, "c": n}


def expected_census(params: ReferendumParams) -> Dict[str, int]:
    """Record counts of an honest run."""
    return census_for(params.k, params.n)


def actual_census(records: Sequence[Record]) -> Dict[str, int]:
    counts = Counter()
    for record in records:
        envelope = record.envelope()
        if envelope is not None:
            counts[envelope.kind.label] += 1
    return {kind.label: counts.get(kind.label, 0) for kind in MessageKind}


def robustness_bounds(params: ReferendumParams) -> Dict[str, int]:
    """
    Tolerated inactive workers.

    checksum_inactive_quoted keeps the n - t^2 figure found in the protocol
    literature next to the n - (2t-1) that share degree arithmetic implies.
    """
    n, t = params.n, params.threshold
    return {
        "outcome_inactive": n - t,
        "checksum_inactive": n - (2 * t - 1),
        "checksum_inactive_quoted": n - t * t,
    }


def _records_of(source: Union[Ledger, Sequence[Record]]) -> List[Record]:
    return source.records() if isinstance(source, Ledger) else list(source)


class _ComplianceBook:
    """Compliance entries keyed by (participant, role), created on first use."""

    def __init__(self, params: ReferendumParams):
        self.params = params
        self.voters = set(params.voters)
        self.workers = set(params.workers)
        self.entries: Dict[Tuple[ParticipantId, Role], ComplianceRecord] = {}
        for voter in params.voters:
            self.get(voter, Role.VOTER)
        for worker in params.workers:
            self.get(worker, Role.WORKER)

    def get(self, participant: ParticipantId, role: Role) -> ComplianceRecord:
        key = (participant, role)
        if key not in self.entries:
            self.entries[key] = ComplianceRecord(participant, role)
        return self.entries[key]

    def for_kind(self, participant: ParticipantId, kind: MessageKind) -> ComplianceRecord:
        if kind is MessageKind.VOTE_SHARE and participant in self.voters:
            return self.get(participant, Role.VOTER)
        if kind in (MessageKind.RESULT_SHARE, MessageKind.CHECKSUM_SHARE) and participant in self.workers:
            return self.get(participant, Role.WORKER)
        return self.get(participant, Role.UNKNOWN)

    def ordered(self) -> List[ComplianceRecord]:
        role_order = {Role.VOTER: 0, Role.WORKER: 1, Role.UNKNOWN: 2}
        voter_pos = {v: i for i, v in enumerate(self.params.voters)}
        return sorted(
            self.entries.values(),
            key=lambda e: (role_order[e.role], voter_pos.get(e.participant, len(voter_pos)),
                           e.participant.public_key_bytes),
        )


def _check_result_share(share: Share, worker: ParticipantId, params: ReferendumParams, squared: bool) -> bool:
    expected_point = params.eval_point_of(worker)
    degree = 2 * (params.threshold - 1) if squared else params.threshold - 1
    return share.eval_point == expected_point and share.degree_hint == degree and share.modulus == params.modulus


def audit(source: Union[Ledger, Sequence[Record]], params: ReferendumParams, suite: CryptoSuite,
          initiator: Optional[ParticipantId] = None) -> AuditResult:
    """
    Classify every record and keep the contributions that follow the protocol.

    Rules, in order: unparseable records are dropped (syntax); records whose
    signature does not verify against the claimed sender are dropped;
    records outside their phase are dropped (s before q12 or from q23 on;
    r/c outside [q23, q34)); per (voter, worker) only the latest s survives,
    per worker only the latest r and c; finally every voter whose surviving
    shares do not reach every worker loses all of them.

    Args:
        source: Ledger or record snapshot (integrity already verified)
        params: Referendum parameters the records are checked against
        suite: Crypto suite used for signature checks
        initiator: Expected sender of the init broadcast (None accepts any)
    """
    logger = get_logger()
    records = _records_of(source)
    book = _ComplianceBook(params)
    unattributed: List[int] = []
    init_seqs: List[int] = []
    published: Optional[ReferendumParams] = None

    # (voter, worker) -> seqs, worker -> seqs
    vote_candidates: Dict[Tuple[ParticipantId, ParticipantId], List[int]] = defaultdict(list)
    result_candidates: Dict[ParticipantId, List[int]] = defaultdict(list)
    checksum_candidates: Dict[ParticipantId, List[int]] = defaultdict(list)

    for record in records:
        envelope = record.envelope()
        if envelope is None:
            unattributed.append(record.seq)
            continue

        if envelope.kind is MessageKind.INIT:
            # Only signed broadcasts of the expected initiator count
            try:
                message = decode_envelope(envelope, suite)
            except MessageSyntaxError:
                continue
            if initiator is not None and message.sender != initiator:
                continue
            if verify_signature(message, suite) and isinstance(message, InitBroadcast):
                init_seqs.append(record.seq)
                published = message.params
            continue

        claimed = ParticipantId(envelope.sender)
        entry = book.for_kind(claimed, envelope.kind)
        entry.seqs.append(record.seq)

        try:
            message = decode_envelope(envelope, suite)
        except MessageSyntaxError as e:
            logger.debug(f"Record {record.seq}: syntax error ({e.reason.value})")
            entry.add(ViolationKind.SYNTAX, [record.seq])
            continue

        if not verify_signature(message, suite):
            entry.add(ViolationKind.SIGNATURE_MISMATCH, [record.seq])
            continue

        if entry.role is Role.UNKNOWN:
            entry.add(ViolationKind.UNAUTHORIZED_ROLE, [record.seq])
            continue

        tick = record.timestamp
        if isinstance(message, VoteShare):
            if message.to not in book.workers:
                entry.add(ViolationKind.UNEXPECTED_RECIPIENT, [record.seq])
                continue
            if tick < params.q12:
                entry.add(ViolationKind.ILLEGAL_PHASE, [record.seq])
                continue
            if tick >= params.q23:
                entry.add(ViolationKind.LATE, [record.seq])
                continue
            vote_candidates[(message.sender, message.to)].append(record.seq)
            continue

        if tick < params.q23:
            entry.add(ViolationKind.ILLEGAL_PHASE, [record.seq])
            continue
        if tick >= params.q34:
            entry.add(ViolationKind.LATE, [record.seq])
            continue
        squared = isinstance(message, ChecksumShare)
        if not _check_result_share(message.share, message.sender, params, squared):
            entry.add(ViolationKind.SYNTAX, [record.seq])
            continue
        target = checksum_candidates if squared else result_candidates
        target[message.sender].append(record.seq)

    # Latest share per (voter, worker)
    surviving: Dict[ParticipantId, Dict[ParticipantId, int]] = defaultdict(dict)
    for (voter, worker), seqs in vote_candidates.items():
        surviving[voter][worker] = max(seqs)
        if len(seqs) > 1:
            book.get(voter, Role.VOTER).add(ViolationKind.DUPLICATE_RESOLVED, sorted(seqs)[:-1])

    accepted: Dict[ParticipantId, Dict[ParticipantId, int]] = {}
    for voter in params.voters:
        entry = book.get(voter, Role.VOTER)
        shares = surviving.get(voter, {})
        if len(shares) == params.n:
            accepted[voter] = {worker: shares[worker] for worker in params.workers}
            continue
        entry.accepted = False
        if shares:
            entry.add(ViolationKind.PARTIAL_DISTRIBUTION, sorted(shares.values()))
        else:
            entry.add(ViolationKind.INACTIVITY)

    def latest(candidates: Dict[ParticipantId, List[int]]) -> Dict[ParticipantId, int]:
        chosen = {}
        for worker in params.workers:
            seqs = candidates.get(worker)
            if not seqs:
                continue
            chosen[worker] = max(seqs)
            if len(seqs) > 1:
                book.get(worker, Role.WORKER).add(ViolationKind.DUPLICATE_RESOLVED, sorted(seqs)[:-1])
        return chosen

    result_seqs = latest(result_candidates)
    checksum_seqs = latest(checksum_candidates)
    for worker in params.workers:
        if worker not in result_seqs or worker not in checksum_seqs:
            entry = book.get(worker, Role.WORKER)
            entry.accepted = False
            entry.add(ViolationKind.INACTIVITY)

    for entry in book.entries.values():
        if entry.role is Role.UNKNOWN:
            entry.accepted = False

    logger.debug(f"Audit: {len(accepted)} of {params.k} voters accepted, "
                 f"{len(result_seqs)} result and {len(checksum_seqs)} checksum shares")
    return AuditResult(
        compliance=book.ordered(),
        accepted_shares=accepted,
        result_seqs=result_seqs,
        checksum_seqs=checksum_seqs,
        init_seqs=init_seqs,
        params_match=len(init_seqs) == 1 and published == params,
        unattributed=unattributed,
    )


def _combine(shares: List[Share], degree: int) -> Tuple[Optional[FieldElement], str, Set[int]]:
    """
    Reconstruct with outlier search when redundancy allows.

    Returns (value, status, outlier eval points); status is one of
    ok | no-redundancy | unavailable | ambiguous.
    """
    if len(shares) < degree + 1:
        return None, "unavailable", set()
    if len(shares) == degree + 1:
        return reconstruct(shares, degree), "no-redundancy", set()
    try:
        value, outliers = detect_outliers(shares, degree)
    except AmbiguityError:
        return None, "ambiguous", set()
    return value, "ok", outliers


def tally(source: Union[Ledger, Sequence[Record]], params: ReferendumParams, audit_result: AuditResult,
          suite: CryptoSuite, integrity: IntegrityResult = None) -> VerdictReport:
    """
    Determine outcome and checksum and assemble the verdict.

    Args:
        source: Ledger or the record snapshot the audit ran on
        params: Referendum parameters
        audit_result: Output of audit() over the same records
        suite: Crypto suite (payloads are re-decoded with it)
        integrity: Result of the integrity check, None when the chain is intact
    """
    logger = get_logger()
    records = _records_of(source)
    by_seq = {record.seq: record for record in records}
    t = params.threshold
    reasons: List[str] = []
    notes: List[str] = []
    invalid = []
    inconclusive = []

    def shares_of(seqs: Dict[ParticipantId, int]) -> Dict[int, Tuple[ParticipantId, Share]]:
        collected = {}
        for worker in params.workers:
            if worker in seqs:
                message = decode_envelope(by_seq[seqs[worker]].envelope(), suite)
                collected[message.share.eval_point.value] = (worker, message.share)
        return collected

    results = shares_of(audit_result.result_seqs)
    checksums = shares_of(audit_result.checksum_seqs)

    outcome, outcome_status, r_outliers = _combine([s for _, s in results.values()], t - 1)
    checksum, checksum_status, c_outliers = _combine([s for _, s in checksums.values()], 2 * (t - 1))

    k_accepted = len(audit_result.accepted_shares)
    checksum_valid = checksum is not None and checksum == FieldElement.of(k_accepted, params.modulus)

    if not audit_result.params_match:
        invalid.append("census-mismatch")
    if outcome_status in ("unavailable", "ambiguous"):
        inconclusive.append(f"outcome-{outcome_status}")
    if checksum_status in ("unavailable", "ambiguous"):
        inconclusive.append(f"checksum-{checksum_status}")
    elif not checksum_valid:
        invalid.append("checksum-mismatch")
    if outcome_status == "no-redundancy":
        notes.append("outcome-no-redundancy")
    if checksum_status == "no-redundancy":
        notes.append("checksum-no-redundancy")

    compliance = copy.deepcopy(audit_result.compliance)
    # Blame the workers behind outlier shares
    outlier_ids = set()
    for points, pool in ((r_outliers, results), (c_outliers, checksums)):
        for point in points:
            worker = pool[point][0]
            outlier_ids.add(worker)
            entry = next(e for e in compliance if e.participant == worker and e.role is Role.WORKER)
            seq = (audit_result.result_seqs if pool is results else audit_result.checksum_seqs)[worker]
            entry.add(ViolationKind.OUTLIER_RESULT, [seq])
    for points, pool in ((r_outliers, results), (c_outliers, checksums)):
        if points and 2 * len(points) >= len(pool):
            notes.append("outlier-majority-risk")
            break
    if outlier_ids:
        notes.append("outliers-excluded")

    signed_outcome = outcome.to_signed() if outcome is not None else None
    if checksum_valid and signed_outcome is not None and abs(signed_outcome) > k_accepted:
        # Only reachable through field wraparound
        invalid.append("checksum-mismatch")

    if integrity is not None:
        invalid.insert(0, "ledger-integrity")

    # INVALID outranks INCONCLUSIVE
    if invalid:
        overall = Verdict.INVALID
        reasons = invalid + inconclusive
    elif inconclusive:
        overall = Verdict.INCONCLUSIVE
        reasons = inconclusive
    else:
        overall = Verdict.VALID

    report = VerdictReport(
        ledger_integrity="ok" if integrity is None else integrity.describe(),
        accepted_voters=k_accepted,
        outcome=signed_outcome,
        outcome_status=outcome_status,
        checksum=checksum.to_signed() if checksum is not None else None,
        checksum_status=checksum_status,
        checksum_valid=checksum_valid,
        outlier_workers=[w.hex() for w in outlier_ids],
        overall=overall,
        reasons=sorted(set(reasons)),
        notes=sorted(set(notes)),
        census_expected=expected_census(params),
        census_actual=actual_census(records),
        robustness=robustness_bounds(params),
        compliance=[entry.to_dict() for entry in compliance],
        unattributed=audit_result.unattributed,
    )
    logger.info(f"Verdict {overall.value}: r={report.outcome}, c={report.checksum}, k'={k_accepted}")
    return report


def integrity_failure_report(params: ReferendumParams, integrity_description: str) -> VerdictReport:
    """Report for a ledger whose chain does not verify; nothing else is evaluated."""
    return VerdictReport(
        ledger_integrity=integrity_description,
        accepted_voters=0,
        outcome=None,
        outcome_status="unavailable",
        checksum=None,
        checksum_status="unavailable",
        checksum_valid=False,
        outlier_workers=[],
        overall=Verdict.INVALID,
        reasons=["ledger-integrity"],
        notes=[],
        census_expected=expected_census(params),
        census_actual={},
        robustness=robustness_bounds(params),
        compliance=[],
        unattributed=[],
    )


def verify_ledger(ledger: Ledger, params: ReferendumParams, suite: CryptoSuite,
                  initiator: Optional[ParticipantId] = None,
                  expected_length: Optional[int] = None) -> VerdictReport:
    """Everything a voter runs locally in the determination phase."""
    integrity = ledger.verify_integrity(expected_length)
    if integrity is not None:
        get_logger().warning(f"Ledger integrity violation: {integrity.describe()}")
        return integrity_failure_report(params, integrity.describe())
    records = ledger.records()
    audit_result = audit(records, params, suite, initiator)
    return tally(records, params, audit_result, suite)
