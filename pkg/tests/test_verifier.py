from dataclasses import replace

import numpy as np
import pytest

from modules.field_sss import Share
from modules.ledger import Ledger
from modules.messages import Envelope, MessageKind, ResultShare, VoteShare, encode_share, make_signed
from modules.participants import GARBAGE_PAYLOAD, Honest, compute_intermediate, worker_act
from modules.scenario import BehaviorSpec
from modules.verifier import (
    Role,
    Verdict,
    ViolationKind,
    audit,
    census_for,
    expected_census,
    robustness_bounds,
    tally,
    verify_ledger,
)

from conftest import make_config


def run_with_setup(controller, run_config, config):
    result = run_config(config)
    return result, controller.prepare(config)


def reverify(ledger, setup):
    return verify_ledger(ledger, setup.params, setup.suite, setup.initiator.id)


def kinds_of(report, role, index_id):
    for entry in report.compliance:
        if entry["participant"] == index_id.hex() and entry["role"] == role:
            return set(entry["violations"])
    return None


def test_honest_run(controller, run_config):
    result, setup = run_with_setup(controller, run_config, make_config((1, 1, -1), n=3, t=2))
    report = result.report
    assert (report.outcome, report.checksum, report.accepted_voters) == (1, 3, 3)
    assert report.checksum_valid and report.overall is Verdict.VALID
    assert report.reasons == []
    assert report.census_actual == report.census_expected == {"b": 1, "s": 9, "r": 3, "c": 3}

    audited = audit(result.ledger, setup.params, setup.suite, setup.initiator.id)
    assert sum(len(per_worker) for per_worker in audited.accepted_shares.values()) == 9
    voters = [e for e in audited.compliance if e.role is Role.VOTER]
    assert len(voters) == 3 and all(e.compliant and e.accepted for e in voters)
    assert audited.params_match


def test_symmetric_votes_cancel(controller, run_config):
    config = make_config((1, -1, 1), n=3, t=2, voter_behaviors={2: BehaviorSpec("inactive")})
    report = run_config(config).report
    assert report.accepted_voters == 2
    assert report.outcome == 0 and report.checksum == 2
    assert report.overall is Verdict.VALID


def test_partial_distribution_drops_voter(controller, run_config):
    config = make_config((1, 1, -1), n=3, t=2,
                         voter_behaviors={2: BehaviorSpec("partial-distribution", {"workers": [0]})})
    result, setup = run_with_setup(controller, run_config, config)
    assert result.report.accepted_voters == 2
    assert result.report.outcome == 2
    assert kinds_of(result.report, "voter", setup.voters[2].id) == {"partial-distribution"}


def test_double_vote_keeps_latest_set(controller, run_config):
    config = make_config((1, 1, 1), n=3, t=2,
                         voter_behaviors={1: BehaviorSpec("double-vote", {"sequence": [[1, 2], [-1, 3]]})})
    result, setup = run_with_setup(controller, run_config, config)
    voter = setup.voters[1].id
    audited = audit(result.ledger, setup.params, setup.suite, setup.initiator.id)
    latest = result.ledger.query(kind=MessageKind.VOTE_SHARE, sender=voter, tick_from=3)
    assert sorted(audited.accepted_shares[voter].values()) == [r.seq for r in latest]
    assert audited.record_for(voter, Role.VOTER).violations.keys() == {ViolationKind.DUPLICATE_RESOLVED}
    assert result.report.outcome == 1
    assert result.report.overall is Verdict.VALID


def test_wrong_intermediate_is_outlier(controller, run_config):
    config = make_config((1, 1, -1, 1, -1), n=5, t=2,
                         worker_behaviors={3: BehaviorSpec("wrong-intermediate", {"offset": 1})})
    result, setup = run_with_setup(controller, run_config, config)
    report = result.report
    assert report.outcome == 1 and report.checksum == 5
    assert report.outlier_workers == [setup.voters[3].id.hex()]
    assert report.overall is Verdict.VALID
    assert kinds_of(report, "worker", setup.voters[3].id) == {"outlier-result"}
    assert "outliers-excluded" in report.notes


def test_colluding_invalid_votes_respect_bound(run_config):
    values = (2, 0, 0, 0, 1)
    config = make_config((1,) * 5, n=3, t=2, voter_behaviors={
        i: BehaviorSpec("invalid-vote", {"value": v}) for i, v in enumerate(values)})
    report = run_config(config).report
    assert report.checksum == 5 and report.checksum_valid
    assert report.outcome == 3
    assert abs(report.outcome) <= report.accepted_voters
    assert report.overall is Verdict.VALID


def test_single_invalid_vote_fails_checksum(run_config):
    config = make_config((1, 1, -1, 1), n=3, t=2, voter_behaviors={0: BehaviorSpec("invalid-vote", {"value": 3})})
    report = run_config(config).report
    assert not report.checksum_valid
    assert report.overall is Verdict.INVALID
    assert report.reasons == ["checksum-mismatch"]


def test_checksum_unavailable_is_inconclusive(run_config):
    config = make_config((1, 1, -1), n=3, t=2, worker_behaviors={2: BehaviorSpec("inactive")})
    report = run_config(config).report
    assert report.outcome == 1
    assert report.outcome_status == "no-redundancy"
    assert report.checksum is None and report.checksum_status == "unavailable"
    assert report.overall is Verdict.INCONCLUSIVE
    assert report.reasons == ["checksum-unavailable"]


def test_outcome_unavailable(run_config):
    config = make_config((1, 1, -1), n=3, t=2, worker_behaviors={
        1: BehaviorSpec("inactive"), 2: BehaviorSpec("inactive")})
    report = run_config(config).report
    assert report.overall is Verdict.INCONCLUSIVE
    assert report.reasons == ["checksum-unavailable", "outcome-unavailable"]


def test_intermediate_results_outside_phase(controller, run_config):
    config = make_config((1, 1, -1, 1, 1), n=5, t=2, worker_behaviors={
        0: BehaviorSpec("off-schedule", {"tick": 3}), 1: BehaviorSpec("off-schedule", {"tick": 9})})
    result, setup = run_with_setup(controller, run_config, config)
    report = result.report
    assert kinds_of(report, "worker", setup.voters[0].id) == {"illegal-phase", "inactivity"}
    assert kinds_of(report, "worker", setup.voters[1].id) == {"late", "inactivity"}
    assert report.outcome == 3 and report.checksum == 5


def test_late_vote_ignored(controller, run_config):
    config = make_config((1, 1, -1), n=3, t=2, voter_behaviors={0: BehaviorSpec("off-schedule", {"tick": 6})})
    result, setup = run_with_setup(controller, run_config, config)
    assert kinds_of(result.report, "voter", setup.voters[0].id) == {"late", "inactivity"}
    assert result.report.outcome == 0


def test_unauthorized_role_and_recipient(controller, run_config):
    result, setup = run_with_setup(controller, run_config, make_config((1, 1, -1, 1), n=3, t=2))
    ledger = result.ledger
    outsider = setup.voters[3]
    share = Share.of(1, 5, setup.params.modulus, 1)
    ledger.append(make_signed(ResultShare(sender=outsider.id, share=share), outsider, setup.suite), tick=6)
    blob = setup.suite.encrypt(encode_share(share), outsider.id, np.random.default_rng(0)).blob
    voter = setup.voters[0]
    ledger.append(make_signed(VoteShare(sender=voter.id, to=outsider.id, ciphertext=blob), voter, setup.suite), tick=3)

    report = reverify(ledger, setup)
    assert kinds_of(report, "unknown", outsider.id) == {"unauthorized-role"}
    assert kinds_of(report, "voter", voter.id) == {"unexpected-recipient"}
    assert report.outcome == result.report.outcome
    assert report.overall is Verdict.VALID


def test_garbage_and_unparseable_records(controller, run_config):
    result, setup = run_with_setup(controller, run_config, make_config((1, 1, -1), n=3, t=2))
    ledger = result.ledger
    voter = setup.voters[1]
    ledger.append(Envelope(MessageKind.VOTE_SHARE, voter.id.public_key_bytes,
                           setup.params.workers[0].public_key_bytes, GARBAGE_PAYLOAD, b"sig"), tick=3)
    unparseable = ledger.append(b"\x00\x01\x02", tick=3)
    report = reverify(ledger, setup)
    assert kinds_of(report, "voter", voter.id) == {"syntax"}
    assert report.unattributed == [unparseable]
    assert report.accepted_voters == 3


def test_census_mismatch_with_other_params(controller, run_config):
    result, setup = run_with_setup(controller, run_config, make_config((1, 1, -1), n=3, t=2))
    other = replace(setup.params, context_text="A different question")
    report = verify_ledger(result.ledger, other, setup.suite, setup.initiator.id)
    assert report.overall is Verdict.INVALID
    assert "census-mismatch" in report.reasons


def test_broadcast_from_other_sender_ignored(controller, run_config):
    result, setup = run_with_setup(controller, run_config, make_config((1, 1, -1), n=3, t=2))
    from modules.messages import InitBroadcast

    intruder = setup.voters[2]
    result.ledger.append(make_signed(InitBroadcast(sender=intruder.id, params=setup.params), intruder,
                                     setup.suite), tick=2)
    report = reverify(result.ledger, setup)
    assert report.overall is Verdict.VALID


def test_integrity_failure_short_circuits(controller, run_config):
    config = make_config((1, 1, -1), n=3, t=2)
    result, setup = run_with_setup(controller, run_config, config)
    tampered = Ledger.loads(result.ledger.dumps(), allow_tamper=True)
    tampered.tamper_for_test(4, lambda stored: stored[:-1] + bytes([stored[-1] ^ 1]))
    report = reverify(tampered, setup)
    assert report.ledger_integrity == "hash-mismatch@4"
    assert report.overall is Verdict.INVALID
    assert report.reasons == ["ledger-integrity"]


def test_verifiers_agree_bitwise(controller, run_config):
    config = make_config((1, -1, 1, 1, -1), n=5, t=2,
                         worker_behaviors={4: BehaviorSpec("wrong-intermediate", {"offset": 3, "apply_to": "c"})})
    result, setup = run_with_setup(controller, run_config, config)
    first = reverify(result.ledger, setup)
    second = reverify(Ledger.loads(result.ledger.dumps()), setup)
    assert first.serialize() == second.serialize() == result.report.serialize()


def test_workers_accept_what_verifier_accepts(controller, run_config):
    config = make_config((1, 1, -1, 1, 1), n=3, t=2, voter_behaviors={
        1: BehaviorSpec("partial-distribution", {"workers": [0, 2]}),
        3: BehaviorSpec("syntactic-garbage"),
        4: BehaviorSpec("off-schedule", {"tick": 7})})
    result, setup = run_with_setup(controller, run_config, config)
    at_q23 = [r for r in result.ledger.records() if r.timestamp < setup.params.q23]
    worker_view = audit(at_q23, setup.params, setup.suite, setup.initiator.id)
    final_view = audit(result.ledger, setup.params, setup.suite, setup.initiator.id)
    assert set(worker_view.accepted_voters) == set(final_view.accepted_voters)
    assert result.report.accepted_voters == 2


def test_undecryptable_share_makes_worker_an_outlier(controller, run_config):
    config = make_config((1, 1, -1, 1, -1), n=5, t=2)
    result, setup = run_with_setup(controller, run_config, config)
    voter, victim, other = setup.voters[2], setup.voters[0], setup.voters[1]
    q23 = setup.params.q23

    # Same ledger, except the share for worker 0 is sealed to worker 1's key
    spliced = Ledger()
    for record in result.ledger.records():
        envelope = record.envelope()
        if envelope.kind in (MessageKind.RESULT_SHARE, MessageKind.CHECKSUM_SHARE):
            continue
        if (envelope.kind is MessageKind.VOTE_SHARE and envelope.sender_id == voter.id
                and envelope.recipient == victim.id.public_key_bytes):
            share = Share.of(1, 1, setup.params.modulus, 1)
            blob = setup.suite.encrypt(encode_share(share), other.id, np.random.default_rng(0)).blob
            spliced.append(make_signed(VoteShare(sender=voter.id, to=victim.id, ciphertext=blob), voter, setup.suite),
                           record.timestamp)
            continue
        spliced.append(record.message, record.timestamp)

    snapshot = spliced.records()
    _, _, used = compute_intermediate(snapshot, victim, setup.params, setup.suite, setup.initiator.id)
    assert voter.id not in used
    for worker in setup.voters:
        worker_act(Honest(), worker, setup.params, spliced, q23, setup.suite, snapshot, setup.initiator.id)

    report = reverify(spliced, setup)
    assert report.accepted_voters == 5
    assert kinds_of(report, "voter", voter.id) == set()
    assert kinds_of(report, "worker", victim.id) == {"outlier-result"}
    assert report.outcome == 1 and report.checksum == 5
    assert report.overall is Verdict.VALID


def test_tally_does_not_mutate_audit(controller, run_config):
    config = make_config((1, 1, -1, 1, -1), n=5, t=2,
                         worker_behaviors={0: BehaviorSpec("wrong-intermediate", {"offset": 2})})
    result, setup = run_with_setup(controller, run_config, config)
    audited = audit(result.ledger, setup.params, setup.suite, setup.initiator.id)
    tally(result.ledger, setup.params, audited, setup.suite)
    assert audited.record_for(setup.voters[0].id, Role.WORKER).compliant


@pytest.mark.parametrize("k, n, expected", [
    (3, 3, {"b": 1, "s": 9, "r": 3, "c": 3}),
    (0, 3, {"b": 1, "s": 0, "r": 3, "c": 3}),
    (5, 3, {"b": 1, "s": 15, "r": 3, "c": 3}),
])
def test_census(k, n, expected):
    assert census_for(k, n) == expected


def test_expected_census_and_bounds(make_referendum):
    params = make_referendum(k=5, n=5, t=2).params
    assert expected_census(params) == {"b": 1, "s": 25, "r": 5, "c": 5}
    assert robustness_bounds(params) == {"outcome_inactive": 3, "checksum_inactive": 2,
                                         "checksum_inactive_quoted": 1}
