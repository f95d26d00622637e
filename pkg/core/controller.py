"""
Main controller for running, replaying and verifying referendum scenarios.
"""

import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from modules.crypto_suite import CryptoSuite, KeyPair, get_suite
from modules.ledger import DumpFormatError, IntegrityKind, IntegrityResult, IntegrityViolation, Ledger
from modules.messages import ReferendumParams
from modules.participants import Initiator, PhaseClock, Role, Scheduler, Voter, Worker
from modules.scenario import ScenarioConfig
from modules.verifier import Verdict, VerdictReport, integrity_failure_report, verify_ledger
from utils.config import (
    EXIT_INCONCLUSIVE,
    EXIT_INVALID,
    EXIT_VALID,
    LEDGER_DUMP_NAME,
    REPORT_NAME,
    TRACE_NAME,
    ensure_directory,
    format_duration,
)
from utils.log_handler import attach_trace_handler
from utils.logger import get_logger, get_trace_logger


EXIT_CODES = {
    Verdict.VALID: EXIT_VALID,
    Verdict.INVALID: EXIT_INVALID,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


@dataclass
class Setup:
    """Everything derived from a scenario before the first tick."""

    suite: CryptoSuite
    initiator: KeyPair
    voters: List[KeyPair]
    params: ReferendumParams
    votes: List[int]
    streams: List[np.random.Generator]
    scheduler_stream: np.random.Generator


@dataclass
class RunResult:
    report: VerdictReport
    exit_code: int
    dump_path: Path
    report_path: Path
    trace_path: Path
    ledger: Ledger


class ReferendumController:
    """Orchestrates one referendum from key generation to the written verdict."""

    def __init__(self):
        self.logger = get_logger()
        self._final_tick = 0
        self._high_water = 0

    def prepare(self, config: ScenarioConfig) -> Setup:
        """
        Derive keys, votes and randomness streams from the scenario seed.

        The same seed always yields the same identities, so replay can rebuild
        the parameters a dump was produced with.
        """
        suite = get_suite(config.crypto)
        # Independent streams: keys, default votes, scheduler, one per voter
        root = np.random.SeedSequence(config.seed)
        key_seq, vote_seq, scheduler_seq, *voter_seqs = root.spawn(3 + config.k)

        # Generate identities
        key_stream = np.random.default_rng(key_seq)
        initiator = suite.gen_keypair(key_stream)
        voters = [suite.gen_keypair(key_stream) for _ in range(config.k)]

        # Scenario votes win over random ones
        default_votes = np.random.default_rng(vote_seq).choice([1, -1], size=config.k)
        votes = []
        for index in range(config.k):
            spec = config.participant(index)
            votes.append(spec.vote if spec.vote is not None else int(default_votes[index]))

        workers = tuple(voters[i].id for i in config.worker_indices)
        params = ReferendumParams(
            voters=tuple(v.id for v in voters),
            workers=workers,
            share_affiliation=tuple(range(1, config.n + 1)),
            context_text=config.question,
            option_map={1: config.options["+1"], -1: config.options["-1"]},
            q12=config.deadlines["q12"],
            q23=config.deadlines["q23"],
            q34=config.deadlines["q34"],
            threshold=config.t,
            modulus=config.modulus,
        )
        return Setup(suite, initiator, voters, params, votes,
                     [np.random.default_rng(s) for s in voter_seqs], np.random.default_rng(scheduler_seq))

    def build_roles(self, config: ScenarioConfig, setup: Setup) -> List[Role]:
        voter_ids = [v.id for v in setup.voters]
        roles: List[Role] = [Initiator("initiator", setup.initiator, setup.params, setup.suite)]
        for index, keypair in enumerate(setup.voters):
            spec = config.participant(index)
            roles.append(Voter(f"voter[{index}]", keypair, spec.behavior.build(voter_ids), setup.suite,
                               setup.votes[index], setup.initiator.id, setup.streams[index]))
        for position, index in enumerate(config.worker_indices):
            spec = config.participant(index)
            roles.append(Worker(f"worker[{position}]", setup.voters[index], spec.worker_behavior.build(voter_ids),
                                setup.suite, setup.initiator.id))
        return roles

    def _apply_tamper(self, config: ScenarioConfig, ledger: Ledger, tick: Optional[int]):
        """Apply injections scheduled after tick (None: every injection not yet due)."""
        for injection in config.tamper:
            due = injection.after_tick == tick if tick is not None else injection.after_tick > self._final_tick
            if not due:
                continue
            if injection.seq >= len(ledger):
                self.logger.warning(f"Tamper target #{injection.seq} does not exist, skipped")
                continue
            try:
                tick_of_target = ledger.get(injection.seq).timestamp
            except ValueError:
                # already mangled by an earlier injection
                tick_of_target = "?"
            self.logger.debug(f"Applying {injection.kind} to record #{injection.seq} (tick {tick_of_target})")
            # Longest chain published so far: the length a watching voter expects
            self._high_water = max(self._high_water, len(ledger))
            if injection.kind == "truncate":
                ledger.truncate_for_test(injection.seq)
            else:
                ledger.tamper_for_test(injection.seq, injection.mutate)

    def run(self, config: ScenarioConfig, out_dir: Union[str, Path]) -> RunResult:
        """
        Execute the full four-phase referendum and write its artifacts.

        Args:
            config: Validated scenario
            out_dir: Directory receiving ledger.dump, report.txt and trace.txt

        Returns:
            RunResult with the verdict report and process exit code
        """
        self.logger.info(f"Running scenario '{config.name}' (k={config.k}, n={config.n}, t={config.t}, "
                         f"seed={config.seed}, crypto={config.crypto})")
        trace = get_trace_logger()
        handler = attach_trace_handler(trace)
        started = time.perf_counter()
        try:
            setup = self.prepare(config)
            ledger = Ledger(allow_tamper=bool(config.tamper))

            # Drive every role through the four phases
            clock = PhaseClock.for_params(setup.params)
            scheduler = Scheduler(ledger, self.build_roles(config, setup), clock, setup.scheduler_stream)
            self._final_tick = scheduler.final_tick()
            self._high_water = 0
            if config.tamper:
                scheduler.tick_hooks.append(lambda tick: self._apply_tamper(config, ledger, tick))
            scheduler.run()
            self._apply_tamper(config, ledger, None)

            # Verify as any voter would after q34
            expected_length = max(self._high_water, len(ledger))
            report = verify_ledger(ledger, setup.params, setup.suite, setup.initiator.id, expected_length)
            trace.info(f"verdict: {report.overall.value}")
            trace.info(f"elapsed: {format_duration(time.perf_counter() - started)}")

            # Write artifacts
            out = Path(ensure_directory(str(out_dir)))
            dump_path, report_path, trace_path = out / LEDGER_DUMP_NAME, out / REPORT_NAME, out / TRACE_NAME
            ledger.dump(dump_path)
            report_path.write_text(report.serialize(), encoding="ascii", newline="\n")
            trace_path.write_text(handler.render(), encoding="utf-8", newline="\n")
            self.logger.info(f"Artifacts written to {out}")
        except Exception as e:
            self.logger.error(f"Scenario '{config.name}' failed: {str(e)}")
            raise
        finally:
            trace.removeHandler(handler)

        return RunResult(report, EXIT_CODES[report.overall], dump_path, report_path, trace_path, ledger)

    def replay(self, dump_path: Union[str, Path], config: ScenarioConfig,
               expected_length: Optional[int] = None) -> Tuple[VerdictReport, int]:
        """
        Verifier-only pass over an existing dump.

        The parameters and initiator are rebuilt from the scenario; a dump
        that cannot be decoded is reported as a malformed ledger.

        Args:
            dump_path: Ledger dump written by run
            config: Scenario the dump was produced from, seed included
            expected_length: Record count the caller saw published; a shorter
                dump is reported as truncated
        """
        self.logger.info(f"Replaying {dump_path} against scenario '{config.name}'")
        try:
            # Rebuild keys and parameters from the seed
            setup = self.prepare(config)
            try:
                ledger = Ledger.load(dump_path)
            except DumpFormatError as e:
                self.logger.warning(f"Dump does not decode: {e}")
                report = integrity_failure_report(setup.params, f"{IntegrityKind.MALFORMED.value}@{e.line_number}")
            else:
                report = verify_ledger(ledger, setup.params, setup.suite, setup.initiator.id, expected_length)
        except Exception as e:
            self.logger.error(f"Replay failed: {str(e)}")
            raise
        return report, EXIT_CODES[report.overall]

    def verify(self, dump_path: Union[str, Path]) -> IntegrityResult:
        """Integrity check of a dump alone."""
        self.logger.info(f"Verifying integrity of {dump_path}")
        try:
            ledger = Ledger.load(dump_path)
        except DumpFormatError as e:
            return IntegrityViolation(e.line_number, IntegrityKind.MALFORMED)
        result = ledger.verify_integrity()
        if result is None:
            self.logger.info(f"Ledger intact: {len(ledger)} records")
        else:
            self.logger.warning(f"Ledger integrity violation: {result.describe()}")
        return result
