import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.controller import ReferendumController  # noqa: E402
from modules.crypto_suite import CryptoSuite, KeyPair, get_suite  # noqa: E402
from modules.messages import ReferendumParams  # noqa: E402
from modules.scenario import BehaviorSpec, ParticipantSpec, ScenarioConfig  # noqa: E402
from utils.config import DEFAULT_MODULUS, get_bundled_scenarios_dir  # noqa: E402

SCENARIOS_DIR = Path(get_bundled_scenarios_dir())


@dataclass
class Referendum:
    suite: CryptoSuite
    initiator: KeyPair
    voters: List[KeyPair]
    params: ReferendumParams

    @property
    def workers(self) -> List[KeyPair]:
        by_id = {v.id: v for v in self.voters}
        return [by_id[w] for w in self.params.workers]


@pytest.fixture
def keyed_suite():
    return get_suite("keyed-hash")


@pytest.fixture
def ed_suite():
    return get_suite("ed25519")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def build_referendum(k: int = 3, n: int = 3, t: int = 2, modulus: int = DEFAULT_MODULUS,
                     suite_name: str = "keyed-hash", seed: int = 99,
                     deadlines=(1, 5, 9)) -> Referendum:
    suite = get_suite(suite_name)
    randomness = np.random.default_rng(seed)
    initiator = suite.gen_keypair(randomness)
    voters = [suite.gen_keypair(randomness) for _ in range(k)]
    q12, q23, q34 = deadlines
    params = ReferendumParams(
        voters=tuple(v.id for v in voters),
        workers=tuple(v.id for v in voters[:n]),
        share_affiliation=tuple(range(1, n + 1)),
        context_text="Are cats cooler than dogs?",
        option_map={1: "Yes", -1: "No"},
        q12=q12,
        q23=q23,
        q34=q34,
        threshold=t,
        modulus=modulus,
    )
    return Referendum(suite, initiator, voters, params)


@pytest.fixture
def make_referendum():
    return build_referendum


def make_config(votes: Sequence[int], n: int, t: int, *, voter_behaviors: Optional[Dict[int, BehaviorSpec]] = None,
                worker_behaviors: Optional[Dict[int, BehaviorSpec]] = None, crypto: str = "keyed-hash",
                seed: int = 7, name: str = "adhoc", modulus: int = DEFAULT_MODULUS) -> ScenarioConfig:
    """Scenario with explicit votes; behaviours keyed by voter index."""
    voter_behaviors = voter_behaviors or {}
    worker_behaviors = worker_behaviors or {}
    participants = tuple(
        ParticipantSpec(i, vote, voter_behaviors.get(i, BehaviorSpec()), worker_behaviors.get(i, BehaviorSpec()))
        for i, vote in enumerate(votes)
    )
    return ScenarioConfig(name=name, k=len(votes), n=n, t=t, seed=seed, modulus=modulus, crypto=crypto,
                          participants=participants)


@pytest.fixture
def controller():
    return ReferendumController()


@pytest.fixture
def run_config(controller, tmp_path):
    counter = {"runs": 0}

    def _run(config: ScenarioConfig):
        counter["runs"] += 1
        return controller.run(config, tmp_path / f"run{counter['runs']}")

    return _run
