import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from perfrl.policy import ByteTokenizer, PolicyModel, PolicyParams
from perfrl.sandbox import Sandbox


# verdict lines from the acceptance tests, echoed after the test summary
# so they survive output capture
acceptance_verdicts: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_verdicts:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_verdicts:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sandbox():
    return Sandbox()


@pytest.fixture(scope="session")
def tokenizer():
    return ByteTokenizer()


@pytest.fixture
def tiny_model(tokenizer):
    """Small enough for fast finite-difference sweeps."""
    params = PolicyParams.initialize(tokenizer.vocab_size, 4, 8, 16, seed=7)
    return PolicyModel(params, tokenizer)


def make_model(seed=0, context=8, embed_dim=32, hidden_dim=128):
    tok = ByteTokenizer()
    params = PolicyParams.initialize(tok.vocab_size, context, embed_dim, hidden_dim, seed=seed)
    return PolicyModel(params, tok)
