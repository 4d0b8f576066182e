import sys

import numpy as np
import pytest

from textshape.corpus import EmbeddingTable
from textshape.synthetic import random_table


@pytest.fixture
def tiny_table():
    return EmbeddingTable.from_dict({
        "a": [1.0, 0.0],
        "b": [0.0, 1.0],
        "c": [1.0, 1.0],
        "d": [2.0, 0.0],
        "e": [0.0, 2.0],
        "f": [3.0, 3.0],
    })


@pytest.fixture(scope="session")
def synth_table():
    return random_table(vocab_size=3000, dim=16, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = sorted(getattr(module, "REPORTED", []), key=lambda l: int(l.split("AC")[1].split()[0]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
        passed = sum(line.startswith("[PASS]") for line in lines)
        terminalreporter.write_line(f"{passed}/{len(lines)} criteria passed")
