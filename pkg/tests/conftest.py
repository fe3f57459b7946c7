import numpy as np
import pytest

from prosemph import corpus
from prosemph.tagset import default_tagset


@pytest.fixture(scope="session")
def tagset():
    return default_tagset()


@pytest.fixture
def tiny_utt():
    return corpus.Utterance(
        id="u1",
        chars=("你", "好", "吗"),
        word_spans=((0, 2), (2, 3)),
        phones_per_char=(2, 2, 1),
        char_times=((0.0, 0.2), (0.2, 0.4), (0.4, 0.6)),
    )


@pytest.fixture
def tiny_ann(tagset, tiny_utt):
    ann = corpus.DepAnnotation(
        utterance_id="u1",
        pos_tags=(tagset.pos["n"], tagset.pos["v"]),
        heads=(1, None),
        relations=(tagset.rel["SBV"], tagset.root_id),
    )
    ann.validate(tiny_utt, tagset)
    return ann


def random_utterance(rng, num_words=None, max_word_len=3, max_phones=3):
    """Random structurally valid utterance for property tests."""
    if num_words is None:
        num_words = int(rng.integers(1, 6))
    lens = [int(rng.integers(1, max_word_len + 1)) for _ in range(num_words)]
    spans, s = [], 0
    for length in lens:
        spans.append((s, s + length))
        s += length
    n = s
    return corpus.Utterance(
        id="rnd",
        chars=tuple(chr(ord("A") + (i % 26)) for i in range(n)),
        word_spans=tuple(spans),
        phones_per_char=tuple(int(x) for x in rng.integers(1, max_phones + 1, n)),
        char_times=tuple((i * 0.1, (i + 1) * 0.1) for i in range(n)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one "[criterion N] PASS/FAIL" line per acceptance criterion, emitted after
# the run so pytest's output capture cannot swallow them
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
