from __future__ import annotations

from collections import OrderedDict

import numpy as np
import pytest

from asrswitch.audio import AudioBuffer
from asrswitch.evaluation.grid import Utterance
from asrswitch.synth import speech_like, white_noise

_ACCEPTANCE: "OrderedDict[int, dict]" = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "ok": True, "tests": 0, "seconds": 0.0})
    # fixture setup counts toward the criterion's runtime
    entry["seconds"] += rep.duration
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["tests"] += 1
        entry["ok"] = entry["ok"] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(
            f"criterion {number}: {status}  {e['title']}  ({e['tests']} {'check' if e['tests'] == 1 else 'checks'}, {e['seconds']:.2f} s)"
        )


def make_corpus(n: int = 20, *, speech_s: float = 4.0, tail_s: float = 0.6, interferer_s: float = 3.8) -> list[Utterance]:
    """Speech-like target/interferer pairs; every target ends in a silent tail."""
    utts = []
    for k in range(n):
        utts.append(Utterance(
            utt_id=f"utt{k:03d}",
            target=speech_like(speech_s, 110.0 + 7.0 * k, k, tail_s=tail_s),
            interferer=speech_like(interferer_s, 190.0 + 11.0 * (k % 7), k + 500),
            seed=k,
            target_enrollment=speech_like(2.0, 112.0 + 7.0 * k, k + 700),
            interferer_enrollment=speech_like(2.0, 188.0 + 11.0 * (k % 7), k + 900),
        ))
    return utts


@pytest.fixture(scope="session")
def corpus() -> list[Utterance]:
    return make_corpus()


@pytest.fixture(scope="session")
def stationary_noise() -> AudioBuffer:
    return white_noise(30.0, 12345)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
