import sys

import numpy as np
import pytest

from asrswitch.audio import AudioBuffer
from asrswitch.errors import AsrError, DomainError
from asrswitch.evaluation.asr import AsrHook, Normalizer, run_asr

PY = sys.executable


@pytest.fixture
def audio():
    return AudioBuffer(0.1 * np.random.default_rng(0).standard_normal(1600))


@pytest.fixture
def stub(tmp_path):
    def write(body):
        path = tmp_path / "stub.py"
        path.write_text(body)
        return f"{PY} {path} {{audio}}"
    return write


class TestRunAsr:
    def test_fixed_transcript(self, stub, audio):
        hook = AsrHook(stub("print('こんにちは')"))
        assert run_asr(hook, audio) == "こんにちは"

    def test_receives_readable_wav(self, stub, audio):
        body = "import sys, wave\nw = wave.open(sys.argv[1])\nprint(w.getframerate(), w.getnframes())\n"
        assert run_asr(AsrHook(stub(body)), audio) == "16000 1600"

    def test_normalizer_none_keeps_newline(self, stub, audio):
        hook = AsrHook(stub("print(' ab ')"), transcript_normalizer=Normalizer.NONE)
        assert run_asr(hook, audio) == " ab \n"

    def test_missing_executable(self, audio):
        with pytest.raises(AsrError, match="asr failed"):
            run_asr(AsrHook("/nonexistent/recognizer {audio}"), audio)

    def test_nonzero_exit(self, stub, audio):
        with pytest.raises(AsrError, match="asr failed"):
            run_asr(AsrHook(stub("import sys; sys.exit(3)")), audio)

    def test_timeout(self, stub, audio):
        with pytest.raises(AsrError, match="asr timeout"):
            run_asr(AsrHook(stub("import time; time.sleep(5)"), timeout_s=0.001), audio)

    def test_temp_file_removed(self, stub, audio, tmp_path):
        work = tmp_path / "work"
        work.mkdir()
        run_asr(AsrHook(stub("print('x')")), audio, work)
        assert list(work.iterdir()) == []


class TestAsrHook:
    @pytest.mark.parametrize("template", ["recognize file.wav", "recognize {audio} {audio}"])
    def test_placeholder_exactly_once(self, template):
        with pytest.raises(DomainError, match="invalid asr hook"):
            AsrHook(template)

    def test_timeout_positive(self):
        with pytest.raises(DomainError):
            AsrHook("r {audio}", timeout_s=0)

    def test_argv(self):
        assert AsrHook("rec --in={audio} -q").argv("/tmp/a b.wav") == ["rec", "--in=/tmp/a b.wav", "-q"]
