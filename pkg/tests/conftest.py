import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crowdcount.frames import FrameKind, InformationElement, MacAddress, ParsedFrame

settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def mac(text):
    return MacAddress.parse(text)


def beacon(src, ts=0, seq=0):
    return ParsedFrame(FrameKind.BEACON, mac("ff:ff:ff:ff:ff:ff"), mac(src), seq,
                       (InformationElement(0, b"ap"),), ts)


def data(dst, src, ts=0, seq=0):
    return ParsedFrame(FrameKind.DATA, mac(dst), mac(src), seq, (), ts)


def probe(src, ies, ts=0, seq=0):
    return ParsedFrame(FrameKind.PROBE_REQUEST, mac("ff:ff:ff:ff:ff:ff"), mac(src), seq,
                       tuple(InformationElement(t, v) for t, v in ies), ts)


RATES = (1, bytes.fromhex("02040b16"))
EXT_RATES = (50, bytes.fromhex("0c1218243048606c"))
VENDOR = (221, bytes.fromhex("0050f208002000"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
