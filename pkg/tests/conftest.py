from __future__ import annotations

from pathlib import Path

import pytest

from apidrift.extraction import scan_corpus

REPO_ROOT = Path(__file__).resolve().parent.parent
MINI_AOSP = REPO_ROOT / "fixtures" / "mini-aosp"
DEMO_APP = REPO_ROOT / "fixtures" / "demo-app"
GOLDENS = Path(__file__).resolve().parent / "goldens"


@pytest.fixture(scope="session")
def mini_index():
    return scan_corpus(MINI_AOSP, 15, 24)


def record_for(index, level: int, class_fqn: str, method: str):
    for rec in index.facts[level]:
        if rec.signature.class_fqn == class_fqn and rec.signature.method_name == method:
            return rec
    raise AssertionError(f"no {class_fqn}.{method} at level {level}")


@pytest.fixture(scope="session")
def getdeviceids_pair(mini_index):
    fqn = "android.view.InputDevice"
    return (record_for(mini_index, 15, fqn, "getDeviceIds"),
            record_for(mini_index, 16, fqn, "getDeviceIds"))


@pytest.fixture(scope="session")
def getnotificationpolicy_pair(mini_index):
    fqn = "android.app.Activity"
    return (record_for(mini_index, 23, fqn, "getNotificationPolicy"),
            record_for(mini_index, 24, fqn, "getNotificationPolicy"))


@pytest.fixture(scope="session")
def getboolean_pair(mini_index):
    fqn = "android.content.res.TypedArray"
    return (record_for(mini_index, 20, fqn, "getBoolean"),
            record_for(mini_index, 21, fqn, "getBoolean"))
