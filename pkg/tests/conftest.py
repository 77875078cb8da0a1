from __future__ import annotations

import pytest

from socialproto import MockActionExecutor, instantiate
from socialproto.fixtures import faq_group, faq_implemented


@pytest.fixture
def faq():
    return faq_implemented()


@pytest.fixture
def group():
    return faq_group()


@pytest.fixture
def process(faq, group):
    return instantiate(faq, group, process_id="proc-1")


@pytest.fixture
def executor():
    return MockActionExecutor()
