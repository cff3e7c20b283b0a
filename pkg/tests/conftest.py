import asyncio

import pytest

from xarascan.ir import parse_listing
from xarascan.rules import builtin_rules

from . import CORPUS, SCENARIOS


@pytest.fixture(params=(asyncio.DefaultEventLoopPolicy(),), ids=("asyncio",))
def event_loop_policy(request):
    return request.param


@pytest.fixture(scope="session")
def rules():
    return builtin_rules()


@pytest.fixture
def corpus():
    return CORPUS


@pytest.fixture
def scenarios():
    return SCENARIOS


@pytest.fixture
def load_listing():
    def load(name: str):
        path = CORPUS / name
        return parse_listing(path.read_text(), source_name=path.name)
    return load


@pytest.fixture
def read_scenario():
    def read(name: str) -> str:
        return (SCENARIOS / name).read_text()
    return read
