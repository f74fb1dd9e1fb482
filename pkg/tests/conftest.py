import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import (RUNNING_QUERY, RUNNING_QUERY_DISTINCT, exact_running_index,
                     running_stars)
from starbloom.sparql import parse_query


@pytest.fixture(scope="session")
def running_index():
    return exact_running_index()


@pytest.fixture(scope="session")
def running_query():
    return parse_query(RUNNING_QUERY)


@pytest.fixture(scope="session")
def running_query_distinct():
    return parse_query(RUNNING_QUERY_DISTINCT)


@pytest.fixture(scope="session")
def stars(running_query):
    return running_stars(running_query)
