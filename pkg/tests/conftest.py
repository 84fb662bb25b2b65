import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

import support


@pytest.fixture(scope="session")
def corpus():
    return support.full_corpus()


@pytest.fixture(scope="session")
def terminating_corpus():
    return support.terminating_corpus()


@pytest.fixture(scope="session")
def sc_corpus():
    return support.sc_corpus()


@pytest.fixture(scope="session")
def fan_corpus():
    return support.fan_corpus()
