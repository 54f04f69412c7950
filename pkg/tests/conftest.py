import pytest

from helpers import TASK_ALPHABET, TASK_FORMULAS
from rmkit import formulas


@pytest.fixture(scope="session")
def task_machines():
    """Canonical reward machines for the eight benchmark tasks."""
    return {tid: formulas.compile_formula(text, TASK_ALPHABET) for tid, text in TASK_FORMULAS.items()}


@pytest.fixture
def compile_formula():
    def _compile(text, alphabet=TASK_ALPHABET):
        return formulas.compile_formula(text, alphabet)

    return _compile
