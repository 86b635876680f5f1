import pytest

from conftest import TESTS
from lz.cli import run_golden_file, source_files

GOLDEN = source_files(TESTS / "golden")


@pytest.mark.parametrize("path", GOLDEN, ids=[str(p.relative_to(TESTS / "golden")) for p in GOLDEN])
def test_golden_file(path):
    outcome = run_golden_file(path)
    assert outcome.status == "pass", outcome.first_failed_check
