import pytest

from matterkb import KnowledgeBase, case_study_path, load, parse


@pytest.fixture(scope="session")
def case_text() -> str:
    return case_study_path().read_text(encoding="utf-8")


@pytest.fixture()
def case_kb(case_text) -> KnowledgeBase:
    result = parse(case_text)
    assert result.ok, result.diagnostics
    return load(result.scenario)
