import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pathwise.semantic_audit import default_lexicon
from pathwise.terminology import load_dictionary

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def dictionary():
    return load_dictionary(FIXTURES / "terminology.csv")


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def anaemia_diagram():
    from pathwise.diagram import parse_diagram

    return parse_diagram((FIXTURES / "pathway_anaemia.json").read_text())


@pytest.fixture(scope="session")
def chest_diagram():
    from pathwise.diagram import parse_diagram

    return parse_diagram((FIXTURES / "pathway_chest.json").read_text())


@pytest.fixture(scope="session")
def skin_diagram():
    from pathwise.diagram import parse_diagram

    return parse_diagram((FIXTURES / "pathway_skin.json").read_text())
