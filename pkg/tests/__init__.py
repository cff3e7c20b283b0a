from pathlib import Path


FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
SCENARIOS = FIXTURES / "scenarios"
RULES = FIXTURES / "rules"
PROFILES = FIXTURES / "profiles"
