import pytest

from riskbench import CalibrationTable, solve_unbiased_es_constant


@pytest.fixture(scope="session")
def table_a50():
    """Calibration table holding a_50 at alpha = 0.10 (1e6 MC draws)."""
    table = CalibrationTable()
    table.add(solve_unbiased_es_constant(50, 0.10, 1_000_000, seed=20240810))
    return table


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: spec acceptance criteria (some are slow)")
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")
