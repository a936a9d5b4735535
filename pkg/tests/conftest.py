import numpy as np
import pytest

from scorer_calib.core import DataPoint, Dataset, ResponseFeatures, ScoreScale

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_dataset(rng, J=3, n_per=12, D=4, scale=ScoreScale(), feats=True) -> Dataset:
    points = []
    C = scale.num_categories
    for j in range(J):
        for i in range(n_per):
            f = ResponseFeatures(*rng.uniform(0, 50, 2), rng.uniform(0, 40)) if feats else ResponseFeatures()
            points.append(DataPoint(
                pair_id=f"p{j}_{i}",
                representation=tuple(rng.normal(size=D)),
                scorer_id=f"s{j}",
                score=scale.to_score(int(rng.integers(C))),
                features=f,
            ))
    return Dataset.from_points(points, scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_ds(rng):
    return make_dataset(rng)
