import json
import math
from pathlib import Path

import pytest

from erm_asymptotics.teacher import GaussianPrior, RectangleDoor, Sign, TeacherModel

ORACLES = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLES


@pytest.fixture(scope="session")
def sign_teacher():
    return TeacherModel(Sign(0.0), GaussianPrior(0.0, 1.0))


@pytest.fixture(scope="session")
def door_teacher():
    return TeacherModel(RectangleDoor(-0.6745, 0.6745, 0.0), GaussianPrior(0.0, 1.0))


def close(a, b, tol):
    return abs(float(a) - float(b)) <= tol
