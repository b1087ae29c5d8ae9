import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
IRIS_CSV = DATA_DIR / "iris.csv"
DIABETES_CSV = DATA_DIR / "diabetes.csv"

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture(scope="session")
def iris_csv() -> Path:
    return IRIS_CSV


@pytest.fixture(scope="session")
def diabetes_csv() -> Path:
    return DIABETES_CSV


def diabetes_available() -> bool:
    return DIABETES_CSV.exists()


MISSING_DIABETES_MSG = (
    "data/diabetes.csv is missing from this checkout. The benchmark needs the "
    "standard binary-labeled diabetes table (768 rows, 8 numeric features) "
    "at data/diabetes.csv with columns pregnancies,glucose,blood_pressure,"
    "skin_thickness,insulin,bmi,pedigree,age,label."
)
