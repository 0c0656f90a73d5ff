"""Shared fixtures: the bundled demo dataset and a small three-variable toy."""

import pathlib

import pytest

from cegforge import (
    Staging,
    assign_stages,
    create_event_tree,
    initial_staging,
    load_csv,
)

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def fixture_csv_path() -> pathlib.Path:
    return DATA_DIR / "homicides_like.csv"


@pytest.fixture(scope="session")
def fixture_geojson_path() -> pathlib.Path:
    return DATA_DIR / "london_boroughs.geojson"


@pytest.fixture(scope="session")
def homicide_data(fixture_csv_path):
    return load_csv(str(fixture_csv_path))


@pytest.fixture(scope="session")
def homicide_tree(homicide_data):
    # columns 2..5 of the demo file: method, sex, abuse, solved
    return create_event_tree(homicide_data, [1, 2, 3, 4])


TOY_CSV = """\
method,sex,solved
blunt,female,yes
blunt,male,yes
knife,female,no
knife,male,yes
shooting,male,no
shooting,male,yes
blunt,female,no
knife,female,yes
"""


@pytest.fixture()
def toy_data():
    return load_csv(text=TOY_CSV)


@pytest.fixture()
def toy_tree(toy_data):
    """Cardinalities (3, 2, 2): ids s0..s9 for situations, s10..s21 leaves."""
    return create_event_tree(toy_data)


@pytest.fixture()
def toy_staging(toy_tree) -> Staging:
    """Staging under which the subtrees below s1 and s2 look identical.

    s1 and s2 share a stage, and their children agree pairwise
    (s4 with s6, s5 with s7). s3 and its children stay singletons.
    """
    staging = initial_staging(toy_tree)
    staging = assign_stages(
        toy_tree,
        staging,
        [["s1", "s2"], ["s3"], ["s4", "s6"], ["s5", "s7"], ["s8"], ["s9"]],
    )
    return staging
