from __future__ import annotations

import pytest

from sqltrace.catalog import catalog_from_spider, load_catalogs
from sqltrace.corpus_io import load_seeds
from sqltrace.synthesis import load_templates

from tests_paths import SAMPLE_CATALOGS, SAMPLE_SEEDS, TEMPLATE_PACK


@pytest.fixture(scope="session")
def catalogs():
    return load_catalogs(SAMPLE_CATALOGS)


@pytest.fixture(scope="session")
def auto_shop(catalogs):
    return catalogs["auto_shop"]


@pytest.fixture(scope="session")
def elections(catalogs):
    return catalogs["elections"]


@pytest.fixture(scope="session")
def cars_catalog():
    """The two-column worked-example catalog: cars(name, year)."""
    return catalog_from_spider(
        {
            "db_id": "cars_db",
            "table_names_original": ["cars"],
            "column_names_original": [[-1, "*"], [0, "name"], [0, "year"]],
            "column_types": ["text", "text", "number"],
            "primary_keys": [],
            "foreign_keys": [],
        }
    )


@pytest.fixture(scope="session")
def templates():
    return load_templates(TEMPLATE_PACK)


@pytest.fixture(scope="session")
def seeds(catalogs):
    return load_seeds(SAMPLE_SEEDS, catalogs)
