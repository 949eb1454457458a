import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _isolated_quantile_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("RELEVMON_QUANTILE_CACHE", str(tmp_path / "quantiles.json"))
