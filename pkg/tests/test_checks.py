from collections import Counter

import pytest

from basilica import checks


def test_registry_is_complete():
    counts = Counter(inv.module for inv in checks.REGISTRY)
    assert dict(counts) == checks.EXPECTED_COUNTS
    assert len(checks.REGISTRY) == sum(checks.EXPECTED_COUNTS.values())
    assert len({(i.module, i.name) for i in checks.REGISTRY}) == len(checks.REGISTRY)


@pytest.mark.parametrize("inv", checks.REGISTRY, ids=lambda i: f"{i.module}:{i.name}")
def test_invariant(inv):
    result = checks._run_one(inv, seed=0)
    assert result.ok, result.detail


def test_failures_are_reported(monkeypatch):
    def broken(rng):
        checks.ensure(False, "deliberate")

    monkeypatch.setattr(checks, "REGISTRY", [checks.Invariant("cells", "broken", broken)])
    (result,) = checks.run_all()
    assert not result.ok and "deliberate" in result.detail
