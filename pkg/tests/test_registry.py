"""Profile registry: versioning, lookup, per-target deployment outcomes."""

import pytest

from lampgrid.registry import DeploymentReport, ProfileRegistry, RegistryError
from conftest import make_profile_doc


class TestRegister:
    def test_versions_count_up_from_one(self):
        registry = ProfileRegistry()
        assert registry.register(make_profile_doc()) == 1
        assert registry.register(make_profile_doc(threshold=0.9)) == 2
        assert registry.versions() == [1, 2]
        assert registry.latest_version() == 2

    def test_stored_profile_carries_assigned_version(self):
        registry = ProfileRegistry()
        version = registry.register(make_profile_doc(version=99))
        assert version == 1  # registry numbering wins over the document's
        assert registry.get(1).version == 1

    def test_same_content_gets_new_version(self):
        registry = ProfileRegistry()
        doc = make_profile_doc()
        assert registry.register(doc) == 1
        assert registry.register(doc) == 2

    def test_unknown_version_raises(self):
        registry = ProfileRegistry()
        with pytest.raises(RegistryError, match="version 7"):
            registry.get(7)

    def test_empty_registry(self):
        registry = ProfileRegistry()
        assert registry.latest_version() == 0
        assert registry.versions() == []


class TestDeploy:
    def test_per_target_statuses_recorded(self):
        registry = ProfileRegistry()
        version = registry.register(make_profile_doc())

        def send(target, profile):
            assert profile.version == version
            return "ok" if target != "llu-03" else "unknown_target"

        report = registry.deploy(version, ["llu-01", "llu-02", "llu-03"], send)
        assert report.version == version
        assert report.ok_targets == ["llu-01", "llu-02"]
        assert report.failed_targets == ["llu-03"]
        assert report.results["llu-03"] == "unknown_target"

    def test_deploy_unknown_version_aborts_before_sending(self):
        registry = ProfileRegistry()
        sent = []
        with pytest.raises(RegistryError):
            registry.deploy(3, ["llu-01"], lambda t, p: sent.append(t) or "ok")
        assert sent == []

    def test_report_serializes(self):
        report = DeploymentReport(version=2, results={"llu-01": "ok"})
        assert report.as_dict() == {"version": 2, "results": {"llu-01": "ok"}}
