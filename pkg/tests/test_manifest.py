"""Anchored experiment manifests: schema, hashing, execution, reporting."""

from __future__ import annotations

import json

import pytest

from redlab.errors import ValidationError
from redlab.manifest import (
    Anchor,
    Experiment,
    ExperimentManifest,
    load_manifest,
    manifest_from_dict,
    manifest_hash,
    run_experiment,
    run_manifest,
)


def _experiment(name="demo", **kw):
    base = dict(
        subcommand="saturate",
        params=(("K", 3), ("d", 2), ("method", "closed")),
        anchors=(Anchor(metric="ell_bar", expect=2.0, tol=1e-12, tag="TRIVIAL"),),
    )
    base.update(kw)
    return Experiment(name=name, **base)


class TestSchema:
    def test_anchor_tag_whitelist(self):
        Anchor(metric="x", expect=1.0, tag="PAPER")
        with pytest.raises(ValidationError, match="anchor tag"):
            Anchor(metric="x", expect=1.0, tag="GUESSED")

    def test_anchor_checks_strings_and_numbers(self):
        assert Anchor(metric="v", expect="Stable-like").check("Stable-like")
        assert not Anchor(metric="v", expect="Stable-like").check("Diverging")
        num = Anchor(metric="v", expect=2.0, tol=0.1)
        assert num.check(2.05)
        assert not num.check(2.2)
        assert not num.check("not-a-number")

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValidationError):
            Anchor(metric="x", expect=1.0, tol=-0.1)

    def test_experiment_subcommand_whitelist(self):
        with pytest.raises(ValidationError, match="unknown subcommand"):
            _experiment(subcommand="teleport")

    def test_experiment_name_is_a_label(self):
        with pytest.raises(ValidationError):
            _experiment(name="a/b")

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValidationError, match="unique"):
            ExperimentManifest(experiments=(_experiment(), _experiment()))

    def test_unknown_manifest_keys_rejected(self):
        with pytest.raises(ValidationError, match="unknown manifest keys"):
            manifest_from_dict({"experiments": [], "clobber": True})
        with pytest.raises(ValidationError, match="unknown experiment keys"):
            manifest_from_dict({"experiments": [{"name": "x", "subcommand": "lt",
                                                 "params": {}, "extra": 1}]})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ValidationError, match="not valid JSON"):
            load_manifest(path)


class TestHash:
    def test_param_order_does_not_matter(self):
        a = manifest_from_dict({"experiments": [
            {"name": "x", "subcommand": "lt", "params": {"K": 5, "d": 2}}]})
        b = manifest_from_dict({"experiments": [
            {"name": "x", "subcommand": "lt", "params": {"d": 2, "K": 5}}]})
        assert manifest_hash(a) == manifest_hash(b)

    def test_content_changes_the_hash(self):
        a = manifest_from_dict({"experiments": [
            {"name": "x", "subcommand": "lt", "params": {"K": 5, "d": 2}}]})
        b = manifest_from_dict({"experiments": [
            {"name": "x", "subcommand": "lt", "params": {"K": 5, "d": 3}}]})
        assert manifest_hash(a) != manifest_hash(b)


class TestRun:
    def test_single_experiment(self):
        metrics, header, rows, provenance = run_experiment(_experiment())
        assert metrics["ell_bar"] == 2.0
        assert header[0] == "K"
        assert len(rows) == 1

    def test_manifest_report_and_outputs(self, tmp_path):
        manifest = ExperimentManifest(experiments=(_experiment(),))
        report = run_manifest(manifest, out_dir=tmp_path / "out")
        assert not report.any_fail
        assert report.outcomes[0].status == "PASS"
        assert (tmp_path / "out" / "demo.csv").exists()
        assert (tmp_path / "out" / "report.csv").exists()
        assert report.summary_lines()[-1] == "1/1 anchors pass"

    def test_failing_anchor_is_reported(self, tmp_path):
        bad = _experiment(anchors=(Anchor(metric="ell_bar", expect=1.9, tol=0.01),))
        report = run_manifest(ExperimentManifest(experiments=(bad,)),
                              out_dir=tmp_path / "out")
        assert report.any_fail
        assert report.outcomes[0].status == "FAIL"
        assert "0/1 anchors pass" in report.summary_lines()[-1]

    def test_unknown_metric_is_an_error(self, tmp_path):
        bad = _experiment(anchors=(Anchor(metric="nonsense", expect=1.0),))
        report = run_manifest(ExperimentManifest(experiments=(bad,)),
                              out_dir=tmp_path / "out")
        assert report.outcomes[0].status == "ERROR"

    def test_broken_experiment_is_an_error_not_a_crash(self, tmp_path):
        broken = Experiment(
            name="broken",
            subcommand="saturate",
            params=(("K", 3), ("d", 2), ("method", "warp")),
            anchors=(Anchor(metric="ell_bar", expect=2.0),),
        )
        report = run_manifest(ExperimentManifest(experiments=(broken,)),
                              out_dir=tmp_path / "out")
        assert report.outcomes[0].status == "ERROR"
        assert "ValidationError" in report.outcomes[0].got

    def test_packaged_manifest_round_trips_through_json(self):
        from importlib import resources

        payload = resources.files("redlab").joinpath(
            "data/repro_manifest.json").read_text("utf-8")
        manifest = manifest_from_dict(json.loads(payload))
        assert len(manifest.experiments) == 5
        assert manifest_hash(manifest) == "afaf0fe90a81"
