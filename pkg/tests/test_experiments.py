"""Experiment harness: shapes, determinism, leakage, report artifacts."""

import dataclasses
import json

import numpy as np
import pytest

from livesketch import experiments
from livesketch.corpus import CorpusConfig, build_toy_corpus
from livesketch.metrics import ExperimentReport
from livesketch.reporting import contact_sheet, report_table, training_curve_figure, write_reports
from livesketch.sketch import Sketch


class TestCorpusBuilder:
    def test_deterministic_under_seed(self):
        cfg = CorpusConfig(classes=("circle", "box"), per_class_train=4, per_class_test=2,
                           per_class_gallery=2, seed=3)
        a = build_toy_corpus(cfg)
        b = build_toy_corpus(cfg)
        for (ida, sa), (idb, sb) in zip(a.train, b.train):
            assert ida == idb and sa == sb
        for ga, gb in zip(a.gallery, b.gallery):
            assert ga.rotate_deg == gb.rotate_deg and ga.scale_mult == gb.scale_mult

    def test_per_class_counts_honored(self):
        cfg = CorpusConfig(classes=("circle", "box", "star"), per_class_train=5, per_class_test=3,
                           per_class_gallery=2, augment_per_source=2, seed=1)
        ds = build_toy_corpus(cfg)
        for cls in cfg.classes:
            assert sum(1 for _, s in ds.train if s.label == cls) == 5
            assert sum(1 for _, s in ds.test if s.label == cls) == 3
            assert sum(1 for g in ds.gallery if g.label == cls) == 4

    def test_gallery_sources_disjoint_from_sketch_splits(self):
        cfg = CorpusConfig(classes=("circle", "box"), per_class_train=4, per_class_test=2,
                           per_class_gallery=2, seed=5)
        ds = build_toy_corpus(cfg)
        sketch_keys = {s.points.tobytes() for _, s in ds.train + ds.test}
        for g in ds.gallery:
            assert g.sketch.points.tobytes() not in sketch_keys

    def test_too_few_classes_rejected(self):
        with pytest.raises(ValueError):
            build_toy_corpus(CorpusConfig(classes=("circle",)))

    def test_offsets_normalized(self):
        ds = build_toy_corpus(CorpusConfig(classes=("circle", "box"), per_class_train=6,
                                           per_class_test=2, per_class_gallery=2, seed=2))
        pooled = np.concatenate([s.points[:, :2].ravel() for _, s in ds.train + ds.test])
        assert 0.5 < np.std(pooled) < 2.0


class TestS2S:
    def test_report_shapes_and_determinism(self, tiny_dataset, tiny_stack):
        a = experiments.run_s2s("V-R", False, tiny_dataset, tiny_stack, seed=4)
        b = experiments.run_s2s("V-R", False, tiny_dataset, tiny_stack, seed=4)
        assert a.name == "S2S-V-R"
        assert len(a.per_query_ap_class) == len(tiny_dataset.test)
        assert a.map_class == b.map_class
        assert a.per_query_ap_instance == b.per_query_ap_instance
        assert 0.0 <= a.map_class <= 1.0

    def test_shuffle_variant_runs_and_is_labelled(self, tiny_dataset, tiny_stack):
        rep = experiments.run_s2s("R-V", True, tiny_dataset, tiny_stack, seed=4)
        assert rep.name == "S2S-R-V-shuffle"
        assert rep.config["shuffle"] is True

    def test_unknown_modality_rejected(self, tiny_dataset, tiny_stack):
        with pytest.raises(ValueError):
            experiments.run_s2s("X-Y", False, tiny_dataset, tiny_stack)

    def test_label_permutation_leaves_rankings_unchanged(self, tiny_dataset, tiny_stack):
        """Ground truth labels feed judgments only, never the ranking path."""
        rep = experiments.run_s2s("V-R", False, tiny_dataset, tiny_stack, seed=4)

        rng = np.random.default_rng(0)
        permuted = []
        labels = [s.label for _, s in tiny_dataset.train]
        shuffled_labels = list(rng.permutation(labels))
        for (sid, s), lab in zip(tiny_dataset.train, shuffled_labels):
            permuted.append((sid, Sketch(s.points, label=lab)))
        mangled = dataclasses.replace(tiny_dataset, train=permuted)
        rep2 = experiments.run_s2s("V-R", False, mangled, tiny_stack, seed=4)
        # same ranked ids per query even though labels (and hence AP) changed
        for j1, j2 in zip(rep.judgments, rep2.judgments):
            assert j1.ranked_ids == j2.ranked_ids


class TestS2I:
    def test_exactly_configured_rows(self, tiny_dataset, tiny_stack):
        reports = experiments.run_s2i(tiny_dataset, tiny_stack, seed=1)
        assert [r.name for r in reports] == ["S2I-LS", "S2I-LS-R", "S2I-LS-R-I"]
        for r in reports:
            assert any("not comparable" in note for note in r.notes)
            assert len(r.per_query_ap_instance) > 0

    def test_subset_of_rows(self, tiny_dataset, tiny_stack):
        reports = experiments.run_s2i(tiny_dataset, tiny_stack, seed=1, rows=("LS",))
        assert [r.name for r in reports] == ["S2I-LS"]


class TestPerturbBench:
    def test_sequences_and_rates(self, tiny_dataset, tiny_stack):
        bench = experiments.run_perturbation_bench(tiny_dataset, tiny_stack, pairs=2, steps=4,
                                                   backprop_steps=10, seed=0)
        assert set(bench) == {"linear", "slerp", "backprop"}
        for res in bench.values():
            assert len(res.sequences) == 2
            assert all(len(seq) == 4 for seq in res.sequences)
            assert 0.0 <= res.decode_validity_rate <= 1.0
            assert len(res.per_pair_start_distance) == 2


class TestReporting:
    def _report(self):
        return ExperimentReport(
            name="toy", per_query_ap_class=[0.5, 1.0], per_query_ap_instance=[0.2, None],
            map_class=0.75, map_instance=0.2, chance_map_class=0.3, chance_map_instance=0.05,
            precision_curve_class=[(1, 1.0), (5, 0.6)], precision_curve_instance=[(1, 0.5)],
            counterpart_top10_rate=0.5, config={"k": 5}, seed=3,
        )

    def test_write_reports_emits_all_artifacts(self, tmp_path):
        paths = write_reports([self._report()], tmp_path)
        assert json.loads((tmp_path / "report.json").read_text())[0]["name"] == "toy"
        csv_text = (tmp_path / "report.csv").read_text()
        assert "map_class" in csv_text and "toy" in csv_text
        assert (tmp_path / "report.txt").exists()
        assert (tmp_path / "precision_at_k.png").exists()
        assert (tmp_path / "precision_at_k.svg").exists()
        assert set(paths) == {"json", "csv", "table", "figure"}

    def test_table_contains_headline_numbers(self):
        text = report_table([self._report()])
        assert "toy" in text and "0.7500" in text

    def test_contact_sheet_svg(self, tmp_path):
        s = Sketch([[0, 0, 0], [1, 1, 1]])
        path = contact_sheet({"linear": [s, s, s], "backprop": [s, s]}, tmp_path / "sheet.svg")
        assert path.endswith(".svg")
        assert (tmp_path / "sheet.svg").stat().st_size > 0

    def test_training_curve_figure(self, tmp_path):
        curve = [{"epoch": 0, "total": 3.0, "kl": 1.0}, {"epoch": 1, "total": 2.0, "kl": 0.9}]
        training_curve_figure(curve, tmp_path / "curve.png")
        assert (tmp_path / "curve.png").exists()
