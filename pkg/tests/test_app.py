import json
from pathlib import Path

import pytest

from corpus98 import corpus_backend, corpus_books
from isaac.annotate import run_annotation
from isaac.app.project import (
    EVENT_EFFECTS_VIEWED,
    EVENT_EXPECTATIONS_REGISTERED,
    CorruptProject,
    ExpectationsLocked,
    ProjectLocked,
    ProjectLockFile,
    UnknownDimension,
    VersionTooNew,
    append_event,
    load_project,
    lock_state,
    mark_effects_viewed,
    new_project,
    register_expectations,
    save_project,
    set_mask,
)
from isaac.core import default_schema
from isaac.ingest import apply_percentiles
from isaac.recommend import CurationMask
from isaac.stats import Expectation


def seeded_project(tmp_path, n_books=6, annotate=False):
    project = new_project(tmp_path / "proj", default_schema())
    project.books = apply_percentiles(corpus_books()[:n_books])
    if annotate:
        records, _ = run_annotation(corpus_backend(), project.books,
                                    project.schema, mock_provenance=True)
        project.records = {r.book_id: r for r in records}
    save_project(project)
    return project


def snapshot_bytes(root: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())
            if p.is_file() and p.name != ".lock"}


class TestPersistence:
    def test_fresh_project_layout(self, tmp_path):
        project = new_project(tmp_path / "proj")
        for name in ("schema.json", "ratings.csv", "records.jsonl", "events.log",
                     "manifest.json"):
            assert (project.root / name).exists(), name

    def test_save_load_save_byte_identical(self, tmp_path):
        project = seeded_project(tmp_path, annotate=True)
        first = snapshot_bytes(project.root)
        loaded = load_project(project.root)
        save_project(loaded)
        second = snapshot_bytes(project.root)
        assert first == second

    def test_structural_roundtrip(self, tmp_path):
        project = seeded_project(tmp_path, annotate=True)
        register_expectations(project, {"theme_war": Expectation(sign=1)})
        set_mask(project, CurationMask(excluded=frozenset({"mood_dark"})))
        loaded = load_project(project.root)
        assert loaded.schema == project.schema
        assert loaded.books == project.books
        assert loaded.records == project.records
        assert loaded.mask == project.mask
        assert loaded.expectations == project.expectations
        assert [e.kind for e in loaded.events] == [e.kind for e in project.events]

    def test_truncated_records_names_line(self, tmp_path):
        project = seeded_project(tmp_path, annotate=True)
        records_path = project.root / "records.jsonl"
        text = records_path.read_text()
        records_path.write_text(text[:-40])  # chop the tail of the last line
        with pytest.raises(CorruptProject, match=r"line 6"):
            load_project(project.root)

    def test_checksum_mismatch(self, tmp_path):
        project = seeded_project(tmp_path)
        path = project.root / "ratings.csv"
        path.write_text(path.read_text() + "tampered,row,1,,0,0,book,1.0,\n")
        with pytest.raises(CorruptProject, match="checksum"):
            load_project(project.root)

    def test_version_too_new(self, tmp_path):
        project = seeded_project(tmp_path)
        manifest_path = project.root / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["format_version"] = 99
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(VersionTooNew):
            load_project(project.root)

    def test_not_a_project(self, tmp_path):
        with pytest.raises(CorruptProject):
            load_project(tmp_path)


class TestCrashConsistency:
    def test_kill_between_any_two_renames_leaves_loadable_project(self, tmp_path):
        project = seeded_project(tmp_path, annotate=True)
        old_titles = [b.title for b in project.books]

        counter = {"n": 0}
        real = Path.replace

        def counting(self, target):
            counter["n"] += 1
            return real(self, target)

        Path.replace = counting
        try:
            save_project(load_project(project.root))
        finally:
            Path.replace = real

        crash_points = range(1, counter["n"] + 1)
        assert counter["n"] >= 4
        for crash_at in crash_points:
            loaded = load_project(project.root)
            loaded.books = loaded.books[:-1]  # a visible mutation
            calls = {"n": 0}
            real_replace = Path.replace

            def exploding_replace(self, target, crash_at=crash_at, calls=calls):
                calls["n"] += 1
                if calls["n"] >= crash_at:
                    raise RuntimeError("simulated crash")
                return real_replace(self, target)

            Path.replace = exploding_replace
            try:
                with pytest.raises(RuntimeError):
                    save_project(loaded)
            finally:
                Path.replace = real_replace
            recovered = load_project(project.root)
            titles = [b.title for b in recovered.books]
            assert titles in ([b.title for b in loaded.books], old_titles)
            save_project(recovered)  # project remains fully writable

    def test_interrupted_rename_recovery_completes(self, tmp_path):
        # Crash right after the manifest commit: data files still staged.
        project = seeded_project(tmp_path)
        project.books = project.books[:2]
        calls = {"n": 0}
        real_replace = Path.replace

        def crash_after_manifest(self, target):
            calls["n"] += 1
            if calls["n"] == 2:
                raise RuntimeError("simulated crash")
            return real_replace(self, target)

        Path.replace = crash_after_manifest
        try:
            with pytest.raises(RuntimeError):
                save_project(project)
        finally:
            Path.replace = real_replace
        recovered = load_project(project.root)
        assert len(recovered.books) == 2  # the committed new state won


class TestEventLog:
    def test_timestamps_strictly_increasing(self, tmp_path):
        project = new_project(tmp_path / "proj")
        for i in range(50):
            append_event(project, "mask_changed", {"i": i})
        stamps = [e.at for e in project.events]
        assert all(a < b for a, b in zip(stamps, stamps[1:]))

    def test_replay_reconstructs_lock_state(self, tmp_path):
        project = seeded_project(tmp_path)
        assert not load_project(project.root).effects_viewed
        mark_effects_viewed(project)
        reloaded = load_project(project.root)
        assert reloaded.effects_viewed
        assert lock_state(reloaded.events)

    def test_torn_final_line_dropped_with_warning(self, tmp_path):
        project = seeded_project(tmp_path)
        append_event(project, EVENT_EFFECTS_VIEWED)
        log = project.root / "events.log"
        log.write_bytes(log.read_bytes() + b'{"at": "2030-01-01T00:00:0')
        reloaded = load_project(project.root)
        assert reloaded.effects_viewed  # intact events survive

    def test_interior_bad_line_is_corrupt(self, tmp_path):
        project = seeded_project(tmp_path)
        append_event(project, EVENT_EFFECTS_VIEWED)
        log = project.root / "events.log"
        log.write_text("not json\n" + log.read_text())
        with pytest.raises(CorruptProject, match="line 1"):
            load_project(project.root)


class TestExpectationLock:
    def test_register_before_view(self, tmp_path):
        project = seeded_project(tmp_path)
        stored = register_expectations(project, {"theme_war": Expectation(sign=1)})
        assert not stored.locked
        assert not stored.post_hoc
        assert project.events[-1].kind == EVENT_EXPECTATIONS_REGISTERED

    def test_register_after_view_rejected(self, tmp_path):
        project = seeded_project(tmp_path)
        mark_effects_viewed(project)
        with pytest.raises(ExpectationsLocked):
            register_expectations(project, {"theme_war": Expectation(sign=1)})

    def test_post_hoc_flag_stores_with_label(self, tmp_path):
        project = seeded_project(tmp_path)
        mark_effects_viewed(project)
        stored = register_expectations(project, {"theme_war": Expectation(sign=1)},
                                       post_hoc=True)
        assert stored.post_hoc
        assert load_project(project.root).expectations.post_hoc

    def test_unknown_dimension(self, tmp_path):
        project = seeded_project(tmp_path)
        with pytest.raises(UnknownDimension):
            register_expectations(project, {"no_such_dim": Expectation(sign=1)})

    def test_every_interleaving_of_register_view_register(self, tmp_path):
        # register -> view -> register: the second register must fail without
        # the post-hoc flag in every interleaving where a view precedes it.
        import itertools
        for order in set(itertools.permutations(["register", "view", "register"])):
            root = tmp_path / ("case_" + "_".join(order))
            project = new_project(root, default_schema())
            project.books = apply_percentiles(corpus_books()[:5])
            save_project(project)
            viewed = False
            registered = 0
            for action in order:
                if action == "view":
                    mark_effects_viewed(project)
                    viewed = True
                else:
                    registered += 1
                    if viewed:
                        with pytest.raises(ExpectationsLocked):
                            register_expectations(
                                project, {"theme_war": Expectation(sign=1)})
                        stored = register_expectations(
                            project, {"theme_war": Expectation(sign=1)},
                            post_hoc=True)
                        assert stored.post_hoc
                    else:
                        stored = register_expectations(
                            project, {"theme_war": Expectation(sign=1)})
                        assert not stored.post_hoc
            # replay from disk agrees with in-memory lock state
            assert load_project(root).effects_viewed == viewed


class TestProjectLockFile:
    def test_second_acquire_rejected(self, tmp_path):
        lock = ProjectLockFile(tmp_path).acquire()
        with pytest.raises(ProjectLocked):
            ProjectLockFile(tmp_path).acquire()
        lock.release()
        ProjectLockFile(tmp_path).acquire().release()

    def test_stale_lock_taken_over(self, tmp_path):
        stale = ProjectLockFile(tmp_path)
        stale.path.write_text("999999999")  # no such pid
        ProjectLockFile(tmp_path).acquire().release()
