import io

import pytest
from fastapi.testclient import TestClient

from corpus98 import corpus_books
from isaac.app.config import Config
from isaac.app.project import load_project, new_project
from isaac.app.server import create_app
from isaac.core import default_schema


@pytest.fixture()
def project_root(tmp_path):
    project = new_project(tmp_path / "proj", default_schema())
    return project.root


@pytest.fixture()
def client(project_root):
    config = Config(backend="mock", forest_trees=10)
    app = create_app(project_root, config)
    return TestClient(app)


def ratings_csv(n=12):
    import csv
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["title", "author", "rating", "dnf", "hypothetical", "media_type"])
    for b in corpus_books()[:n]:
        w.writerow([b.title, b.author, b.raw_rating, int(b.dnf),
                    int(b.hypothetical), b.media_type.value])
    return buf.getvalue()


def upload_and_annotate(client, n=12):
    resp = client.post("/api/ratings", json={"csv": ratings_csv(n)})
    assert resp.status_code == 200, resp.text
    resp = client.post("/api/annotate", json={})
    assert resp.status_code == 200, resp.text
    return resp


CANDIDATES_CSV = "title,author\nNew Horizon,Fresh Voice\nSecond Wind,Another Pen\n"


class TestProjectEndpoint:
    def test_fresh_project_summary(self, client):
        body = client.get("/api/project").json()
        assert body["schema_version"] == 1
        assert body["n_books"] == 0
        assert not body["expectations_locked"]
        assert any(d["id"] == "gr_avg_rating" for d in body["dimensions"])


class TestRatingsAndAnnotate:
    def test_upload_parses_and_persists(self, client, project_root):
        resp = client.post("/api/ratings", json={"csv": ratings_csv(8)})
        body = resp.json()
        assert body["added"] == 8
        assert load_project(project_root).books[0].percentile is not None

    def test_row_upload_with_hypothetical_flag(self, client):
        upload_and_annotate(client, 6)
        resp = client.post("/api/ratings", json={"rows": [
            {"title": "Imagined", "author": "Future Me", "rating": 70,
             "hypothetical": True}]})
        body = resp.json()
        assert body["added"] == 1
        flagged = [b for b in body["books"] if b["hypothetical"]]
        assert len(flagged) == 1 and flagged[0]["title"] == "Imagined"

    def test_annotate_runs_mock_backend(self, client, project_root):
        resp = upload_and_annotate(client, 6)
        assert resp.json()["annotated"] == 6
        assert len(load_project(project_root).records) == 6

    def test_bad_csv_is_machine_readable(self, client):
        resp = client.post("/api/ratings", json={"csv": "nope,nothing\na,b\n"})
        assert resp.status_code == 400
        assert resp.json()["error"] in ("FormatError", "EmptyFile")


class TestEffectsAndLock:
    def test_effects_appends_viewed_event(self, client, project_root):
        upload_and_annotate(client)
        before = len(load_project(project_root).events)
        resp = client.get("/api/effects")
        assert resp.status_code == 200
        body = resp.json()
        assert body["effects"]
        events = load_project(project_root).events
        assert len(events) == before + 1
        assert events[-1].kind == "effects_viewed"

    def test_expectations_before_reveal_accepted(self, client):
        upload_and_annotate(client)
        resp = client.post("/api/expectations", json={
            "expectations": {"theme_war": {"sign": 1, "band": [0.1, 0.3]}}})
        assert resp.status_code == 200
        assert resp.json()["post_hoc"] is False

    def test_expectations_after_reveal_409(self, client):
        upload_and_annotate(client)
        client.get("/api/effects")
        resp = client.post("/api/expectations", json={
            "expectations": {"theme_war": {"sign": 1}}})
        assert resp.status_code == 409
        assert resp.json()["error"] == "ExpectationsLocked"

    def test_post_hoc_escape_hatch_labels_everything(self, client):
        upload_and_annotate(client)
        client.get("/api/effects")
        resp = client.post("/api/expectations", json={
            "expectations": {"theme_war": {"sign": 1}}, "post_hoc": True})
        assert resp.status_code == 200
        assert resp.json()["post_hoc"] is True
        assert client.get("/api/effects").json()["expectations_post_hoc"] is True
        assert client.get("/api/project").json()["expectations_post_hoc"] is True

    def test_unknown_dimension_400(self, client):
        upload_and_annotate(client)
        resp = client.post("/api/expectations", json={
            "expectations": {"no_such": {"sign": 1}}})
        assert resp.status_code == 400
        assert resp.json()["error"] == "UnknownDimension"

    def test_concordance(self, client):
        upload_and_annotate(client)
        client.post("/api/expectations", json={
            "expectations": {"theme_war": {"sign": 1}, "mood_dark": {"sign": -1}}})
        resp = client.get("/api/concordance")
        if resp.status_code == 200:
            body = resp.json()
            assert 0 <= body["percent"] <= 100
            assert set(body["verdicts"]) == {"theme_war", "mood_dark"}
        else:
            assert resp.json()["error"] == "NothingComparable"


class TestMaskAndRecommend:
    def test_mask_then_recommend_lists_exclusions(self, client):
        upload_and_annotate(client)
        resp = client.post("/api/mask", json={"excluded": ["mood_dark"],
                                              "reasons": {"mood_dark": "mistrust"}})
        assert resp.status_code == 200
        resp = client.post("/api/recommend",
                           json={"candidates_csv": CANDIDATES_CSV, "k": 2})
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["model"]["excluded_dimensions"] == ["mood_dark"]
        assert len(body["recommendations"]) == 2
        ranks = [r["rank"] for r in body["recommendations"]]
        assert ranks == [1, 2]
        for rec in body["recommendations"]:
            assert all(x["dimension_id"] != "mood_dark" for x in rec["explanation"])

    def test_model_report_includes_mask(self, client):
        upload_and_annotate(client)
        client.post("/api/mask", json={"excluded": ["mood_dark"]})
        resp = client.get("/api/model-report", params={"model": "ridge"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["model"] == "ridge"
        assert body["excluded_dimensions"] == ["mood_dark"]

    def test_explore_mode(self, client):
        upload_and_annotate(client)
        resp = client.post("/api/explore",
                           json={"candidates_csv": CANDIDATES_CSV, "k": 2})
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["mode"] == "exploration"
        infos = [r["informativeness"] for r in body["recommendations"]]
        assert all(i is not None for i in infos)

    def test_recommend_without_books_409(self, client):
        resp = client.post("/api/recommend", json={"candidates_csv": CANDIDATES_CSV})
        assert resp.status_code in (400, 409)


class TestIdempotency:
    def test_mutation_replayed_not_reapplied(self, client, project_root):
        upload_and_annotate(client, 6)
        headers = {"Idempotency-Key": "mask-1"}
        first = client.post("/api/mask", json={"excluded": ["mood_dark"]},
                            headers=headers)
        events_after_first = len(load_project(project_root).events)
        second = client.post("/api/mask", json={"excluded": ["mood_dark"]},
                             headers=headers)
        assert first.json() == second.json()
        assert len(load_project(project_root).events) == events_after_first

    def test_ratings_upload_idempotent(self, client, project_root):
        headers = {"Idempotency-Key": "up-1"}
        first = client.post("/api/ratings", json={"csv": ratings_csv(5)},
                            headers=headers)
        second = client.post("/api/ratings", json={"csv": ratings_csv(5)},
                             headers=headers)
        assert first.json() == second.json()
        assert len(load_project(project_root).books) == 5


class TestDimensionBooks:
    def test_contributing_books_listed(self, client):
        upload_and_annotate(client, 8)
        resp = client.get("/api/dimension-books",
                          params={"dimension_id": "theme_war"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["dimension_id"] == "theme_war"
        assert 0 < len(body["books"]) <= 8
        for entry in body["books"]:
            assert set(entry) == {"book_id", "title", "author", "value",
                                  "percentile"}

    def test_unknown_dimension_400(self, client):
        resp = client.get("/api/dimension-books",
                          params={"dimension_id": "nope"})
        assert resp.status_code == 400
