"""Command-line entry points for the whole pipeline."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .. import agree as agree_mod
from .. import ingest as ingest_mod
from ..annotate import run_annotation
from ..core import default_schema
from ..predict import (
    ModelKind,
    ModelSpec,
    learning_curve,
    loocv,
    write_model_report,
    write_predictions_csv,
)
from ..recommend import CurationMask, write_recommendations
from ..stats import (
    Expectation,
    concordance,
    effect_table,
    write_effects_csv,
    write_effects_json,
)
from .config import Config, make_backend
from .project import (
    ExpectationsLocked,
    ProjectLockFile,
    append_event,
    load_project,
    mark_effects_viewed,
    new_project,
    register_expectations,
    save_project,
    set_mask,
    EVENT_RECOMMENDATIONS_GENERATED,
)
from .server import _project_matrix, serve


@click.group()
@click.option("--project", "project_dir", default=".", show_default=True,
              help="Project directory.")
@click.option("--seed", default=0, show_default=True, help="Random seed.")
@click.option("--config", "config_path", default=None,
              help="key=value config file; ISAAC_API_KEY comes from the environment.")
@click.pass_context
def main(ctx: click.Context, project_dir: str, seed: int, config_path: str | None) -> None:
    """Book-enjoyment introspection and recommendation pipeline."""
    config = Config.load(config_path) if config_path else Config()
    if seed:
        from dataclasses import replace as _replace
        config = _replace(config, seed=seed)
    ctx.obj = {"root": Path(project_dir), "config": config}


def _load(ctx: click.Context):
    return load_project(ctx.obj["root"])


@main.command()
@click.pass_context
def init(ctx: click.Context) -> None:
    """Create a fresh project with the default annotation schema."""
    root = ctx.obj["root"]
    if (root / "manifest.json").exists():
        raise click.ClickException(f"{root} already holds a project")
    new_project(root, default_schema())
    click.echo(f"initialized project in {root}")


@main.command()
@click.argument("ratings_file", type=click.Path(exists=True))
@click.option("--format", "fmt", default="auto", show_default=True,
              type=click.Choice(["auto", "goodreads_csv", "simple_csv"]))
@click.option("--dnf-policy", default="include", show_default=True,
              type=click.Choice(["include", "exclude", "impute-floor"]))
@click.option("--journal", type=click.Path(exists=True), default=None,
              help="CSV of private notes (title,note or title,author,note).")
@click.option("--merge-media", type=click.Path(exists=True), default=None,
              help="Extra movie/TV or hypothetical ratings to append.")
@click.option("--media-weight", default=0.5, show_default=True)
@click.pass_context
def ingest(ctx: click.Context, ratings_file: str, fmt: str, dnf_policy: str,
           journal: str | None, merge_media: str | None, media_weight: float) -> None:
    """Parse a ratings export and apply the percentile transform."""
    project = _load(ctx)
    with ProjectLockFile(project.root):
        file = ingest_mod.RatingsFile.open(ratings_file, None if fmt == "auto" else fmt)
        books = ingest_mod.parse_ratings_export(file)
        books = ingest_mod.apply_dnf_policy(books, dnf_policy)
        if journal:
            books, notes = ingest_mod.parse_journal_notes(journal, books)
            for title in notes.unmatched:
                click.echo(f"warning: note for unknown title {title!r}", err=True)
        if merge_media:
            extra = ingest_mod.parse_ratings_export(
                ingest_mod.RatingsFile.open(merge_media))
            books = ingest_mod.merge_media_ratings(books, extra, media_weight)
        else:
            books = ingest_mod.apply_percentiles(books)
        project.books = books
        project.meta_seeds = ingest_mod.goodreads_metadata(file)
        save_project(project)
        try:
            skew = ingest_mod.skewness([b.raw_rating for b in books])
            click.echo(f"ingested {len(books)} items (raw-rating skew {skew:.3f})")
        except ingest_mod.DegenerateSample:
            click.echo(f"ingested {len(books)} items")


@main.command()
@click.option("--parallelism", default=None, type=int,
              help="Concurrent books (default from config).")
@click.option("--comments", "comments_dir", type=click.Path(exists=True),
              default=None,
              help="Directory of user-supplied comment files (<book_id>.txt).")
@click.pass_context
def annotate(ctx: click.Context, parallelism: int | None,
             comments_dir: str | None) -> None:
    """Annotate every rated book via the configured backend (resumable)."""
    from ..annotate import load_comment_files

    project = _load(ctx)
    config: Config = ctx.obj["config"]
    with ProjectLockFile(project.root):
        backend = make_backend(config)
        records, report = run_annotation(
            backend, project.books, project.schema,
            parallelism=parallelism or config.parallelism,
            seed_values=project.meta_seeds or None,
            comment_files=load_comment_files(comments_dir) if comments_dir else None,
            mock_provenance=config.backend == "mock")
        project.records.update({r.book_id: r for r in records})
        save_project(project)
    click.echo(f"annotated {report.annotated}/{report.total} books "
               f"({report.failure_count} failures, {report.skipped_cached} cached)")
    for book_id, reason in sorted(report.failures.items()):
        click.echo(f"  not documented: {book_id}: {reason}", err=True)


@main.command()
@click.argument("human_csv", type=click.Path(exists=True))
@click.option("--out", default=None, help="Write the markdown report here.")
@click.pass_context
def agree(ctx: click.Context, human_csv: str, out: str | None) -> None:
    """Compare human annotations against the AI records."""
    project = _load(ctx)
    human = agree_mod.read_human_annotations(human_csv)
    records = project.record_list()
    titles = {b.book_id: b.title for b in project.books}
    results = []
    for dim_id, by_book in sorted(human.items()):
        result = agree_mod.compare_annotations(by_book, records, dim_id)
        results.append(result)
        click.echo(f"{dim_id}: {result.percent}% ({result.n_agree}/{result.n_compared})")
    report = agree_mod.disagreement_report(results, records, titles)
    if out:
        Path(out).write_text(report, encoding="utf-8")
        click.echo(f"wrote {out}")


@main.command()
@click.option("--min-n", default=3, show_default=True)
@click.option("--out", default=None, help="Basename for effects.csv/effects.json.")
@click.pass_context
def analyze(ctx: click.Context, min_n: int, out: str | None) -> None:
    """Estimate per-dimension enjoyment effects (this reveals the data and
    locks expectation registration)."""
    project = _load(ctx)
    with ProjectLockFile(project.root):
        matrix = _project_matrix(project, mask=None)
        effects = effect_table(matrix, project.schema,
                               expectations=project.expectations, min_n=min_n)
        mark_effects_viewed(project)
        base = Path(out) if out else project.root / "effects"
        write_effects_csv(effects, base.with_suffix(".csv"), project.expectations)
        write_effects_json(effects, base.with_suffix(".json"), project.expectations)
    estimable = [e for e in effects if not e.inestimable]
    click.echo(f"estimated {len(estimable)}/{len(effects)} dimensions; "
               f"wrote {base.with_suffix('.csv')} and {base.with_suffix('.json')}")
    if project.expectations is not None:
        result = concordance(effects, project.expectations)
        click.echo(f"expectation concordance: {result.percent}% "
                   f"({result.matches}/{result.compared})")


@main.command()
@click.argument("expectations_file", type=click.Path(exists=True))
@click.option("--post-hoc", is_flag=True,
              help="Store even after effects were viewed; labeled post-hoc forever.")
@click.pass_context
def expect(ctx: click.Context, expectations_file: str, post_hoc: bool) -> None:
    """Register pre-registered expectations (CSV: dimension_id,sign[,band_lo,band_hi],
    or a JSON object)."""
    project = _load(ctx)
    path = Path(expectations_file)
    expectations: dict[str, Expectation] = {}
    if path.suffix == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        for dim, spec in payload.items():
            band = tuple(spec["band"]) if spec.get("band") else None
            expectations[dim] = Expectation(sign=int(spec["sign"]), band=band)
    else:
        with path.open("r", encoding="utf-8-sig", newline="") as fh:
            for row in csv.DictReader(fh):
                band = None
                if row.get("band_lo") and row.get("band_hi"):
                    band = (float(row["band_lo"]), float(row["band_hi"]))
                expectations[row["dimension_id"]] = Expectation(
                    sign=int(row["sign"]), band=band)
    with ProjectLockFile(project.root):
        try:
            stored = register_expectations(project, expectations, post_hoc=post_hoc)
        except ExpectationsLocked as err:
            raise click.ClickException(str(err))
    label = " (post-hoc)" if stored.post_hoc else ""
    click.echo(f"registered {len(expectations)} expectations{label}")


def _model_choice(name: str, config: Config) -> ModelSpec:
    if name == "forest":
        return ModelSpec.forest(n_trees=config.forest_trees, seed=config.seed)
    return ModelSpec.ridge() if name == "ridge" else ModelSpec.baseline()


@main.command()
@click.option("--model", "models", multiple=True,
              type=click.Choice(["ridge", "forest", "baseline"]),
              default=("ridge", "forest", "baseline"), show_default=True)
@click.option("--sizes", default=None,
              help="Comma-separated learning-curve sizes, e.g. 25,50,100.")
@click.option("--repeats", default=5, show_default=True)
@click.option("--ridge-grid", default=None,
              help="Override the nested-CV lambda grid, e.g. 0.1,1,10.")
@click.option("--out", default=None, help="Basename for model_report.json/predictions.csv.")
@click.pass_context
def predict(ctx: click.Context, models: tuple[str, ...], sizes: str | None,
            repeats: int, ridge_grid: str | None, out: str | None) -> None:
    """Cross-validated model comparison (and optional learning curve)."""
    project = _load(ctx)
    seed = ctx.obj["config"].seed
    matrix = _project_matrix(project, mask=project.mask)
    reports = []
    for name in models:
        spec = _model_choice(name, ctx.obj["config"])
        grid = None
        if ridge_grid and spec.kind is ModelKind.RIDGE:
            grid = [ModelSpec.ridge(float(lam)) for lam in ridge_grid.split(",")]
        report = loocv(matrix, spec, seed=seed, grid=grid)
        if sizes:
            size_list = [int(s) for s in sizes.split(",")]
            report.learning_curve = learning_curve(
                matrix, spec, size_list, repeats=repeats, seed=seed,
                grid=[spec] if spec.kind is ModelKind.RANDOM_FOREST else None)
        reports.append(report)
        shown = "undefined" if report.loocv_pearson is None else f"{report.loocv_pearson:.3f}"
        click.echo(f"{name}: LOOCV r = {shown}")
    base = Path(out) if out else project.root / "model_report"
    write_model_report(reports[0] if len(reports) == 1 else _best(reports),
                       base.with_suffix(".json"))
    write_predictions_csv(reports, base.with_name("predictions.csv"))
    click.echo(f"wrote {base.with_suffix('.json')} and predictions.csv")


def _best(reports):
    return max(reports, key=lambda r: (r.loocv_pearson if r.loocv_pearson is not None
                                       else float("-inf")))


@main.command()
@click.argument("dimension_ids", nargs=-1)
@click.option("--reason", default="", help="Free-text reason for the exclusion.")
@click.pass_context
def mask(ctx: click.Context, dimension_ids: tuple[str, ...], reason: str) -> None:
    """Exclude annotation dimensions from modeling and recommendation."""
    project = _load(ctx)
    with ProjectLockFile(project.root):
        mask = CurationMask(excluded=frozenset(dimension_ids),
                            reasons={d: reason for d in dimension_ids if reason})
        set_mask(project, mask)
    click.echo(f"mask now excludes {sorted(mask.excluded)}")


def _load_candidates(ctx: click.Context, project, candidates_file: str):
    from ..annotate import annotate_one
    from ..recommend import CandidateBook
    from ..core import RatedBook

    config: Config = ctx.obj["config"]
    backend = make_backend(config)
    candidates = []
    with Path(candidates_file).open("r", encoding="utf-8-sig", newline="") as fh:
        for row in csv.DictReader(fh):
            book = RatedBook.create(row["title"], row["author"], 0.0)
            record, _ = annotate_one(backend, book, project.schema,
                                     mock_provenance=config.backend == "mock")
            candidates.append(CandidateBook(
                book_id=book.book_id, title=row["title"], author=row["author"],
                record=record))
    return candidates


@main.command()
@click.argument("candidates_file", type=click.Path(exists=True))
@click.option("-k", default=5, show_default=True)
@click.option("--out", default=None)
@click.pass_context
def recommend(ctx: click.Context, candidates_file: str, k: int, out: str | None) -> None:
    """Rank unread candidates by predicted enjoyment."""
    from ..recommend import rank_candidates as _rank

    project = _load(ctx)
    seed = ctx.obj["config"].seed
    candidates = _load_candidates(ctx, project, candidates_file)
    specs = (ModelSpec.ridge(), _model_choice("forest", ctx.obj["config"]))
    result = _rank(candidates, project.books, project.record_list(), project.schema,
                   project.mask or CurationMask(excluded=frozenset()), k,
                   model_specs=specs, seed=seed)
    append_event(project, EVENT_RECOMMENDATIONS_GENERATED,
                 {"mode": "enjoyment", "k": k, "n_candidates": len(candidates)})
    for rec in result.recommendations:
        click.echo(f"{rec.rank}. {rec.title} (predicted {rec.predicted:.2f})")
    write_recommendations(result, Path(out) if out else project.root / "recommendations.json")


@main.command()
@click.argument("candidates_file", type=click.Path(exists=True))
@click.option("-k", default=5, show_default=True)
@click.option("--out", default=None)
@click.pass_context
def explore(ctx: click.Context, candidates_file: str, k: int, out: str | None) -> None:
    """Rank candidates by how much reading them would sharpen the effect estimates."""
    from ..recommend import exploration_rank as _explore

    project = _load(ctx)
    seed = ctx.obj["config"].seed
    candidates = _load_candidates(ctx, project, candidates_file)
    specs = (ModelSpec.ridge(), _model_choice("forest", ctx.obj["config"]))
    result = _explore(candidates, project.books, project.record_list(), project.schema,
                      project.mask or CurationMask(excluded=frozenset()), k,
                      model_specs=specs, seed=seed)
    append_event(project, EVENT_RECOMMENDATIONS_GENERATED,
                 {"mode": "exploration", "k": k, "n_candidates": len(candidates)})
    for rec in result.recommendations:
        click.echo(f"{rec.rank}. {rec.title} (informativeness {rec.informativeness:.4f})")
    write_recommendations(result, Path(out) if out else project.root / "recommendations.json")


@main.command()
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.pass_context
def serve_cmd(ctx: click.Context, bind: str) -> None:
    """Serve the JSON API for the browser UI."""
    serve(ctx.obj["root"], bind=bind, config=ctx.obj["config"])


main.add_command(serve_cmd, name="serve")


if __name__ == "__main__":
    sys.exit(main())
