"""Human vs AI annotation agreement and disagreement reporting."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import AnnotationRecord, Provenance, make_book_id


class NoOverlap(ValueError):
    """Human and AI annotations share no books for this dimension."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class AgreementResult:
    dimension_id: str
    n_compared: int
    n_agree: int
    percent: int
    kappa: float | None
    disagreements: tuple[tuple[str, float, float], ...]
    not_compared: tuple[str, ...] = ()  # books excluded because one side is MISSING

    @property
    def n_excluded(self) -> int:
        return len(self.not_compared)


def _cohen_kappa(pairs: Sequence[tuple[float, float]]) -> float | None:
    n = len(pairs)
    if n == 0:
        return None
    observed = sum(1 for h, a in pairs if h == a) / n
    human_counts = Counter(h for h, _ in pairs)
    ai_counts = Counter(a for _, a in pairs)
    expected = sum(
        (human_counts[v] / n) * (ai_counts[v] / n)
        for v in set(human_counts) | set(ai_counts)
    )
    if expected == 1.0:
        return None  # no chance-corrected information
    return (observed - expected) / (1.0 - expected)


def compare_annotations(human: Mapping[str, float | None],
                        ai: Sequence[AnnotationRecord],
                        dimension_id: str) -> AgreementResult:
    """Percent agreement over books annotated by both sides.

    A MISSING value on either side excludes the book from the comparison;
    those books are reported separately, never silently dropped.
    """
    ai_by_id = {r.book_id: r for r in ai}
    overlap = sorted(set(human) & set(ai_by_id))
    if not overlap:
        raise NoOverlap(f"no common books for dimension {dimension_id!r}")

    pairs: list[tuple[float, float]] = []
    disagreements: list[tuple[str, float, float]] = []
    not_compared: list[str] = []
    for book_id in overlap:
        h = human[book_id]
        a = ai_by_id[book_id].values.get(dimension_id)
        if h is None or a is None:
            not_compared.append(book_id)
            continue
        pairs.append((h, a))
        if h != a:
            disagreements.append((book_id, h, a))

    if not pairs:
        raise NoOverlap(f"all overlapping books are MISSING on one side for {dimension_id!r}")
    n_agree = len(pairs) - len(disagreements)
    return AgreementResult(
        dimension_id=dimension_id,
        n_compared=len(pairs),
        n_agree=n_agree,
        percent=round_half_up(100.0 * n_agree / len(pairs)),
        kappa=_cohen_kappa(pairs),
        disagreements=tuple(disagreements),
        not_compared=tuple(not_compared),
    )


def read_human_annotations(path: str | Path) -> dict[str, dict[str, float]]:
    """Load human annotations from CSV: (book_id | title+author), dimension_id, value.

    Returns {dimension_id: {book_id: value}}.
    """
    out: dict[str, dict[str, float]] = {}
    with Path(path).open("r", encoding="utf-8-sig", newline="") as fh:
        for row in csv.DictReader(fh):
            if "book_id" in row and (row["book_id"] or "").strip():
                book_id = row["book_id"].strip()
            elif "title" in row and "author" in row:
                book_id = make_book_id(row["title"], row["author"])
            else:
                raise ValueError(f"{path}: need book_id or title+author columns")
            dim = row["dimension_id"].strip()
            out.setdefault(dim, {})[book_id] = float(row["value"])
    return out


def disagreement_report(results: Sequence[AgreementResult],
                        records: Sequence[AnnotationRecord] = (),
                        titles: Mapping[str, str] | None = None) -> str:
    """Markdown report of disagreeing books per dimension, for qualitative
    error analysis; sorted by dimension then title."""
    prov_by_id: dict[str, Mapping[str, Provenance]] = {r.book_id: r.provenance for r in records}
    titles = titles or {}
    lines: list[str] = ["# Annotation agreement", ""]
    for result in sorted(results, key=lambda r: r.dimension_id):
        kappa = "n/a" if result.kappa is None else f"{result.kappa:.2f}"
        lines.append(f"## {result.dimension_id}")
        lines.append("")
        lines.append(f"- agreement: {result.percent}% "
                     f"({result.n_agree}/{result.n_compared}), kappa: {kappa}")
        if not result.disagreements:
            lines.append("- no disagreements")
        else:
            lines.append("")
            lines.append("| book | human | ai | provenance |")
            lines.append("|---|---|---|---|")
            rows = sorted(result.disagreements,
                          key=lambda d: titles.get(d[0], d[0]).lower())
            for book_id, h, a in rows:
                name = titles.get(book_id, book_id)
                prov = prov_by_id.get(book_id, {}).get(result.dimension_id)
                prov_str = prov.value if prov is not None else "?"
                lines.append(f"| {name} | {h:g} | {a:g} | {prov_str} |")
        if result.not_compared:
            names = ", ".join(titles.get(b, b) for b in result.not_compared)
            lines.append(f"- not compared (MISSING on one side): {names}")
        lines.append("")
    return "\n".join(lines)
