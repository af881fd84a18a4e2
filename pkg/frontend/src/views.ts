// HTML renderers for each wizard step. Pure functions from state to markup;
// main.ts wires the data-action attributes to handlers in the browser.

import { renderForestPlot, sortRows, toPlotRows, type SortKey } from "./plot.js";
import { STEPS, type Step, type WizardState, canEnter, revealUnlocked } from "./wizard.js";
import type { DimensionBooksPayload, RecommendationRow } from "./types.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const STEP_TITLES: Record<Step, string> = {
  upload: "1. Upload ratings",
  annotate_progress: "2. Annotate",
  expect: "3. Register expectations",
  reveal: "4. Reveal effects",
  curate: "5. Curate dimensions",
  recommend: "6. Recommendations",
};

export function renderNav(state: WizardState): string {
  const buttons = STEPS.map((step) => {
    const reachable = step === "reveal"
      ? canEnter(state, step) || !revealUnlocked(state) // click opens consent
      : canEnter(state, step);
    const active = state.step === step ? " active" : "";
    const disabled = reachable ? "" : " disabled";
    return `<button class="nav-step${active}" data-action="goto" ` +
      `data-step="${step}"${disabled}>${STEP_TITLES[step]}</button>`;
  });
  return `<nav class="wizard-nav">${buttons.join("")}</nav>`;
}

export function renderUpload(state: WizardState): string {
  const n = state.project?.n_books ?? 0;
  return `
  <section class="step-upload">
    <h2>Upload your book ratings</h2>
    <p>Paste a ratings CSV (a Goodreads library export or
       <code>title,author,rating</code> rows on a 0-100 scale).</p>
    <textarea id="ratings-csv" rows="8" placeholder="title,author,rating"></textarea>
    <button data-action="upload-ratings">Upload</button>
    <p class="status">${n} rated items in the project.</p>
  </section>`;
}

export function renderAnnotate(state: WizardState): string {
  const p = state.project;
  const done = p ? p.n_records : 0;
  const total = p ? p.n_books : 0;
  return `
  <section class="step-annotate">
    <h2>Annotate the books</h2>
    <p>The research backend reads public sources and labels every book on the
       annotation schema. Already-annotated books are skipped.</p>
    <button data-action="run-annotation">Run annotation</button>
    <p class="status">${done} of ${total} books annotated.</p>
  </section>`;
}

export function renderExpect(state: WizardState): string {
  const dims = state.project?.dimensions ?? [];
  const editable = dims.filter((d) => d.group !== "journal_note");
  const rows = editable.map((d) => `
    <tr data-dimension="${esc(d.id)}">
      <td>${esc(d.label)}</td>
      <td>
        <select class="sign" data-dimension="${esc(d.id)}">
          <option value="0" selected>0</option>
          <option value="1">+</option>
          <option value="-1">&minus;</option>
        </select>
      </td>
      <td>
        <input class="band-lo" type="number" step="0.05" min="-0.5" max="0.5"
               placeholder="band lo" data-dimension="${esc(d.id)}">
        <input class="band-hi" type="number" step="0.05" min="-0.5" max="0.5"
               placeholder="band hi" data-dimension="${esc(d.id)}">
      </td>
    </tr>`);
  return `
  <section class="step-expect">
    <h2>What do you believe about your taste?</h2>
    <p>Record the direction you expect each dimension to push your enjoyment,
       before looking at the data. Bands are optional magnitude guesses in
       correlation units.</p>
    <table class="expectation-form"><thead>
      <tr><th>dimension</th><th>sign</th><th>band</th></tr>
    </thead><tbody>${rows.join("")}</tbody></table>
    <button data-action="submit-expectations">Submit expectations</button>
    <button data-action="skip-expectations" class="secondary">
      Skip (everything becomes post-hoc)</button>
  </section>`;
}

export function renderConsentDialog(): string {
  return `
  <div class="consent-dialog" role="dialog">
    <h3>Reveal without pre-registering?</h3>
    <p>You have not registered expectations. If you reveal the effects now,
       any expectations you record later will be permanently labeled
       post-hoc.</p>
    <button data-action="confirm-skip">Reveal anyway (post-hoc)</button>
    <button data-action="cancel-skip" class="secondary">Go back</button>
  </div>`;
}

export function renderReveal(state: WizardState, sortKey: SortKey = "r"): string {
  if (!state.effects) {
    return `
  <section class="step-reveal">
    <h2>Effects</h2>
    <button data-action="fetch-effects">Reveal the effect estimates</button>
    <p class="note">Revealing locks plain expectation registration on the
       server.</p>
  </section>`;
  }
  const rows = sortRows(
    toPlotRows(state.effects.effects, state.effects.expectations_post_hoc,
               state.project?.dimensions ?? []),
    sortKey);
  const postHoc = state.effects.expectations_post_hoc
    ? `<p class="post-hoc-banner">Expectations were registered post-hoc.</p>` : "";
  return `
  <section class="step-reveal">
    <h2>Enjoyment effects</h2>
    ${postHoc}
    <label>sort by
      <select data-action="sort-effects">
        <option value="r"${sortKey === "r" ? " selected" : ""}>effect size</option>
        <option value="surprise"${sortKey === "surprise" ? " selected" : ""}>surprise</option>
        <option value="n"${sortKey === "n" ? " selected" : ""}>book count</option>
      </select>
    </label>
    ${renderForestPlot(rows)}
    <div id="dimension-books"></div>
  </section>`;
}

export function renderDimensionBooks(payload: DimensionBooksPayload): string {
  const rows = payload.books.map((b) =>
    `<tr><td>${esc(b.title)}</td><td>${esc(b.author)}</td>` +
    `<td>${b.value}</td><td>${b.percentile ?? ""}</td></tr>`);
  return `
  <h3>Books behind ${esc(payload.dimension_id)}</h3>
  <table class="dimension-books"><thead>
    <tr><th>title</th><th>author</th><th>value</th><th>percentile</th></tr>
  </thead><tbody>${rows.join("")}</tbody></table>`;
}

export function renderCurate(state: WizardState): string {
  const dims = state.project?.dimensions ?? [];
  const excluded = new Set(state.pendingMask ?? state.project?.mask.excluded ?? []);
  const rows = dims
    .filter((d) => d.group !== "journal_note")
    .map((d) => `
    <li>
      <label>
        <input type="checkbox" data-action="toggle-dimension"
               data-dimension="${esc(d.id)}" ${excluded.has(d.id) ? "" : "checked"}>
        ${esc(d.label)}
      </label>
    </li>`);
  return `
  <section class="step-curate">
    <h2>Curate the annotation dimensions</h2>
    <p>Untick a dimension to exclude it from modeling and recommendations
       (stored annotations are untouched). If the save fails the toggle rolls
       back.</p>
    <ul class="curation-panel">${rows.join("")}</ul>
  </section>`;
}

function explanationBars(rec: RecommendationRow): string {
  const bars = rec.explanation.map((term) => {
    const width = Math.min(Math.abs(term.contribution) * 300, 140).toFixed(0);
    const side = term.contribution >= 0 ? "pos" : "neg";
    return `<div class="bar-row">
      <span class="bar-label">${esc(term.dimension_id)}</span>
      <span class="bar ${side}" style="width:${width}px"></span>
      <span class="bar-value">${term.contribution}</span>
    </div>`;
  });
  return `<div class="explanation">${bars.join("")}</div>`;
}

export function renderRecommend(state: WizardState): string {
  const payload = state.recommendations;
  let list = "";
  if (payload) {
    const rows = payload.recommendations.map((rec) => `
    <li class="recommendation" data-book="${esc(rec.book_id)}">
      <strong>#${rec.rank} ${esc(rec.title)}</strong>
      <span class="predicted">predicted percentile ${rec.predicted_percentile}</span>
      ${rec.informativeness !== null
        ? `<span class="informativeness">informativeness ${rec.informativeness}</span>` : ""}
      ${explanationBars(rec)}
      <label>hypothetical rating
        <input type="number" min="0" max="100" class="hypo-rating"
               data-book="${esc(rec.book_id)}" data-title="${esc(rec.title)}">
      </label>
      <button data-action="attach-hypothetical" data-book="${esc(rec.book_id)}"
              data-title="${esc(rec.title)}">Attach</button>
    </li>`);
    list = `
    <p class="model-meta">ranked by ${esc(payload.model.ranked_by)},
      explained by ${esc(payload.model.explained_by)};
      excluded: ${payload.model.excluded_dimensions.map(esc).join(", ") || "none"}</p>
    <ol class="recommendations">${rows.join("")}</ol>`;
  }
  return `
  <section class="step-recommend">
    <h2>Recommendations</h2>
    <p>Paste unread candidates (<code>title,author</code> CSV).</p>
    <textarea id="candidates-csv" rows="5" placeholder="title,author"></textarea>
    <button data-action="recommend">Rank by enjoyment</button>
    <button data-action="explore" class="secondary">Most informative</button>
    ${list}
  </section>`;
}

export function renderApp(state: WizardState, sortKey: SortKey = "r"): string {
  const body: Record<Step, () => string> = {
    upload: () => renderUpload(state),
    annotate_progress: () => renderAnnotate(state),
    expect: () => renderExpect(state),
    reveal: () => renderReveal(state, sortKey),
    curate: () => renderCurate(state),
    recommend: () => renderRecommend(state),
  };
  const error = state.error
    ? `<div class="error-banner">${esc(state.error)}</div>` : "";
  const consent = state.postHocConsentOpen ? renderConsentDialog() : "";
  return `${renderNav(state)}${error}${consent}` +
    `<main class="wizard-content">${body[state.step]()}</main>`;
}
