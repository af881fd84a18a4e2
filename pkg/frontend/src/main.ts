// Browser bootstrap: one store, string-rendered views, event delegation.
// All state is authoritative on the server; the only optimistic update is
// the mask toggle, which rolls back if the save fails.

import { ApiFailure, Client } from "./api.js";
import { renderApp, renderDimensionBooks } from "./views.js";
import {
  dismissConsent,
  expectationsStored,
  initialState,
  requestStep,
  skipExpectations,
  withEffects,
  withProject,
  withRecommendations,
  type Step,
  type WizardState,
} from "./wizard.js";
import type { SortKey } from "./plot.js";
import type { ExpectationEntry } from "./types.js";

const client = new Client("");
let state: WizardState = initialState();
let sortKey: SortKey = "r";

function root(): HTMLElement {
  const el = document.getElementById("app");
  if (!el) throw new Error("missing #app element");
  return el;
}

function setState(next: WizardState): void {
  state = next;
  root().innerHTML = renderApp(state, sortKey);
}

async function refreshProject(): Promise<void> {
  setState(withProject(state, await client.project()));
}

function fail(err: unknown): void {
  const message = err instanceof ApiFailure ? err.message : String(err);
  setState({ ...state, error: message });
}

function collectExpectations(): Record<string, ExpectationEntry> {
  const out: Record<string, ExpectationEntry> = {};
  for (const select of document.querySelectorAll<HTMLSelectElement>("select.sign")) {
    const dim = select.dataset.dimension ?? "";
    const sign = Number(select.value) as -1 | 0 | 1;
    const lo = document.querySelector<HTMLInputElement>(
      `input.band-lo[data-dimension="${dim}"]`);
    const hi = document.querySelector<HTMLInputElement>(
      `input.band-hi[data-dimension="${dim}"]`);
    const band: [number, number] | null =
      lo?.value && hi?.value ? [Number(lo.value), Number(hi.value)] : null;
    out[dim] = { sign, band };
  }
  return out;
}

async function submitExpectations(postHoc: boolean): Promise<void> {
  try {
    await client.registerExpectations(collectExpectations(), postHoc);
    setState(expectationsStored(state));
    await refreshProject();
  } catch (err) {
    if (err instanceof ApiFailure && err.body.error === "ExpectationsLocked") {
      // Server-side lock beat us to it: surface the post-hoc consent path.
      setState({ ...state, postHocConsentOpen: true, error: err.message });
    } else {
      fail(err);
    }
  }
}

async function fetchEffects(): Promise<void> {
  try {
    setState(withEffects(state, await client.effects()));
    await refreshProject();
  } catch (err) {
    fail(err);
  }
}

async function toggleDimension(dim: string, include: boolean): Promise<void> {
  const before = state.project?.mask.excluded ?? [];
  const excluded = include
    ? before.filter((d) => d !== dim)
    : [...new Set([...before, dim])];
  setState({ ...state, pendingMask: excluded }); // optimistic
  try {
    await client.setMask(excluded, `mask-${Date.now()}`);
    setState({ ...state, pendingMask: null });
    await refreshProject();
  } catch (err) {
    setState({ ...state, pendingMask: null }); // roll back to server truth
    fail(err);
  }
}

async function runRecommend(explore: boolean): Promise<void> {
  const csv = (document.getElementById("candidates-csv") as HTMLTextAreaElement)?.value ?? "";
  try {
    const payload = explore
      ? await client.explore(csv)
      : await client.recommend(csv);
    setState(withRecommendations(state, payload));
  } catch (err) {
    fail(err);
  }
}

async function attachHypothetical(book: string, title: string): Promise<void> {
  const input = document.querySelector<HTMLInputElement>(
    `input.hypo-rating[data-book="${book}"]`);
  const rating = Number(input?.value ?? "");
  if (!input?.value || Number.isNaN(rating)) return;
  try {
    await client.uploadRatingRows(
      [{ title, author: "recommended", rating, hypothetical: true }],
      `hypo-${book}`);
    await refreshProject(); // cached model reports are now stale server-side
  } catch (err) {
    fail(err);
  }
}

async function handleAction(target: HTMLElement): Promise<void> {
  const action = target.dataset.action;
  switch (action) {
    case "goto":
      setState(requestStep(state, target.dataset.step as Step));
      break;
    case "upload-ratings": {
      const csv = (document.getElementById("ratings-csv") as HTMLTextAreaElement).value;
      try {
        await client.uploadRatingsCsv(csv);
        await refreshProject();
        setState(requestStep(state, "annotate_progress"));
      } catch (err) {
        fail(err);
      }
      break;
    }
    case "run-annotation":
      try {
        await client.annotate();
        await refreshProject();
        setState(requestStep(state, "expect"));
      } catch (err) {
        fail(err);
      }
      break;
    case "submit-expectations":
      await submitExpectations(false);
      break;
    case "skip-expectations":
      setState({ ...state, postHocConsentOpen: true });
      break;
    case "confirm-skip":
      setState(skipExpectations(state));
      break;
    case "cancel-skip":
      setState(dismissConsent(state));
      break;
    case "fetch-effects":
      await fetchEffects();
      break;
    case "toggle-dimension": {
      const box = target as HTMLInputElement;
      await toggleDimension(box.dataset.dimension ?? "", box.checked);
      break;
    }
    case "recommend":
      await runRecommend(false);
      break;
    case "explore":
      await runRecommend(true);
      break;
    case "attach-hypothetical":
      await attachHypothetical(target.dataset.book ?? "", target.dataset.title ?? "");
      break;
  }
}

export function mount(): void {
  root().addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (target && target.dataset.action !== "sort-effects"
        && target.dataset.action !== "toggle-dimension") {
      void handleAction(target);
    }
    const row = (event.target as HTMLElement).closest<SVGGElement>("g.plot-row");
    if (row) {
      void client.dimensionBooks(row.dataset.dimension ?? "").then((payload) => {
        const panel = document.getElementById("dimension-books");
        if (panel) panel.innerHTML = renderDimensionBooks(payload);
      });
    }
  });
  root().addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === "sort-effects") {
      sortKey = (target as HTMLSelectElement).value as SortKey;
      setState(state);
    } else if (target.dataset.action === "toggle-dimension") {
      void handleAction(target);
    }
  });
  setState(state);
  void refreshProject();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount();
}
