// The wizard's single feedback loop: upload -> annotate -> expect -> reveal
// -> curate -> recommend, with one hard rule enforced on the client AND the
// server independently: reveal is unreachable until expectations are
// submitted or explicitly skipped (skipping takes the post-hoc path).

import type { EffectsPayload, ProjectSummary, RecommendationPayload } from "./types.js";

export const STEPS = [
  "upload",
  "annotate_progress",
  "expect",
  "reveal",
  "curate",
  "recommend",
] as const;

export type Step = (typeof STEPS)[number];

export interface WizardState {
  step: Step;
  project: ProjectSummary | null;
  expectationsSubmitted: boolean;
  expectationsSkipped: boolean; // explicit skip: everything labeled post-hoc
  postHocConsentOpen: boolean;
  effects: EffectsPayload | null;
  recommendations: RecommendationPayload | null;
  pendingMask: string[] | null; // optimistic mask edit awaiting the server
  error: string | null;
}

export function initialState(): WizardState {
  return {
    step: "upload",
    project: null,
    expectationsSubmitted: false,
    expectationsSkipped: false,
    postHocConsentOpen: false,
    effects: null,
    recommendations: null,
    pendingMask: null,
    error: null,
  };
}

export function revealUnlocked(state: WizardState): boolean {
  return state.expectationsSubmitted || state.expectationsSkipped;
}

/** Whether the wizard may move to `target` from the current state. */
export function canEnter(state: WizardState, target: Step): boolean {
  switch (target) {
    case "upload":
      return true;
    case "annotate_progress":
      return (state.project?.n_books ?? 0) > 0;
    case "expect":
      return (state.project?.n_records ?? 0) > 0;
    case "reveal":
      return (state.project?.n_records ?? 0) > 0 && revealUnlocked(state);
    case "curate":
    case "recommend":
      return state.effects !== null;
  }
}

/**
 * Request a step change. Asking for reveal before expectations forces the
 * skip-confirmation dialog instead of navigating; nothing else changes.
 */
export function requestStep(state: WizardState, target: Step): WizardState {
  if (target === "reveal" && !revealUnlocked(state)) {
    return { ...state, postHocConsentOpen: true };
  }
  if (!canEnter(state, target)) {
    return state;
  }
  return { ...state, step: target, error: null };
}

export function expectationsStored(state: WizardState): WizardState {
  return {
    ...state,
    expectationsSubmitted: true,
    postHocConsentOpen: false,
    step: "reveal",
  };
}

/** The user explicitly skips pre-registration; the post-hoc path begins. */
export function skipExpectations(state: WizardState): WizardState {
  return {
    ...state,
    expectationsSkipped: true,
    postHocConsentOpen: false,
    step: "reveal",
  };
}

export function dismissConsent(state: WizardState): WizardState {
  return { ...state, postHocConsentOpen: false };
}

export function withProject(state: WizardState, project: ProjectSummary): WizardState {
  // Server state is authoritative: a registered set counts as submitted,
  // and a server-side lock without registration means reveal already
  // happened elsewhere, which is the post-hoc path.
  return {
    ...state,
    project,
    expectationsSubmitted: state.expectationsSubmitted || project.expectations_registered,
    expectationsSkipped:
      state.expectationsSkipped ||
      (project.expectations_locked && !project.expectations_registered),
  };
}

export function withEffects(state: WizardState, effects: EffectsPayload): WizardState {
  return { ...state, effects };
}

export function withRecommendations(state: WizardState,
                                    recommendations: RecommendationPayload): WizardState {
  return { ...state, recommendations };
}
