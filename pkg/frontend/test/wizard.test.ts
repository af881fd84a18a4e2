import { describe, expect, it } from "vitest";

import {
  canEnter,
  dismissConsent,
  expectationsStored,
  initialState,
  requestStep,
  revealUnlocked,
  skipExpectations,
  withProject,
} from "../src/wizard.js";
import type { ProjectSummary } from "../src/types.js";

function project(overrides: Partial<ProjectSummary> = {}): ProjectSummary {
  return {
    schema_version: 1,
    n_books: 10,
    n_records: 10,
    expectations_locked: false,
    expectations_registered: false,
    expectations_post_hoc: false,
    mask: { excluded: [] },
    n_events: 0,
    dimensions: [],
    ...overrides,
  };
}

describe("wizard ordering", () => {
  it("reveal is unreachable before expectations are submitted or skipped", () => {
    const state = withProject(initialState(), project());
    expect(canEnter(state, "reveal")).toBe(false);
    const after = requestStep(state, "reveal");
    expect(after.step).toBe("upload"); // navigation refused
    expect(after.postHocConsentOpen).toBe(true); // consent dialog forced
  });

  it("submitting expectations unlocks reveal", () => {
    let state = withProject(initialState(), project());
    state = expectationsStored(state);
    expect(revealUnlocked(state)).toBe(true);
    expect(state.step).toBe("reveal");
  });

  it("explicit skip unlocks reveal on the post-hoc path", () => {
    let state = withProject(initialState(), project());
    state = requestStep(state, "reveal");
    expect(state.postHocConsentOpen).toBe(true);
    state = skipExpectations(state);
    expect(state.step).toBe("reveal");
    expect(state.expectationsSkipped).toBe(true);
  });

  it("cancelling the consent dialog goes back without unlocking", () => {
    let state = withProject(initialState(), project());
    state = requestStep(state, "reveal");
    state = dismissConsent(state);
    expect(state.postHocConsentOpen).toBe(false);
    expect(canEnter(state, "reveal")).toBe(false);
  });

  it("annotate and expect steps require server progress", () => {
    const empty = withProject(initialState(), project({ n_books: 0, n_records: 0 }));
    expect(canEnter(empty, "annotate_progress")).toBe(false);
    expect(canEnter(empty, "expect")).toBe(false);
    const rated = withProject(initialState(), project({ n_records: 0 }));
    expect(canEnter(rated, "annotate_progress")).toBe(true);
    expect(canEnter(rated, "expect")).toBe(false);
  });

  it("server snapshot is authoritative for the lock state", () => {
    const registered = withProject(initialState(),
                                   project({ expectations_registered: true }));
    expect(revealUnlocked(registered)).toBe(true);

    const lockedElsewhere = withProject(initialState(),
                                        project({ expectations_locked: true }));
    expect(lockedElsewhere.expectationsSkipped).toBe(true); // post-hoc path
  });

  it("curate and recommend require revealed effects", () => {
    let state = withProject(initialState(), project());
    expect(canEnter(state, "curate")).toBe(false);
    state = { ...state, effects: { expectations_post_hoc: false, effects: [] } };
    expect(canEnter(state, "curate")).toBe(true);
    expect(canEnter(state, "recommend")).toBe(true);
  });
});
