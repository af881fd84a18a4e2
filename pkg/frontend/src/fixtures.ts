// Canned payloads for the fixture server and the snapshot tests. These mirror
// the backend's documented JSON shapes exactly.

import type { DimensionInfo, EffectRow } from "./types.js";

export const FIXTURE_DIMENSIONS: DimensionInfo[] = [
  { id: "gr_avg_rating", label: "average public rating", group: "metadata", kind: "stars" },
  { id: "genre_fantasy", label: "genre: fantasy", group: "metadata", kind: "binary" },
  { id: "mention_addictive", label: "comments mention addictive content", group: "comment_mention", kind: "proportion" },
  { id: "theme_war", label: "theme: war", group: "theme", kind: "binary" },
  { id: "theme_academia", label: "theme: academia", group: "theme", kind: "binary" },
  { id: "mood_dark", label: "mood: dark", group: "mood", kind: "binary" },
  { id: "style_funny", label: "style: funny", group: "style", kind: "binary" },
  { id: "mc_senior", label: "main character: senior", group: "main_character", kind: "binary" },
  { id: "journal_dnf", label: "journal: did not finish", group: "journal_note", kind: "binary" },
];

export const FIXTURE_EFFECTS: EffectRow[] = [
  { dimension_id: "mention_addictive", r: 0.41, ci_lo: 0.22, ci_hi: 0.49,
    n_level: { n: 23 }, flag: "", expected_sign: 1, band_lo: 0.2, band_hi: 0.4 },
  { dimension_id: "mood_dark", r: 0.27, ci_lo: 0.08, ci_hi: 0.44,
    n_level: { "0": 12, "1": 11 }, flag: "", expected_sign: 1,
    band_lo: 0.05, band_hi: 0.25 },
  { dimension_id: "theme_war", r: 0.12, ci_lo: -0.09, ci_hi: 0.33,
    n_level: { "0": 15, "1": 8 }, flag: "", expected_sign: -1,
    band_lo: -0.3, band_hi: -0.1 },
  { dimension_id: "gr_avg_rating", r: 0.08, ci_lo: -0.13, ci_hi: 0.29,
    n_level: { n: 23 }, flag: "", expected_sign: 1, band_lo: null, band_hi: null },
  { dimension_id: "style_funny", r: -0.05, ci_lo: -0.27, ci_hi: 0.17,
    n_level: { "0": 16, "1": 7 }, flag: "", expected_sign: 0,
    band_lo: null, band_hi: null },
  { dimension_id: "theme_academia", r: -0.31, ci_lo: -0.46, ci_hi: -0.12,
    n_level: { "0": 17, "1": 6 }, flag: "", expected_sign: 1,
    band_lo: 0.1, band_hi: 0.3 },
  { dimension_id: "mc_senior", r: -0.18, ci_lo: -0.42, ci_hi: 0.09,
    n_level: { "0": 21, "1": 2 }, flag: "low_n", expected_sign: null,
    band_lo: null, band_hi: null },
  { dimension_id: "genre_fantasy", r: null, ci_lo: null, ci_hi: null,
    n_level: { "0": 23, "1": 0 }, flag: "inestimable,low_n", expected_sign: null,
    band_lo: null, band_hi: null },
];

export const FIXTURE_RECOMMENDATIONS = [
  {
    book_id: "cand-0001",
    title: "The Unwritten Coast",
    predicted_percentile: 0.78,
    rank: 1,
    explanation: [
      { dimension_id: "mention_addictive", contribution: 0.21 },
      { dimension_id: "mood_dark", contribution: 0.12 },
      { dimension_id: "theme_academia", contribution: -0.08 },
    ],
    mode: "enjoyment" as const,
    informativeness: null,
  },
  {
    book_id: "cand-0002",
    title: "Midnight Arithmetic",
    predicted_percentile: 0.61,
    rank: 2,
    explanation: [
      { dimension_id: "mood_dark", contribution: 0.1 },
      { dimension_id: "theme_war", contribution: -0.04 },
    ],
    mode: "enjoyment" as const,
    informativeness: null,
  },
];
