// UI state machine. All transitions are pure so the query/result/refine loop
// is testable without a DOM; main.ts applies events and re-renders.

import type { CourseDetail, LevelSelection, RecommendResponse, UiRecommendation } from "./types.js";
import { toUiRecommendations } from "./types.js";

export interface DetailPanel {
  courseId: string;
  status: "loading" | "loaded" | "error";
  course?: CourseDetail;
  message?: string;
}

export interface UiQueryState {
  queryText: string;
  levelSelection: LevelSelection;
  loading: boolean;
  lastResponse: RecommendResponse | null;
  recommendations: UiRecommendation[];
  errorBanner: string | null;
  detail: DetailPanel | null;
}

export type UiEvent =
  | { kind: "query-edited"; text: string }
  | { kind: "level-selected"; level: LevelSelection }
  | { kind: "submit-started" }
  | { kind: "submit-succeeded"; response: RecommendResponse }
  | { kind: "submit-failed"; message: string }
  | { kind: "detail-opened"; courseId: string }
  | { kind: "detail-loaded"; course: CourseDetail }
  | { kind: "detail-failed"; courseId: string; message: string }
  | { kind: "detail-closed" };

export function initialState(): UiQueryState {
  return {
    queryText: "",
    levelSelection: "all",
    loading: false,
    lastResponse: null,
    recommendations: [],
    errorBanner: null,
    detail: null,
  };
}

/** Submit is allowed only when idle with a non-empty query (one in-flight request per tab). */
export function canSubmit(state: UiQueryState): boolean {
  return !state.loading && state.queryText.trim().length > 0;
}

export function reduce(state: UiQueryState, event: UiEvent): UiQueryState {
  switch (event.kind) {
    case "query-edited":
      return { ...state, queryText: event.text };
    case "level-selected":
      return { ...state, levelSelection: event.level };
    case "submit-started":
      if (!canSubmit(state)) return state;
      // a new query closes the detail panel; the previous list stays visible
      // until the response replaces it
      return { ...state, loading: true, errorBanner: null, detail: null };
    case "submit-succeeded":
      return {
        ...state,
        loading: false,
        errorBanner: null,
        lastResponse: event.response,
        recommendations: toUiRecommendations(event.response),
      };
    case "submit-failed":
      // keep query text and prior results so the user can retry in place
      return { ...state, loading: false, errorBanner: event.message };
    case "detail-opened":
      return { ...state, detail: { courseId: event.courseId, status: "loading" } };
    case "detail-loaded":
      if (state.detail === null || state.detail.courseId !== event.course.course_id) return state;
      return { ...state, detail: { courseId: event.course.course_id, status: "loaded", course: event.course } };
    case "detail-failed":
      if (state.detail === null || state.detail.courseId !== event.courseId) return state;
      return { ...state, detail: { courseId: event.courseId, status: "error", message: event.message } };
    case "detail-closed":
      return { ...state, detail: null };
  }
}
