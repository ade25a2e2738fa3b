import { ApiClient, ApiError } from "./api.js";
import { canSubmit, initialState, reduce, type UiEvent, type UiQueryState } from "./state.js";
import { render, type Handlers } from "./view.js";
import type { LevelSelection } from "./types.js";

/** Wire the app into a root element. Returns helpers the tests drive. */
export function mount(root: HTMLElement, api: ApiClient = new ApiClient()) {
  let state: UiQueryState = initialState();

  function apply(event: UiEvent): void {
    state = reduce(state, event);
    render(root, state, handlers);
  }

  async function submit(): Promise<void> {
    if (!canSubmit(state)) return;
    const request = { query: state.queryText, levels: state.levelSelection };
    apply({ kind: "submit-started" });
    try {
      const response = await api.recommend(request);
      apply({ kind: "submit-succeeded", response });
    } catch (error) {
      const message = error instanceof ApiError ? error.message : "the recommendation service is unreachable";
      apply({ kind: "submit-failed", message });
    }
  }

  async function openDetail(courseId: string): Promise<void> {
    apply({ kind: "detail-opened", courseId });
    try {
      const course = await api.course(courseId);
      apply({ kind: "detail-loaded", course });
    } catch (error) {
      const message =
        error instanceof ApiError && error.status === 404
          ? "course details unavailable"
          : "could not load course details";
      apply({ kind: "detail-failed", courseId, message });
    }
  }

  const handlers: Handlers = {
    onQueryEdited: (text) => apply({ kind: "query-edited", text }),
    onLevelSelected: (level: LevelSelection) => apply({ kind: "level-selected", level }),
    onSubmit: () => void submit(),
    onCardClicked: (courseId) => void openDetail(courseId),
    onDetailClosed: () => apply({ kind: "detail-closed" }),
  };

  render(root, state, handlers);
  return {
    submit,
    openDetail,
    apply,
    getState: () => state,
  };
}

// Browser entry point; tests import mount() directly instead.
const rootElement = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootElement instanceof HTMLElement && !rootElement.dataset.testHarness) {
  mount(rootElement);
}
