// DOM rendering. Pure functions of state plus a handlers object; main.ts
// calls render() after every state transition. Text content is always set
// via textContent, never innerHTML, so server strings render inert.

import type { UiQueryState } from "./state.js";
import type { LevelSelection, UiRecommendation } from "./types.js";
import { LEVEL_CHOICES } from "./types.js";

export interface Handlers {
  onQueryEdited(text: string): void;
  onLevelSelected(level: LevelSelection): void;
  onSubmit(): void;
  onCardClicked(courseId: string): void;
  onDetailClosed(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function render(root: HTMLElement, state: UiQueryState, handlers: Handlers): void {
  root.textContent = "";
  root.append(
    renderHeader(),
    renderForm(state, handlers),
    ...(state.errorBanner !== null ? [renderBanner(state.errorBanner)] : []),
    renderResults(state, handlers),
    ...(state.detail !== null ? [renderDetail(state, handlers)] : []),
  );
}

function renderHeader(): HTMLElement {
  const header = el("header", "header");
  header.append(el("h1", undefined, "compass"), el("p", "tagline", "Describe your interests; get ten grounded course recommendations."));
  return header;
}

function renderForm(state: UiQueryState, handlers: Handlers): HTMLElement {
  const form = el("form", "query-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSubmit();
  });

  const textarea = el("textarea", "query-input");
  textarea.id = "query-input";
  textarea.placeholder = "e.g. I am a math major interested in computer science theory. What courses should I take?";
  textarea.value = state.queryText;
  textarea.rows = 3;
  textarea.addEventListener("input", () => handlers.onQueryEdited(textarea.value));
  form.append(textarea);

  const controls = el("div", "controls");
  const levels = el("div", "level-control");
  levels.setAttribute("role", "group");
  levels.setAttribute("aria-label", "Course level filter");
  for (const choice of LEVEL_CHOICES) {
    const button = el("button", "level-option", choice);
    button.type = "button";
    button.dataset.level = choice;
    if (choice === state.levelSelection) button.classList.add("selected");
    button.setAttribute("aria-pressed", String(choice === state.levelSelection));
    button.addEventListener("click", () => handlers.onLevelSelected(choice));
    levels.append(button);
  }

  const submit = el("button", "submit", state.loading ? "Recommending..." : "Recommend");
  submit.type = "submit";
  submit.id = "submit";
  submit.disabled = state.loading || state.queryText.trim().length === 0;

  controls.append(levels, submit);
  form.append(controls);
  return form;
}

function renderBanner(message: string): HTMLElement {
  const banner = el("div", "banner", message);
  banner.setAttribute("role", "alert");
  return banner;
}

function renderResults(state: UiQueryState, handlers: Handlers): HTMLElement {
  const section = el("section", "results");
  if (state.lastResponse === null) {
    return section;
  }
  const timing = state.lastResponse.timing;
  section.append(
    el(
      "p",
      "timing",
      `retrieval ${timing.retrieval_ms.toFixed(0)} ms, total ${timing.total_ms.toFixed(0)} ms`,
    ),
  );
  const list = el("ol", "cards");
  for (const rec of state.recommendations) {
    list.append(renderCard(rec, handlers));
  }
  section.append(list);
  return section;
}

function renderCard(rec: UiRecommendation, handlers: Handlers): HTMLElement {
  const item = el("li", "card");
  const button = el("button", "card-button");
  button.type = "button";
  button.dataset.courseId = rec.courseId;
  button.addEventListener("click", () => handlers.onCardClicked(rec.courseId));

  const head = el("div", "card-head");
  head.append(el("span", "course-id", rec.courseId));
  // confidence is a text badge, not color alone
  const badge = el("span", `badge badge-${rec.confidence.toLowerCase()}`, rec.confidence);
  badge.setAttribute("aria-label", `confidence ${rec.confidence}`);
  head.append(badge);
  if (rec.similarityRank !== undefined) {
    head.append(el("span", "rank", `similarity rank #${rec.similarityRank}`));
  }

  button.append(head, el("p", "rationale", rec.rationale));
  item.append(button);
  return item;
}

function renderDetail(state: UiQueryState, handlers: Handlers): HTMLElement {
  const detail = state.detail!;
  const panel = el("aside", "detail-panel");
  panel.setAttribute("aria-label", "Course details");

  const close = el("button", "detail-close", "Close");
  close.type = "button";
  close.addEventListener("click", () => handlers.onDetailClosed());
  panel.append(close);

  if (detail.status === "loading") {
    panel.append(el("p", "detail-status", `Loading ${detail.courseId}...`));
  } else if (detail.status === "error") {
    panel.append(el("p", "detail-status detail-error", detail.message ?? "course details unavailable"));
  } else if (detail.course) {
    panel.append(
      el("h2", undefined, `${detail.course.course_id}: ${detail.course.title}`),
      el("p", "detail-meta", `${detail.course.subject}, ${detail.course.level}-level`),
      el("p", "detail-description", detail.course.description || "(no description; this course is described by its title)"),
    );
  }
  return panel;
}
