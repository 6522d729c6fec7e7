/** DOM construction for every screen.
 *
 * Views are pure builders from payload + handlers to elements; the app
 * re-renders a screen whenever its state changes.  Test phases receive
 * no feedback affordances at all: the payload carries none and no
 * element here invents one.
 */

import { colorFor, textColorFor } from "./palette.js";
import type {
  BuilderState,
} from "./builder.js";
import { canSubmit } from "./builder.js";
import type {
  ColorJson,
  Feedback,
  ItemJson,
  NextPayload,
  ReferenceEntry,
} from "./types.js";

export interface BuilderHandlers {
  onAppend: (id: string) => void;
  onInsert: (id: string, index: number) => void;
  onRemove: (index: number) => void;
  onMove: (from: number, to: number) => void;
  onReset: () => void;
  onSubmit: () => void;
}

export interface DragChannel {
  source: { kind: "pool"; id: string } | { kind: "array"; index: number } | null;
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

export function symbolCircle(color: ColorJson, extraClass = ""): HTMLElement {
  const node = el("div", `symbol ${extraClass}`.trim());
  node.dataset.id = color.id;
  node.style.backgroundColor = colorFor(color.id);
  node.style.color = textColorFor(color.id);
  node.title = color.display_name;
  node.appendChild(el("span", "symbol-label", color.display_name));
  return node;
}

export function instructionLine(words: string[]): HTMLElement {
  const line = el("div", "instruction");
  for (const word of words) {
    line.appendChild(el("span", "word", word));
  }
  return line;
}

/** Pool + response array + reset/submit controls.
 *
 * Pool symbols append on click and drag into the array; array symbols
 * reorder by drag and leave on click.  A shared DragChannel carries the
 * drag source because tests (and some DOM shims) do not implement
 * DataTransfer.
 */
export function builderView(
  state: BuilderState,
  handlers: BuilderHandlers,
  drag: DragChannel,
): HTMLElement {
  const root = el("div", "builder");

  const pool = el("div", "pool");
  pool.dataset.testid = "pool";
  for (const color of state.pool) {
    const circle = symbolCircle(color, "pool-symbol");
    circle.draggable = true;
    circle.addEventListener("click", () => handlers.onAppend(color.id));
    circle.addEventListener("dragstart", () => {
      drag.source = { kind: "pool", id: color.id };
    });
    pool.appendChild(circle);
  }
  root.appendChild(pool);

  const array = el("div", "response-array");
  array.dataset.testid = "response-array";
  const dropAt = (index: number) => {
    const source = drag.source;
    drag.source = null;
    if (!source) return;
    if (source.kind === "pool") {
      handlers.onInsert(source.id, index);
    } else {
      handlers.onMove(source.index, index > source.index ? index - 1 : index);
    }
  };
  for (let i = 0; i <= state.array.length; i++) {
    const slot = el("div", "slot");
    slot.dataset.slot = String(i);
    slot.addEventListener("dragover", (e) => e.preventDefault());
    slot.addEventListener("drop", (e) => {
      e.preventDefault();
      dropAt(i);
    });
    array.appendChild(slot);
    const symbol = state.array[i];
    if (symbol) {
      const circle = symbolCircle(symbol, "array-symbol");
      circle.draggable = true;
      const index = i;
      circle.addEventListener("click", () => handlers.onRemove(index));
      circle.addEventListener("dragstart", () => {
        drag.source = { kind: "array", index };
      });
      array.appendChild(circle);
    }
  }
  root.appendChild(array);

  const controls = el("div", "controls");
  const reset = el("button", "reset", "Reset");
  reset.dataset.testid = "reset";
  reset.addEventListener("click", handlers.onReset);
  controls.appendChild(reset);

  const submit = el("button", "submit", "Submit");
  submit.dataset.testid = "submit";
  submit.addEventListener("click", handlers.onSubmit);
  controls.appendChild(submit);

  const warning = el("div", "submit-warning");
  warning.dataset.testid = "submit-warning";
  warning.hidden = true;
  warning.textContent = "Build a response before submitting.";
  controls.appendChild(warning);
  root.appendChild(controls);

  if (!canSubmit(state)) {
    submit.dataset.blocked = "1";
  }
  return root;
}

export function referencePanel(entries: ReferenceEntry[]): HTMLElement {
  const panel = el("div", "reference");
  panel.dataset.testid = "reference";
  panel.appendChild(el("h3", undefined, "Study items"));
  for (const entry of entries) {
    const card = el("div", entry.covered ? "ref-card covered" : "ref-card");
    card.dataset.itemId = entry.item_id;
    card.appendChild(instructionLine(entry.instruction));
    if (entry.covered || entry.target === null) {
      const mask = el("div", "covered-target", "? ? ?");
      mask.dataset.testid = "covered-target";
      card.appendChild(mask);
    } else {
      const target = el("div", "ref-target");
      for (const color of entry.target) {
        target.appendChild(symbolCircle(color, "ref-symbol"));
      }
      card.appendChild(target);
    }
    panel.appendChild(card);
  }
  return panel;
}

export function progressBar(payload: NextPayload): HTMLElement {
  const { completed, total } = payload.progress;
  const bar = el("div", "progress", `Progress: ${completed} / ${total}`);
  bar.dataset.testid = "progress";
  return bar;
}

export function feedbackView(
  feedback: Feedback,
  onContinue: () => void,
): HTMLElement {
  const root = el("div", "feedback");
  root.dataset.testid = "feedback";
  root.appendChild(
    el("p", feedback.correct ? "verdict ok" : "verdict wrong",
      feedback.correct ? "Correct!" : "Not quite. The answer was:"),
  );
  if (!feedback.correct) {
    const row = el("div", "expected");
    row.dataset.testid = "expected";
    for (const color of feedback.expected) {
      row.appendChild(symbolCircle(color, "ref-symbol"));
    }
    root.appendChild(row);
  }
  const next = el("button", "continue", "Continue");
  next.dataset.testid = "continue";
  next.addEventListener("click", onContinue);
  root.appendChild(next);
  return root;
}

export function instructionsIntro(payload: NextPayload): HTMLElement {
  const root = el("div", "intro");
  root.appendChild(el("h2", undefined, "How to answer"));
  root.appendChild(
    el(
      "p",
      undefined,
      "Instructions are made-up words; answers are sequences of colored " +
        "circles. Click a circle to add it, drag to reorder, and use " +
        "Reset to start over. Copy the sequence below to continue.",
    ),
  );
  const target = el("div", "practice-target");
  target.dataset.testid = "practice-target";
  for (const color of payload.practice_target ?? []) {
    target.appendChild(symbolCircle(color, "ref-symbol"));
  }
  root.appendChild(target);
  return root;
}

export function phaseHeading(payload: NextPayload): HTMLElement {
  const root = el("div", "phase-heading");
  const labels: Record<string, string> = {
    instructions: "Practice",
    "study-quiz": "Study quiz",
    test: "Your answer",
  };
  let text = labels[payload.phase] ?? payload.phase;
  if (payload.stage) text += ` - ${payload.stage}`;
  if (payload.cycle && payload.phase === "study-quiz") {
    text += ` (round ${payload.cycle})`;
  }
  root.appendChild(el("h2", undefined, text));
  return root;
}

export function itemPrompt(item: ItemJson): HTMLElement {
  const root = el("div", "item-prompt");
  root.dataset.testid = "item-prompt";
  root.dataset.itemId = item.item_id;
  if (item.instruction.length > 0) {
    root.appendChild(instructionLine(item.instruction));
  }
  return root;
}

export function banner(kind: string, message: string): HTMLElement {
  const node = el("div", `banner ${kind}`);
  node.dataset.testid = `banner-${kind}`;
  node.textContent = message;
  return node;
}

export function retryBanner(message: string, onRetry: () => void): HTMLElement {
  const node = el("div", "banner retry");
  node.dataset.testid = "banner-retry";
  node.appendChild(el("span", undefined, message));
  const button = el("button", "retry", "Retry");
  button.dataset.testid = "retry";
  button.addEventListener("click", onRetry);
  node.appendChild(button);
  return node;
}

export function surveyView(onAnswer: (aid: boolean) => void): HTMLElement {
  const root = el("div", "survey");
  root.dataset.testid = "survey";
  root.appendChild(el("h2", undefined, "One last question"));
  root.appendChild(
    el(
      "p",
      undefined,
      "Did you use any external aid (notes, another person, a program) " +
        "while answering?",
    ),
  );
  const yes = el("button", "survey-yes", "Yes");
  yes.dataset.testid = "survey-yes";
  yes.addEventListener("click", () => onAnswer(true));
  const no = el("button", "survey-no", "No");
  no.dataset.testid = "survey-no";
  no.addEventListener("click", () => onAnswer(false));
  root.appendChild(yes);
  root.appendChild(no);
  return root;
}

export function doneView(): HTMLElement {
  const root = el("div", "done");
  root.dataset.testid = "done";
  root.appendChild(el("h2", undefined, "All done"));
  root.appendChild(el("p", undefined, "Thank you for participating."));
  return root;
}

export function wordRoster(words: string[]): HTMLElement {
  const root = el("div", "roster");
  root.dataset.testid = "word-roster";
  root.appendChild(el("h3", undefined, "The words"));
  const line = el("div", "roster-words");
  for (const word of words) line.appendChild(el("span", "word", word));
  root.appendChild(line);
  return root;
}
