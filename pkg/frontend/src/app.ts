/** Screen controller: owns the session handle, the current builder
 * state, and the render loop.  One App instance drives one tab; the
 * session nonce lives in sessionStorage so a second tab starts its own
 * session instead of corrupting this one (the service 409s stale
 * nonces either way).
 */

import { ApiError, TransportError } from "./api.js";
import type { Api } from "./api.js";
import type { BuilderState } from "./builder.js";
import {
  append,
  canSubmit,
  createBuilder,
  insertAt,
  move,
  removeAt,
  reset,
  symbolIds,
} from "./builder.js";
import type { ItemJson, NextPayload } from "./types.js";
import * as views from "./views.js";

const STORAGE_KEY = "daxlab.session.v1";

interface SessionRef {
  sessionId: string;
  nonce: string;
}

export class App {
  private root: HTMLElement;
  private api: Api;
  private storage: Storage;
  private session: SessionRef | null = null;
  private builder: BuilderState | null = null;
  private payload: NextPayload | null = null;
  private busy = false;
  private drag: views.DragChannel = { source: null };
  // one builder per row on the single-page experiment
  private pageBuilders = new Map<string, BuilderState>();
  private reviewing = false;

  constructor(root: HTMLElement, api: Api, storage: Storage) {
    this.root = root;
    this.api = api;
    this.storage = storage;
  }

  async start(): Promise<void> {
    const stored = this.storage.getItem(STORAGE_KEY);
    if (stored) {
      try {
        this.session = JSON.parse(stored) as SessionRef;
        const payload = await this.api.nextItem(
          this.session.sessionId,
          this.session.nonce,
        );
        this.show(payload);
        return;
      } catch (err) {
        if (err instanceof TransportError) {
          this.renderRetry("Could not reach the server.", () => this.start());
          return;
        }
        this.storage.removeItem(STORAGE_KEY); // stale session; start over
        this.session = null;
      }
    }
    try {
      const created = await this.api.createSession();
      this.session = { sessionId: created.session_id, nonce: created.nonce };
      this.storage.setItem(STORAGE_KEY, JSON.stringify(this.session));
      this.show(created.next);
    } catch (err) {
      if (err instanceof TransportError) {
        this.renderRetry("Could not reach the server.", () => this.start());
        return;
      }
      this.renderFatal(`Could not start a session: ${String(err)}`);
    }
  }

  /** The payload currently on screen (tests peek at it). */
  current(): NextPayload | null {
    return this.payload;
  }

  private show(payload: NextPayload): void {
    if (!isUsable(payload)) {
      this.root.replaceChildren(
        views.banner("schema", "Unexpected server payload; please reload."),
      );
      return;
    }
    this.payload = payload;
    this.busy = false;
    if (payload.status === "done") {
      this.pageBuilders.clear();
      if (payload.survey_pending) {
        this.renderSurvey();
      } else {
        this.root.replaceChildren(views.doneView());
      }
      return;
    }
    if (payload.page_items && payload.word_roster) {
      this.renderPage(payload);
      return;
    }
    this.builder = createBuilder(payload.item!.pool);
    this.renderItem(payload);
  }

  // -- single-item screens

  private renderItem(payload: NextPayload): void {
    const parts: HTMLElement[] = [];
    parts.push(views.phaseHeading(payload));
    if (payload.phase === "instructions") {
      parts.push(views.instructionsIntro(payload));
    }
    if (payload.reference) {
      parts.push(views.referencePanel(payload.reference));
    }
    parts.push(views.itemPrompt(payload.item!));
    parts.push(
      views.builderView(this.builder!, this.handlers(), this.drag),
    );
    if (payload.phase === "test") {
      parts.push(views.progressBar(payload));
    }
    this.root.replaceChildren(...parts);
  }

  private handlers(): views.BuilderHandlers {
    return {
      onAppend: (id) => this.mutate((s) => append(s, id)),
      onInsert: (id, index) => this.mutate((s) => insertAt(s, id, index)),
      onRemove: (index) => this.mutate((s) => removeAt(s, index)),
      onMove: (from, to) => this.mutate((s) => move(s, from, to)),
      onReset: () => this.mutate(reset),
      onSubmit: () => void this.submitCurrent(),
    };
  }

  private mutate(fn: (s: BuilderState) => BuilderState): void {
    if (this.busy || !this.builder || !this.payload) return;
    this.builder = fn(this.builder);
    this.renderItem(this.payload);
  }

  private async submitCurrent(): Promise<void> {
    if (this.busy || !this.builder || !this.payload || !this.session) return;
    if (!canSubmit(this.builder)) {
      const warning = this.root.querySelector<HTMLElement>(
        '[data-testid="submit-warning"]',
      );
      if (warning) warning.hidden = false;
      return;
    }
    this.busy = true;
    try {
      const ack = await this.api.submitResponse(
        this.session.sessionId,
        this.payload.item!.item_id,
        symbolIds(this.builder),
        this.session.nonce,
      );
      if (ack.feedback) {
        const feedback = ack.feedback;
        this.root.replaceChildren(
          views.feedbackView(feedback, () => void this.advance()),
        );
      } else {
        await this.advance();
      }
    } catch (err) {
      this.busy = false;
      this.handleSubmitError(err, () => void this.submitCurrent());
    }
  }

  private async advance(): Promise<void> {
    if (!this.session) return;
    try {
      const payload = await this.api.nextItem(
        this.session.sessionId,
        this.session.nonce,
      );
      this.show(payload);
    } catch (err) {
      this.handleSubmitError(err, () => void this.advance());
    }
  }

  // -- single-page (free-form) screen

  private renderPage(payload: NextPayload): void {
    const items = payload.page_items!;
    for (const item of items) {
      if (!this.pageBuilders.has(item.item_id)) {
        this.pageBuilders.set(item.item_id, createBuilder(item.pool));
      }
    }
    if (this.reviewing) {
      this.renderSummary(payload);
      return;
    }
    const parts: HTMLElement[] = [];
    parts.push(views.phaseHeading(payload));
    parts.push(views.wordRoster(payload.word_roster!));
    const pending = payload.item!.item_id;
    const pendingIndex = items.findIndex((it) => it.item_id === pending);
    const page = document.createElement("div");
    page.className = "page";
    page.dataset.testid = "page";
    items.forEach((item, index) => {
      const row = document.createElement("div");
      row.className = "page-row";
      row.dataset.itemId = item.item_id;
      row.appendChild(views.itemPrompt(item));
      if (index < pendingIndex) {
        const note = document.createElement("p");
        note.textContent = "Already submitted.";
        row.appendChild(note);
      } else {
        row.appendChild(
          views.builderView(
            this.pageBuilders.get(item.item_id)!,
            this.pageHandlers(item),
            this.drag,
          ),
        );
      }
      page.appendChild(row);
    });
    parts.push(page);

    const review = document.createElement("button");
    review.textContent = "Review answers";
    review.dataset.testid = "review";
    review.addEventListener("click", () => {
      if (!this.pageComplete(payload)) {
        this.root
          .querySelectorAll<HTMLElement>('[data-testid="submit-warning"]')
          .forEach((w) => (w.hidden = false));
        return;
      }
      this.reviewing = true;
      this.renderPage(payload);
    });
    parts.push(review);
    this.root.replaceChildren(...parts);
  }

  private pageHandlers(item: ItemJson): views.BuilderHandlers {
    const update = (fn: (s: BuilderState) => BuilderState) => {
      if (this.busy || !this.payload) return;
      const state = this.pageBuilders.get(item.item_id)!;
      this.pageBuilders.set(item.item_id, fn(state));
      this.renderPage(this.payload);
    };
    return {
      onAppend: (id) => update((s) => append(s, id)),
      onInsert: (id, index) => update((s) => insertAt(s, id, index)),
      onRemove: (index) => update((s) => removeAt(s, index)),
      onMove: (from, to) => update((s) => move(s, from, to)),
      onReset: () => update(reset),
      // per-row submit does not exist: the page submits after approval
      onSubmit: () => {},
    };
  }

  private pageComplete(payload: NextPayload): boolean {
    const items = payload.page_items!;
    const pendingIndex = items.findIndex(
      (it) => it.item_id === payload.item!.item_id,
    );
    return items.every(
      (item, index) =>
        index < pendingIndex ||
        canSubmit(this.pageBuilders.get(item.item_id)!),
    );
  }

  private renderSummary(payload: NextPayload): void {
    const items = payload.page_items!;
    const pendingIndex = items.findIndex(
      (it) => it.item_id === payload.item!.item_id,
    );
    const root = document.createElement("div");
    root.className = "summary";
    root.dataset.testid = "summary";
    const heading = document.createElement("h2");
    heading.textContent = "Check your answers";
    root.appendChild(heading);
    items.forEach((item, index) => {
      if (index < pendingIndex) return;
      const row = document.createElement("div");
      row.className = "summary-row";
      row.dataset.itemId = item.item_id;
      row.appendChild(views.instructionLine(item.instruction));
      const answer = document.createElement("div");
      answer.className = "summary-answer";
      for (const color of this.pageBuilders.get(item.item_id)!.array) {
        answer.appendChild(views.symbolCircle(color, "ref-symbol"));
      }
      row.appendChild(answer);
      root.appendChild(row);
    });

    const back = document.createElement("button");
    back.textContent = "Back to editing";
    back.dataset.testid = "back-to-edit";
    back.addEventListener("click", () => {
      this.reviewing = false;
      this.renderPage(payload);
    });
    root.appendChild(back);

    const approve = document.createElement("button");
    approve.textContent = "Approve and submit";
    approve.dataset.testid = "approve";
    approve.addEventListener("click", () => void this.submitPage(payload));
    root.appendChild(approve);
    this.root.replaceChildren(root);
  }

  private async submitPage(payload: NextPayload): Promise<void> {
    if (this.busy || !this.session) return;
    this.busy = true;
    const items = payload.page_items!;
    const start = items.findIndex(
      (it) => it.item_id === payload.item!.item_id,
    );
    try {
      for (let i = Math.max(start, 0); i < items.length; i++) {
        const item = items[i]!;
        await this.api.submitResponse(
          this.session.sessionId,
          item.item_id,
          symbolIds(this.pageBuilders.get(item.item_id)!),
          this.session.nonce,
        );
      }
      this.reviewing = false;
      await this.advance();
    } catch (err) {
      this.busy = false;
      // a mid-page failure resumes from the first unanswered row: the
      // retry re-reads the pending item from the server
      this.handleSubmitError(err, () => void this.resumePage());
    }
  }

  private async resumePage(): Promise<void> {
    if (!this.session) return;
    try {
      const payload = await this.api.nextItem(
        this.session.sessionId,
        this.session.nonce,
      );
      if (payload.status === "item" && payload.page_items) {
        this.reviewing = true;
        this.payload = payload;
        void this.submitPage(payload);
      } else {
        this.show(payload);
      }
    } catch (err) {
      this.handleSubmitError(err, () => void this.resumePage());
    }
  }

  // -- done / survey

  private renderSurvey(): void {
    this.root.replaceChildren(
      views.surveyView((aid) => void this.answerSurvey(aid)),
    );
  }

  private async answerSurvey(aid: boolean): Promise<void> {
    if (!this.session) return;
    try {
      await this.api.submitSurvey(
        this.session.sessionId,
        aid,
        this.session.nonce,
      );
      this.root.replaceChildren(views.doneView());
    } catch (err) {
      if (err instanceof ApiError && err.code === "OutOfOrder") {
        this.root.replaceChildren(views.doneView());
        return;
      }
      this.handleSubmitError(err, () => void this.answerSurvey(aid));
    }
  }

  // -- errors

  private handleSubmitError(err: unknown, retry: () => void): void {
    if (err instanceof TransportError) {
      this.renderRetry("The answer was not delivered.", retry);
      return;
    }
    if (err instanceof ApiError) {
      if (err.code === "NonceMismatch") {
        this.renderFatal(
          "This session is open in another tab. Close this one.",
        );
        return;
      }
      if (err.code === "OutOfOrder") {
        void this.advance(); // resync with the server's view
        return;
      }
      this.renderFatal(`The server rejected the request: ${err.message}`);
      return;
    }
    this.renderFatal(String(err));
  }

  private renderRetry(message: string, retry: () => void): void {
    const existing = this.root.querySelector('[data-testid="banner-retry"]');
    if (existing) existing.remove();
    this.root.prepend(views.retryBanner(message, retry));
  }

  private renderFatal(message: string): void {
    this.root.replaceChildren(views.banner("fatal", message));
  }
}

function isUsable(payload: NextPayload): boolean {
  if (typeof payload !== "object" || payload === null) return false;
  if (payload.status === "done") return true;
  if (payload.status !== "item" || !payload.item) return false;
  return Array.isArray(payload.item.pool) && payload.item.pool.length > 0;
}
