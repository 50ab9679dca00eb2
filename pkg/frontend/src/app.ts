/** Browser entry: wires the canvas, carousel, policy panel, and stage
 * controls to the service. Kept deliberately thin; every module it calls
 * is unit-tested headlessly.
 */

import { ApiClient } from "./api.js";
import {
  BADGE_SIZE,
  canvasToPng,
  renderNumberedImage,
  renderSomImage,
  type Draw2D,
} from "./annotate.js";
import {
  addDomainIcon,
  DOMAIN_ICONS,
  emptyDocument,
  toRawShapes,
  type CanvasDocument,
  type DomainIcon,
} from "./canvas-doc.js";
import { carouselCards, policyRows, rippleToast, splitEditMarker, splitUpdatedMarker } from "./panel.js";
import { applySketchEvents } from "./proposal.js";
import { showReasoning } from "./reasoning.js";
import { legalTargets, stageLabel } from "./stage.js";
import type { SessionView, Stage } from "./types.js";

interface AppElements {
  canvas: HTMLCanvasElement;
  toolbar: HTMLElement;
  stageControls: HTMLElement;
  carousel: HTMLElement;
  policyPanel: HTMLElement;
  status: HTMLElement;
}

export class App {
  private doc: CanvasDocument = emptyDocument();
  private view: SessionView | null = null;
  private reasoningCardId: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly el: AppElements,
  ) {}

  async start(scenario: string): Promise<void> {
    this.view = await this.api.createSession(scenario);
    this.renderAll();
  }

  private get sessionId(): string {
    if (!this.view) throw new Error("no session yet");
    return this.view.sessionId;
  }

  /** Icon palette: drag-free click-to-place scaffolding shapes. */
  buildToolbar(): void {
    for (const icon of DOMAIN_ICONS) {
      const button = document.createElement("button");
      button.textContent = icon;
      button.onclick = () => this.placeIcon(icon);
      this.el.toolbar.appendChild(button);
    }
  }

  private placeIcon(icon: DomainIcon): void {
    const n = this.doc.shapes.length;
    addDomainIcon(this.doc, icon, 80 + (n % 5) * 180, 80 + Math.floor(n / 5) * 140, icon);
    void this.pushSketch();
    this.drawCanvas();
  }

  private async pushSketch(): Promise<void> {
    await this.api.putSketch(this.sessionId, toRawShapes(this.doc));
  }

  private ctx(): Draw2D {
    const context = this.el.canvas.getContext("2d");
    if (!context) throw new Error("2d context unavailable");
    context.clearRect(0, 0, this.el.canvas.width, this.el.canvas.height);
    return context as unknown as Draw2D;
  }

  private drawCanvas(): void {
    const ctx = this.ctx();
    for (const shape of this.doc.shapes) {
      ctx.strokeStyle = "#222";
      ctx.lineWidth = 1.5;
      ctx.strokeRect(shape.x, shape.y, shape.width, shape.height);
      if (shape.text) {
        ctx.fillStyle = "#222";
        ctx.font = "14px sans-serif";
        ctx.fillText(shape.text, shape.x + 4, shape.y + shape.height / 2);
      }
    }
    if (this.reasoningCardId && this.view) {
      const entry = this.view.insights.find((e) => e.card.id === this.reasoningCardId);
      const card = entry?.card ?? this.view.vignettes.find((v) => v.id === this.reasoningCardId);
      if (card) {
        const reasoning = showReasoning(card, this.view.entities, this.doc, this.view.markMap);
        for (const highlight of reasoning.highlights) {
          ctx.strokeStyle = "#0184f6";
          ctx.lineWidth = 3;
          ctx.strokeRect(
            highlight.region.x - 4,
            highlight.region.y - 4,
            highlight.region.width + 8,
            highlight.region.height + 8,
          );
          ctx.fillStyle = "#0184f6";
          ctx.fillRect(highlight.region.x - 4, highlight.region.y - 4 - BADGE_SIZE, 150, BADGE_SIZE);
          ctx.fillStyle = "#fff";
          ctx.font = "12px sans-serif";
          ctx.fillText(
            `${highlight.role}: ${highlight.label}`,
            highlight.region.x,
            highlight.region.y - 9,
          );
        }
      }
    }
  }

  /** Two-request phase entry: identify with raw+numbered exports, advance
   * the stage, then (for analyze) upload the labeled image. */
  async enterStage(target: Stage): Promise<void> {
    const raw = await this.exportCanvas((ctx) => {
      renderNumberedImage(ctx, this.doc, []);
    });
    const numbered = await this.exportCanvas((ctx) => {
      renderNumberedImage(ctx, this.doc, this.view?.markMap ?? []);
    });
    await this.api.identify(this.sessionId, raw, numbered);
    this.view = await this.api.setStage(this.sessionId, target);
    if (target === "analyze") {
      const som = await this.exportCanvas((ctx) => {
        renderSomImage(ctx, this.doc, this.view?.entities ?? [], this.view?.markMap ?? []);
      });
      await this.api.analyze(this.sessionId, som);
      this.view = await this.api.getSession(this.sessionId);
    }
    this.renderAll();
  }

  private async exportCanvas(draw: (ctx: Draw2D) => void): Promise<Blob> {
    const scratch = document.createElement("canvas");
    scratch.width = this.el.canvas.width;
    scratch.height = this.el.canvas.height;
    const ctx = scratch.getContext("2d");
    if (!ctx) throw new Error("2d context unavailable");
    draw(ctx as unknown as Draw2D);
    return canvasToPng(scratch);
  }

  async submitPolicyEdit(policyNumber: string, field: string, value: string): Promise<void> {
    const summary = await this.api.patchPolicy(this.sessionId, policyNumber, field, value);
    this.el.status.textContent = rippleToast(summary);
    this.view = await this.api.getSession(this.sessionId);
    this.renderAll();
  }

  async answerCard(cardId: string, message: string): Promise<void> {
    const result = await this.api.clarify(this.sessionId, cardId, message);
    this.el.status.textContent = result.resolution?.chat ?? result.response;
    if (result.sketchProposal) {
      const lines = result.sketchProposal.proposedActions.join("; ");
      if (window.confirm(`Apply sketch update? ${lines}`)) {
        await this.api.sketchProposal(this.sessionId, true);
        if (result.sketchProposal.events) {
          applySketchEvents(this.doc, result.sketchProposal.events);
        }
      } else {
        await this.api.sketchProposal(this.sessionId, false);
      }
    }
    this.view = await this.api.getSession(this.sessionId);
    this.renderAll();
  }

  toggleReasoning(cardId: string): void {
    this.reasoningCardId = this.reasoningCardId === cardId ? null : cardId;
    this.drawCanvas();
  }

  private renderAll(): void {
    if (!this.view) return;
    this.renderStageControls();
    this.renderCarousel();
    this.renderPolicyPanel();
    this.drawCanvas();
  }

  private renderStageControls(): void {
    const view = this.view!;
    this.el.stageControls.replaceChildren();
    const current = document.createElement("span");
    current.textContent = `Stage: ${stageLabel(view.stage)}`;
    this.el.stageControls.appendChild(current);
    for (const target of legalTargets(view.stage)) {
      const button = document.createElement("button");
      button.textContent = `Go to ${stageLabel(target)}`;
      button.onclick = () => void this.enterStage(target);
      this.el.stageControls.appendChild(button);
    }
  }

  private renderCarousel(): void {
    const view = this.view!;
    this.el.carousel.replaceChildren();
    for (const item of carouselCards(view)) {
      const cardEl = document.createElement("div");
      cardEl.className = `card card-${item.kind}`;
      if (item.kind === "guidance") {
        cardEl.textContent = item.guidance.prompt;
      } else {
        const { text, updated } = splitUpdatedMarker(item.card.heading);
        const heading = document.createElement("h3");
        heading.textContent = text;
        if (updated) {
          const badge = document.createElement("mark");
          badge.textContent = "Updated";
          heading.appendChild(badge);
        }
        const body = document.createElement("p");
        const desc = splitEditMarker(item.card.description);
        body.textContent = desc.text;
        cardEl.append(heading, body);
        if (desc.editNote) {
          const note = document.createElement("small");
          note.textContent = desc.editNote;
          cardEl.appendChild(note);
        }
        if (item.card.expectedOutcome) {
          const outcome = document.createElement("strong");
          outcome.textContent = item.card.expectedOutcome;
          cardEl.appendChild(outcome);
        }
        const reason = document.createElement("button");
        reason.textContent = "Show reasoning";
        reason.onclick = () => this.toggleReasoning(item.card.id);
        cardEl.appendChild(reason);
        const clarify = document.createElement("button");
        clarify.textContent = "Clarify";
        clarify.onclick = () => {
          const message = window.prompt(item.card.heading) ?? "";
          if (message) void this.answerCard(item.card.id, message);
        };
        cardEl.appendChild(clarify);
        if (item.kind === "insight") {
          const accept = document.createElement("button");
          accept.textContent = item.lifecycle === "accepted" ? "Accepted" : "Accept";
          accept.onclick = () => void this.api.acceptInsight(this.sessionId, item.card.id);
          const dismiss = document.createElement("button");
          dismiss.textContent = "Dismiss";
          dismiss.onclick = () => void this.api.dismissInsight(this.sessionId, item.card.id);
          cardEl.append(accept, dismiss);
        }
      }
      this.el.carousel.appendChild(cardEl);
    }
  }

  private renderPolicyPanel(): void {
    const view = this.view!;
    this.el.policyPanel.replaceChildren();
    for (const row of policyRows(view.policies)) {
      const policyEl = document.createElement("div");
      policyEl.className = "policy-card";
      const title = document.createElement("h4");
      title.textContent = row.policyNumber;
      policyEl.appendChild(title);
      for (const field of row.fields) {
        const label = document.createElement("label");
        label.textContent = field.label;
        const input = document.createElement("input");
        input.value = field.value;
        input.onchange = () => void this.submitPolicyEdit(row.policyNumber, field.field, input.value);
        label.appendChild(input);
        policyEl.appendChild(label);
      }
      this.el.policyPanel.appendChild(policyEl);
    }
  }
}

export function mount(baseUrl: string, root: Document = document): App {
  const el: AppElements = {
    canvas: root.getElementById("sketch-canvas") as HTMLCanvasElement,
    toolbar: root.getElementById("toolbar")!,
    stageControls: root.getElementById("stage-controls")!,
    carousel: root.getElementById("carousel")!,
    policyPanel: root.getElementById("policy-panel")!,
    status: root.getElementById("status")!,
  };
  const app = new App(new ApiClient(baseUrl), el);
  app.buildToolbar();
  return app;
}
