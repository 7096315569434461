/** <qafact-annotator>: embeddable two-pane annotation interface.
 *
 * Step 1 marks answer spans covered / not covered; a not-covered span
 * greys out every dependent QA with an "auto: unsupported (extrinsic)"
 * badge. Step 2 walks predicates one at a time and labels their QAs with
 * thumbs up / thumbs down. Submit stays disabled until every accepted QA
 * carries a label; a server version conflict shows a refresh banner and
 * freezes writes. A side-by-side 1-5 comparison mode activates when the
 * bootstrap names a pair instead of a record.
 *
 * Keyboard: ArrowLeft / ArrowRight switch predicates; 1..9 select a QA of
 * the active predicate; S labels it supported, U not-supported.
 */

import { LitElement, css, html, nothing } from "lit";

import { ServiceClient, type FetchLike } from "./api.js";
import { SyncEngine } from "./queue.js";
import {
  AUTO_BADGE,
  answerSpans,
  applyPending,
  predicateGroups,
  qaControls,
  spanKey,
  submitEnabled,
  type QAControl,
} from "./state.js";
import type {
  Bootstrap,
  Decomposition,
  Instance,
  Label,
  Verdict,
} from "./types.js";

export class QafactAnnotator extends LitElement {
  static override properties = {
    bootstrap: { type: Object },
    activePredicate: { state: true },
    activeQA: { state: true },
    phase: { state: true },
    sbsValue: { state: true },
    loadError: { state: true },
  };

  bootstrap?: Bootstrap;
  /** Test seam: injected transport for the scripted mock service. */
  fetchLike?: FetchLike;

  private client?: ServiceClient;
  private engine?: SyncEngine;
  private instance?: Instance;
  private decomposition?: Decomposition;
  private loadPromise?: Promise<void>;
  private lastAction?: Promise<unknown>;

  activePredicate = 0;
  activeQA = 0;
  phase: "loading" | "spans" | "qas" | "sbs" | "error" = "loading";
  sbsValue: number | null = null;
  loadError = "";

  static override styles = css`
    :host {
      display: block;
      font-family: system-ui, sans-serif;
      color: #1c1c1c;
    }
    .banner {
      background: #b33;
      color: white;
      padding: 0.6em 1em;
      display: flex;
      justify-content: space-between;
      align-items: center;
    }
    .panes {
      display: flex;
      gap: 1em;
    }
    .pane {
      flex: 1;
      border: 1px solid #ccc;
      border-radius: 4px;
      padding: 0.8em;
      max-height: 24em;
      overflow-y: auto;
      white-space: pre-wrap;
    }
    mark.predicate {
      background: #ffd54d;
      font-weight: 600;
    }
    .span-chip {
      display: inline-block;
      margin: 0.2em;
      padding: 0.25em 0.6em;
      border: 1px solid #888;
      border-radius: 1em;
      cursor: pointer;
    }
    .span-chip.not-covered {
      background: #f3c1c1;
      text-decoration: line-through;
    }
    .span-chip.covered {
      background: #c9e7c9;
    }
    .qa-row {
      border: 1px solid #ddd;
      border-radius: 4px;
      margin: 0.4em 0;
      padding: 0.5em;
    }
    .qa-row.greyed {
      opacity: 0.45;
      background: #eee;
    }
    .qa-row.active {
      border-color: #4466cc;
    }
    .badge {
      font-size: 0.8em;
      background: #999;
      color: white;
      border-radius: 3px;
      padding: 0.1em 0.4em;
      margin-left: 0.5em;
    }
    .hint {
      font-size: 0.85em;
      color: #555;
      font-style: italic;
    }
    button.thumb {
      font-size: 1.1em;
      margin-right: 0.3em;
    }
    button.thumb.selected-up {
      outline: 2px solid #2a7;
    }
    button.thumb.selected-down {
      outline: 2px solid #b33;
    }
    .likert button {
      font-size: 1.1em;
      margin: 0.2em;
    }
    .likert button.selected {
      outline: 2px solid #4466cc;
    }
  `;

  override connectedCallback(): void {
    super.connectedCallback();
    const blob = this.getAttribute("bootstrap");
    if (!this.bootstrap && blob) {
      this.bootstrap = JSON.parse(blob) as Bootstrap;
    }
    this.loadPromise = this.load();
    this.addEventListener("keydown", this.onKeydown);
  }

  override disconnectedCallback(): void {
    this.removeEventListener("keydown", this.onKeydown);
    super.disconnectedCallback();
  }

  private async load(): Promise<void> {
    if (!this.bootstrap) return;
    this.client = new ServiceClient(this.bootstrap, this.fetchLike);
    if (this.bootstrap.sbsPairId) {
      this.phase = "sbs";
      return;
    }
    if (!this.bootstrap.recordId) {
      this.phase = "error";
      this.loadError = "bootstrap needs recordId or sbsPairId";
      return;
    }
    const record = await this.client.getRecord(this.bootstrap.recordId);
    if (!record.ok || record.body === null) {
      this.phase = "error";
      this.loadError = record.errorDetail ?? `HTTP ${record.status}`;
      return;
    }
    const view = await this.client.getInstance(record.body.instance_id);
    if (!view.ok || view.body === null || view.body.decomposition === null) {
      this.phase = "error";
      this.loadError = "instance or decomposition unavailable";
      return;
    }
    this.instance = view.body.instance;
    this.decomposition = view.body.decomposition;
    this.engine = new SyncEngine(this.client, record.body, () =>
      this.requestUpdate(),
    );
    this.phase = record.body.state === "spans-in-progress" ? "spans" : "qas";
    this.requestUpdate();
  }

  /** Await initial load and drain the queue; tests use this to reach
   * quiescence. */
  async settled(): Promise<void> {
    await this.loadPromise;
    await this.lastAction;
    await this.engine?.settle();
    await this.updateComplete;
  }

  private controls(): QAControl[] {
    if (!this.engine || !this.decomposition) return [];
    return qaControls(
      this.decomposition,
      applyPending(this.engine.record, this.engine.pending),
    );
  }

  private onKeydown = (event: KeyboardEvent): void => {
    if (this.phase !== "qas" || !this.decomposition) return;
    const groups = predicateGroups(this.decomposition);
    if (event.key === "ArrowRight") {
      this.activePredicate = Math.min(
        this.activePredicate + 1,
        groups.length - 1,
      );
      this.activeQA = 0;
    } else if (event.key === "ArrowLeft") {
      this.activePredicate = Math.max(this.activePredicate - 1, 0);
      this.activeQA = 0;
    } else if (/^[1-9]$/.test(event.key)) {
      this.activeQA = Number(event.key) - 1;
    } else if (event.key === "s" || event.key === "S") {
      this.labelActive("supported");
    } else if (event.key === "u" || event.key === "U") {
      this.labelActive("not-supported");
    }
  };

  private labelActive(label: Label): void {
    const groups = predicateGroups(this.decomposition!);
    const group = groups[this.activePredicate];
    if (!group) return;
    const qaId = group.qaIds[this.activeQA];
    if (!qaId) return;
    const control = this.controls().find((c) => c.qaId === qaId);
    if (!control || control.state === "greyed") return;
    this.engine!.enqueue({ kind: "qa", qaId, label });
  }

  private toggleSpan(
    surface: string,
    range: [number, number] | null,
    current: Verdict,
  ): void {
    const verdict: Verdict =
      current === "covered" ? "not-covered" : "covered";
    this.engine!.enqueue({
      kind: "span",
      span: { answer_surface: surface, char_range: range, verdict },
    });
  }

  private labelQA(qaId: string, label: Label, note?: string): void {
    this.engine!.enqueue({ kind: "qa", qaId, label, note });
  }

  private onSubmit(): void {
    this.lastAction = this.engine!.submit();
  }

  private renderConflictBanner() {
    if (!this.engine?.conflict) return nothing;
    return html`
      <div class="banner conflict-banner" role="alert">
        <span>
          The server has newer changes for this record. Reload to continue;
          nothing was overwritten.
        </span>
        <button @click=${() => globalThis.location?.reload?.()}>Reload</button>
      </div>
    `;
  }

  private renderGeneration() {
    const generation = this.instance!.generation;
    if (this.phase !== "qas" || !this.decomposition) {
      return html`${generation}`;
    }
    const groups = predicateGroups(this.decomposition);
    const group = groups[this.activePredicate];
    if (!group) return html`${generation}`;
    const [start, end] = group.range;
    return html`${generation.slice(0, start)}<mark class="predicate"
        >${generation.slice(start, end)}</mark
      >${generation.slice(end)}`;
  }

  private renderSpanStep() {
    const effective = applyPending(this.engine!.record, this.engine!.pending);
    const spans = answerSpans(this.decomposition!);
    return html`
      <h3>Step 1: mark each answer span covered or not covered</h3>
      <div class="span-list">
        ${spans.map((span) => {
          const verdict =
            effective.verdicts.get(spanKey(span.surface, span.range)) ??
            "covered";
          return html`<span
            class="span-chip ${verdict}"
            data-key=${span.key}
            @click=${() => this.toggleSpan(span.surface, span.range, verdict)}
            >${span.surface}</span
          >`;
        })}
      </div>
      <button class="to-qas" @click=${() => (this.phase = "qas")}>
        Continue to QA verification
      </button>
    `;
  }

  private renderQARow(control: QAControl, index: number) {
    const activeId = predicateGroups(this.decomposition!)[
      this.activePredicate
    ]?.qaIds[this.activeQA];
    const classes = [
      "qa-row",
      control.state === "greyed" ? "greyed" : "",
      control.qaId === activeId ? "active" : "",
    ].join(" ");
    const disabled = control.state === "greyed";
    return html`
      <div class=${classes} data-qa-id=${control.qaId}>
        <div>
          <strong>${control.question}</strong> ${control.answersText}
          ${control.badge
            ? html`<span class="badge">${control.badge}</span>`
            : nothing}
        </div>
        ${control.hint
          ? html`<div class="hint">Think: "${control.hint}"</div>`
          : nothing}
        <div>
          <button
            class="thumb up ${control.label === "supported" &&
            control.provenance === "manual"
              ? "selected-up"
              : ""}"
            title="supported (S)"
            ?disabled=${disabled}
            @click=${() => {
              this.activeQA = index;
              this.labelQA(control.qaId, "supported", control.note);
            }}
          >
            &#128077;
          </button>
          <button
            class="thumb down ${control.label === "not-supported" &&
            control.provenance === "manual"
              ? "selected-down"
              : ""}"
            title="not supported (U)"
            ?disabled=${disabled}
            @click=${() => {
              this.activeQA = index;
              this.labelQA(control.qaId, "not-supported", control.note);
            }}
          >
            &#128078;
          </button>
          <input
            class="note"
            placeholder="note (encouraged)"
            .value=${control.note ?? ""}
            ?disabled=${disabled}
            @change=${(event: Event) => {
              const value = (event.target as HTMLInputElement).value;
              if (control.label && control.provenance === "manual") {
                this.labelQA(control.qaId, control.label, value);
              }
            }}
          />
        </div>
      </div>
    `;
  }

  private renderQAStep() {
    const groups = predicateGroups(this.decomposition!);
    const group = groups[this.activePredicate];
    const controls = this.controls();
    const groupControls = group
      ? group.qaIds
          .map((id) => controls.find((c) => c.qaId === id))
          .filter((c): c is QAControl => c !== undefined)
      : [];
    const canSubmit = submitEnabled(
      this.engine!.record,
      this.decomposition!,
      this.engine!.pending,
      this.engine!.conflict,
    );
    return html`
      <h3>
        Step 2: verify QAs for
        <mark class="predicate">${group?.surface ?? ""}</mark>
        (${this.activePredicate + 1}/${groups.length})
      </h3>
      <div>
        <button
          class="nav-prev"
          ?disabled=${this.activePredicate === 0}
          @click=${() => {
            this.activePredicate -= 1;
            this.activeQA = 0;
          }}
        >
          &larr; previous predicate
        </button>
        <button
          class="nav-next"
          ?disabled=${this.activePredicate >= groups.length - 1}
          @click=${() => {
            this.activePredicate += 1;
            this.activeQA = 0;
          }}
        >
          next predicate &rarr;
        </button>
        <button class="to-spans" @click=${() => (this.phase = "spans")}>
          revisit span step
        </button>
      </div>
      ${groupControls.map((control, index) => this.renderQARow(control, index))}
      <button
        class="submit"
        ?disabled=${!canSubmit}
        @click=${() => this.onSubmit()}
      >
        ${this.engine!.record.state === "submitted" ? "Submitted" : "Submit"}
      </button>
    `;
  }

  private renderSbs() {
    const scale: [number, string][] = [
      [1, "right response much more consistent"],
      [2, "right response more consistent"],
      [3, "almost equivalent"],
      [4, "left response more consistent"],
      [5, "left response much more consistent"],
    ];
    return html`
      <h3>Compare the factual consistency of the two responses</h3>
      <div class="likert">
        ${scale.map(
          ([value, title]) => html`
            <button
              class=${this.sbsValue === value ? "selected" : ""}
              title=${title}
              @click=${async () => {
                const result = await this.client!.putSideBySide(
                  this.bootstrap!.sbsPairId!,
                  this.bootstrap!.annotatorId ?? "anonymous",
                  value,
                );
                if (result.ok) {
                  this.sbsValue = value;
                }
              }}
            >
              ${value}
            </button>
          `,
        )}
      </div>
    `;
  }

  override render() {
    if (this.phase === "loading") {
      return html`<p>Loading…</p>`;
    }
    if (this.phase === "error") {
      return html`<p class="load-error">Could not load: ${this.loadError}</p>`;
    }
    if (this.phase === "sbs") {
      return this.renderSbs();
    }
    return html`
      ${this.renderConflictBanner()}
      <div class="panes">
        <div class="pane reference">${this.instance!.reference}</div>
        <div class="pane generation">${this.renderGeneration()}</div>
      </div>
      ${this.phase === "spans" ? this.renderSpanStep() : this.renderQAStep()}
    `;
  }
}

if (!customElements.get("qafact-annotator")) {
  customElements.define("qafact-annotator", QafactAnnotator);
}

export { AUTO_BADGE };
