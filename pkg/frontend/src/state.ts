/** Pure view-state derivation.
 *
 * Everything the component renders is a function of (last server-acked
 * record, local pending-write queue, decomposition); reloading mid-task
 * can lose nothing beyond unacknowledged writes. Mirrors the service's
 * propagation rule: a QA whose answer set touches a not-covered span shows
 * an auto "unsupported (extrinsic)" state and its controls grey out, while
 * any manual label underneath stays stored and reappears untouched when
 * the span is covered again.
 */

import type {
  Decomposition,
  Label,
  PendingWrite,
  Provenance,
  QAPair,
  RecordView,
  SpanCoverage,
  Verdict,
} from "./types.js";

export const AUTO_BADGE = "auto: unsupported (extrinsic)";

export function spanKey(surface: string, range: [number, number] | null): string {
  return range === null ? `~:${surface}` : `${range[0]}:${range[1]}:${surface}`;
}

export function coverageKey(span: SpanCoverage): string {
  return spanKey(span.answer_surface, span.char_range);
}

export function acceptedQAs(decomposition: Decomposition): QAPair[] {
  return decomposition.qas.filter((qa) => qa.status === "accepted");
}

export function qaSpanKeys(qa: QAPair): string[] {
  return qa.answers.map((a) => spanKey(a.surface, a.char_range));
}

/** Distinct answer spans of the accepted QAs, in first-appearance order. */
export function answerSpans(
  decomposition: Decomposition,
): { key: string; surface: string; range: [number, number] | null }[] {
  const seen = new Set<string>();
  const spans: { key: string; surface: string; range: [number, number] | null }[] = [];
  for (const qa of acceptedQAs(decomposition)) {
    for (const answer of qa.answers) {
      const key = spanKey(answer.surface, answer.char_range);
      if (!seen.has(key)) {
        seen.add(key);
        spans.push({ key, surface: answer.surface, range: answer.char_range });
      }
    }
  }
  return spans;
}

export interface EffectiveState {
  /** span key -> verdict, server state with pending writes applied. */
  verdicts: Map<string, Verdict>;
  /** qa id -> manual label/note, server state with pending writes applied. */
  manual: Map<string, { label: Label; note?: string }>;
}

export function applyPending(
  record: RecordView,
  pending: PendingWrite[],
): EffectiveState {
  const verdicts = new Map<string, Verdict>();
  for (const span of record.span_step) {
    verdicts.set(coverageKey(span), span.verdict);
  }
  const manual = new Map<string, { label: Label; note?: string }>();
  for (const [qaId, entry] of Object.entries(record.qa_step)) {
    if (entry.provenance === "manual") {
      manual.set(qaId, { label: entry.label, note: entry.note ?? undefined });
    }
  }
  for (const write of pending) {
    if (write.kind === "span") {
      verdicts.set(coverageKey(write.span), write.span.verdict);
    } else {
      manual.set(write.qaId, { label: write.label, note: write.note });
    }
  }
  return { verdicts, manual };
}

export interface QAControl {
  qaId: string;
  question: string;
  answersText: string;
  /** Greyed controls cannot be toggled; the auto badge explains why. */
  state: "enabled" | "greyed";
  badge?: string;
  label?: Label;
  provenance?: Provenance;
  note?: string;
  /** Affirmative rephrasing shown as an annotation hint. */
  hint?: string;
}

export function qaControls(
  decomposition: Decomposition,
  effective: EffectiveState,
): QAControl[] {
  const blocked = new Set<string>();
  for (const [key, verdict] of effective.verdicts) {
    if (verdict === "not-covered") blocked.add(key);
  }
  return acceptedQAs(decomposition).map((qa) => {
    const answersText = qa.answers.map((a) => a.surface).join("; ");
    const base = {
      qaId: qa.id,
      question: qa.question,
      answersText,
      hint: qa.affirmative ?? undefined,
    };
    if (qaSpanKeys(qa).some((key) => blocked.has(key))) {
      return {
        ...base,
        state: "greyed" as const,
        badge: AUTO_BADGE,
        label: "not-supported" as const,
        provenance: "auto:span-propagation" as const,
      };
    }
    const manual = effective.manual.get(qa.id);
    return {
      ...base,
      state: "enabled" as const,
      label: manual?.label,
      provenance: manual ? ("manual" as const) : undefined,
      note: manual?.note,
    };
  });
}

/** Submit unlocks only with a label (manual or auto) on every accepted QA,
 * nothing left in the queue, and no unresolved conflict. */
export function submitEnabled(
  record: RecordView,
  decomposition: Decomposition,
  pending: PendingWrite[],
  conflict: boolean,
): boolean {
  if (conflict || record.state === "submitted" || pending.length > 0) {
    return false;
  }
  const controls = qaControls(decomposition, applyPending(record, pending));
  return controls.every((control) => control.label !== undefined);
}

/** Predicates in decomposition order, for step-2 navigation. */
export function predicateGroups(
  decomposition: Decomposition,
): { surface: string; range: [number, number]; qaIds: string[] }[] {
  const order: string[] = [];
  const groups = new Map<string, { surface: string; range: [number, number]; qaIds: string[] }>();
  for (const qa of acceptedQAs(decomposition)) {
    const key = `${qa.predicate.char_range[0]}:${qa.predicate.char_range[1]}`;
    if (!groups.has(key)) {
      groups.set(key, {
        surface: qa.predicate.surface,
        range: qa.predicate.char_range,
        qaIds: [],
      });
      order.push(key);
    }
    groups.get(key)!.qaIds.push(qa.id);
  }
  return order.map((key) => groups.get(key)!);
}
