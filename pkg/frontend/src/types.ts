/** JSON shapes of the annotation-service API consumed by the component. */

export type CharRange = [number, number];

export interface Instance {
  id: string;
  reference: string;
  generation: string;
  task: string;
  model_name: string | null;
  sentence_spans: CharRange[];
}

export interface Predicate {
  surface: string;
  char_range: CharRange;
  kind: "verbal" | "nominal" | "copular";
}

export interface Answer {
  surface: string;
  char_range: CharRange | null;
}

export type QAStatus = "pending-review" | "accepted" | "rejected-nonsensical";

export interface QAPair {
  id: string;
  predicate: Predicate;
  question: string;
  answers: Answer[];
  status: QAStatus;
  affirmative: string | null;
}

export interface Decomposition {
  instance_id: string;
  qas: QAPair[];
  backend_name: string;
}

export type Label = "supported" | "not-supported";
export type Verdict = "covered" | "not-covered";
export type Provenance = "manual" | "auto:span-propagation";

export interface SpanCoverage {
  answer_surface: string;
  char_range: CharRange | null;
  verdict: Verdict;
}

export interface QAStepEntry {
  label: Label;
  note: string | null;
  provenance: Provenance;
  error_kind: "extrinsic" | "intrinsic" | null;
}

export interface RecordView {
  record_id: string;
  instance_id: string;
  annotator_id: string;
  span_step: SpanCoverage[];
  qa_step: Record<string, QAStepEntry>;
  state: "spans-in-progress" | "qas-in-progress" | "submitted";
  version: number;
  content_hash: string;
}

export interface InstanceView {
  instance: Instance;
  decomposition: Decomposition | null;
}

export interface SbsView {
  pair_id: string;
  annotator_id: string;
  likert: number;
  version: number;
}

/** Single JSON blob the embedding page supplies. */
export interface Bootstrap {
  serviceUrl: string;
  annotatorToken?: string;
  recordId?: string;
  /** Side-by-side comparison task instead of a record. */
  sbsPairId?: string;
  annotatorId?: string;
}

export type PendingWrite =
  | { kind: "span"; span: SpanCoverage }
  | { kind: "qa"; qaId: string; label: Label; note?: string };
