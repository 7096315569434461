/** Pure view-state derivation: grey-out, restoration, submit gating. */

import { describe, expect, it } from "vitest";

import {
  AUTO_BADGE,
  answerSpans,
  applyPending,
  predicateGroups,
  qaControls,
  submitEnabled,
} from "../src/state.js";
import type { PendingWrite, RecordView } from "../src/types.js";
import { fixtureDecomposition } from "./mock-service.js";

function emptyRecord(): RecordView {
  return {
    record_id: "r1",
    instance_id: "inst1",
    annotator_id: "a1",
    span_step: [],
    qa_step: {},
    state: "spans-in-progress",
    version: 1,
    content_hash: "h",
  };
}

const notCoveredWoman: PendingWrite = {
  kind: "span",
  span: {
    answer_surface: "A woman",
    char_range: [0, 7],
    verdict: "not-covered",
  },
};

const coveredWoman: PendingWrite = {
  kind: "span",
  span: { answer_surface: "A woman", char_range: [0, 7], verdict: "covered" },
};

describe("answerSpans", () => {
  it("lists distinct accepted answer spans in order", () => {
    const spans = answerSpans(fixtureDecomposition());
    expect(spans.map((s) => s.surface)).toEqual([
      "A woman",
      "of measles",
      "A dog",
    ]);
  });
});

describe("qaControls", () => {
  it("greys out QAs whose span is not covered and badges them", () => {
    const decomposition = fixtureDecomposition();
    const effective = applyPending(emptyRecord(), [notCoveredWoman]);
    const controls = qaControls(decomposition, effective);
    const womanQA = controls.find((c) => c.qaId === "inst1/qa000")!;
    expect(womanQA.state).toBe("greyed");
    expect(womanQA.badge).toBe(AUTO_BADGE);
    expect(womanQA.label).toBe("not-supported");
    expect(womanQA.provenance).toBe("auto:span-propagation");
    const dogQA = controls.find((c) => c.qaId === "inst1/qa002")!;
    expect(dogQA.state).toBe("enabled");
    expect(dogQA.label).toBeUndefined();
  });

  it("state is a pure function of record plus pending queue", () => {
    const decomposition = fixtureDecomposition();
    const once = qaControls(
      decomposition,
      applyPending(emptyRecord(), [notCoveredWoman]),
    );
    const twice = qaControls(
      decomposition,
      applyPending(emptyRecord(), [notCoveredWoman]),
    );
    expect(twice).toEqual(once);
  });

  it("toggling a span not-covered and back restores prior control state", () => {
    const decomposition = fixtureDecomposition();
    const manualLabel: PendingWrite = {
      kind: "qa",
      qaId: "inst1/qa000",
      label: "supported",
      note: "stated",
    };
    const before = qaControls(
      decomposition,
      applyPending(emptyRecord(), [manualLabel]),
    );
    const after = qaControls(
      decomposition,
      applyPending(emptyRecord(), [manualLabel, notCoveredWoman, coveredWoman]),
    );
    expect(after).toEqual(before);
    const restored = after.find((c) => c.qaId === "inst1/qa000")!;
    expect(restored.label).toBe("supported");
    expect(restored.note).toBe("stated");
  });

  it("joins multi-answer QAs with semicolons", () => {
    const decomposition = fixtureDecomposition();
    decomposition.qas[0].answers = [
      { surface: "he", char_range: null },
      { surface: "A man", char_range: null },
    ];
    const controls = qaControls(
      decomposition,
      applyPending(emptyRecord(), []),
    );
    expect(controls[0].answersText).toBe("he; A man");
  });
});

describe("submitEnabled", () => {
  const decomposition = fixtureDecomposition();

  it("is disabled with no labels", () => {
    expect(submitEnabled(emptyRecord(), decomposition, [], false)).toBe(false);
  });

  it("is disabled until every accepted QA is labeled", () => {
    const some: PendingWrite[] = [
      { kind: "qa", qaId: "inst1/qa000", label: "supported" },
      { kind: "qa", qaId: "inst1/qa001", label: "not-supported" },
    ];
    // Pending writes disable submit on their own; check the acked shape too.
    const record = emptyRecord();
    record.qa_step = {
      "inst1/qa000": {
        label: "supported",
        note: null,
        provenance: "manual",
        error_kind: null,
      },
    };
    expect(submitEnabled(record, decomposition, [], false)).toBe(false);
    expect(submitEnabled(record, decomposition, some, false)).toBe(false);
  });

  it("enables once auto plus manual labels cover everything", () => {
    const record = emptyRecord();
    record.span_step = [
      { answer_surface: "A woman", char_range: [0, 7], verdict: "not-covered" },
    ];
    record.qa_step = {
      "inst1/qa000": {
        label: "not-supported",
        note: null,
        provenance: "auto:span-propagation",
        error_kind: "extrinsic",
      },
      "inst1/qa001": {
        label: "supported",
        note: null,
        provenance: "manual",
        error_kind: null,
      },
      "inst1/qa002": {
        label: "supported",
        note: null,
        provenance: "manual",
        error_kind: null,
      },
    };
    expect(submitEnabled(record, decomposition, [], false)).toBe(true);
  });

  it("is disabled while a conflict is unresolved or writes are pending", () => {
    const record = emptyRecord();
    record.qa_step = {
      "inst1/qa000": {
        label: "supported", note: null, provenance: "manual", error_kind: null,
      },
      "inst1/qa001": {
        label: "supported", note: null, provenance: "manual", error_kind: null,
      },
      "inst1/qa002": {
        label: "supported", note: null, provenance: "manual", error_kind: null,
      },
    };
    expect(submitEnabled(record, decomposition, [], true)).toBe(false);
    const pending: PendingWrite[] = [
      { kind: "qa", qaId: "inst1/qa002", label: "supported" },
    ];
    expect(submitEnabled(record, decomposition, pending, false)).toBe(false);
  });
});

describe("predicateGroups", () => {
  it("groups accepted QAs by predicate in order", () => {
    const groups = predicateGroups(fixtureDecomposition());
    expect(groups.map((g) => [g.surface, g.qaIds.length])).toEqual([
      ["died", 2],
      ["barked", 1],
    ]);
  });
});
