/** Component conformance against the scripted mock service, headless. */

import { beforeEach, describe, expect, it } from "vitest";

import "../src/qafact-annotator.js"; // registers the custom element
import type { QafactAnnotator } from "../src/qafact-annotator.js";
import { AUTO_BADGE } from "../src/state.js";
import {
  MockService,
  fixtureDecomposition,
  fixtureInstance,
} from "./mock-service.js";

async function mount(
  service: MockService,
  bootstrap: Record<string, unknown> = {},
): Promise<QafactAnnotator> {
  const element = document.createElement(
    "qafact-annotator",
  ) as QafactAnnotator;
  element.fetchLike = service.fetchLike();
  element.bootstrap = {
    serviceUrl: "http://mock",
    recordId: "r1",
    ...bootstrap,
  } as never;
  document.body.appendChild(element);
  await element.updateComplete;
  await element.settled();
  return element;
}

function shadow(element: QafactAnnotator): ShadowRoot {
  return element.shadowRoot!;
}

let service: MockService;

beforeEach(() => {
  document.body.innerHTML = "";
  service = new MockService(fixtureInstance(), fixtureDecomposition());
});

describe("loading and layout", () => {
  it("renders reference left and generation right", async () => {
    const element = await mount(service);
    const reference = shadow(element).querySelector(".pane.reference")!;
    const generation = shadow(element).querySelector(".pane.generation")!;
    expect(reference.textContent).toContain("Gareth Colfer-Williams");
    expect(generation.textContent).toContain("A woman died of measles.");
  });

  it("starts in the span step for a fresh record", async () => {
    const element = await mount(service);
    expect(shadow(element).querySelectorAll(".span-chip").length).toBe(3);
  });
});

describe("span step", () => {
  it("not-covered greys out dependent QAs with the auto badge", async () => {
    const element = await mount(service);
    const chip = shadow(element).querySelector(
      '.span-chip[data-key="0:7:A woman"]',
    ) as HTMLElement;
    chip.click();
    await element.settled();
    // Server acknowledged the write with the propagated view.
    expect(service.record.version).toBe(2);

    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    const womanRow = shadow(element).querySelector(
      '[data-qa-id="inst1/qa000"]',
    )!;
    expect(womanRow.className).toContain("greyed");
    expect(womanRow.textContent).toContain(AUTO_BADGE);
    const thumbs = womanRow.querySelectorAll("button.thumb");
    thumbs.forEach((button) => {
      expect((button as HTMLButtonElement).disabled).toBe(true);
    });
  });

  it("toggling back restores the exact prior control state", async () => {
    const element = await mount(service);
    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    // Label the woman QA supported first.
    const row = shadow(element).querySelector('[data-qa-id="inst1/qa000"]')!;
    (row.querySelector("button.thumb.up") as HTMLElement).click();
    await element.settled();
    const labeledHTML = shadow(element).querySelector(
      '[data-qa-id="inst1/qa000"]',
    )!.outerHTML;

    (shadow(element).querySelector(".to-spans") as HTMLElement).click();
    await element.updateComplete;
    const chip = () =>
      shadow(element).querySelector(
        '.span-chip[data-key="0:7:A woman"]',
      ) as HTMLElement;
    chip().click();
    await element.settled();
    chip().click();
    await element.settled();

    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    const restoredHTML = shadow(element).querySelector(
      '[data-qa-id="inst1/qa000"]',
    )!.outerHTML;
    expect(restoredHTML).toBe(labeledHTML);
    expect(restoredHTML).toContain("selected-up");
  });
});

describe("qa step", () => {
  it("shows the affirmative rephrasing hint", async () => {
    const element = await mount(service);
    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    const row = shadow(element).querySelector('[data-qa-id="inst1/qa000"]')!;
    expect(row.querySelector(".hint")!.textContent).toContain("A woman died");
  });

  it("highlights the active predicate in the generation pane", async () => {
    const element = await mount(service);
    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    const mark = shadow(element).querySelector(
      ".pane.generation mark.predicate",
    )!;
    expect(mark.textContent).toBe("died");
    (shadow(element).querySelector(".nav-next") as HTMLElement).click();
    await element.updateComplete;
    expect(
      shadow(element).querySelector(".pane.generation mark.predicate")!
        .textContent,
    ).toBe("barked");
  });

  it("submit stays disabled until every accepted QA is labeled", async () => {
    const element = await mount(service);
    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    const submit = () =>
      shadow(element).querySelector("button.submit") as HTMLButtonElement;
    expect(submit().disabled).toBe(true);

    const label = async (qaId: string, direction: "up" | "down") => {
      const row = shadow(element).querySelector(`[data-qa-id="${qaId}"]`)!;
      (row.querySelector(`button.thumb.${direction}`) as HTMLElement).click();
      await element.settled();
    };
    await label("inst1/qa000", "up");
    await label("inst1/qa001", "down");
    expect(submit().disabled).toBe(true);

    (shadow(element).querySelector(".nav-next") as HTMLElement).click();
    await element.updateComplete;
    await label("inst1/qa002", "up");
    expect(submit().disabled).toBe(false);

    submit().click();
    await element.settled();
    expect(service.record.state).toBe("submitted");
    expect(submit().textContent).toContain("Submitted");
    expect(submit().disabled).toBe(true);
  });

  it("supports keyboard labeling", async () => {
    const element = await mount(service);
    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;
    element.dispatchEvent(
      new KeyboardEvent("keydown", { key: "1", bubbles: true }),
    );
    element.dispatchEvent(
      new KeyboardEvent("keydown", { key: "s", bubbles: true }),
    );
    await element.settled();
    expect(service.record.manual.get("inst1/qa000")?.label).toBe("supported");
  });
});

describe("version conflicts", () => {
  it("a conflict response raises the refresh banner and freezes writes", async () => {
    const element = await mount(service);
    (shadow(element).querySelector(".to-qas") as HTMLElement).click();
    await element.updateComplete;

    service.failNextWriteWithConflict = true;
    const row = shadow(element).querySelector('[data-qa-id="inst1/qa000"]')!;
    (row.querySelector("button.thumb.up") as HTMLElement).click();
    await element.settled();
    await element.updateComplete;

    const banner = shadow(element).querySelector(".conflict-banner");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toContain("Reload");
    // No silent overwrite happened and the queue is frozen.
    expect(service.record.manual.has("inst1/qa000")).toBe(false);
    const writesBefore = service.requests.filter(
      (r) => r.method !== "GET",
    ).length;
    (row.querySelector("button.thumb.down") as HTMLElement).click();
    await element.updateComplete;
    const writesAfter = service.requests.filter(
      (r) => r.method !== "GET",
    ).length;
    expect(writesAfter).toBe(writesBefore);
    expect(
      (shadow(element).querySelector("button.submit") as HTMLButtonElement)
        .disabled,
    ).toBe(true);
  });
});

describe("side-by-side mode", () => {
  it("records a 1-5 likert value", async () => {
    const element = await mount(service, {
      recordId: undefined,
      sbsPairId: "p1",
      annotatorId: "a1",
    });
    const buttons = shadow(element).querySelectorAll(".likert button");
    expect(buttons.length).toBe(5);
    (buttons[2] as HTMLElement).click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    await element.updateComplete;
    expect(
      shadow(element).querySelector(".likert button.selected")!.textContent,
    ).toContain("3");
    const sbsPut = service.requests.find((r) => r.path === "/sbs/p1");
    expect(sbsPut?.method).toBe("PUT");
  });
});
