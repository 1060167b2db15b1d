import { describe, expect, test } from "vitest";

import type { EventFrame, Snapshot } from "../src/types.js";
import {
  applyEvent,
  ensureWakeWord,
  foldEvents,
  fromSnapshot,
  initialState,
} from "../src/viewmodel.js";

function segEvent(i: number, id: string, label: string, words: string[]): EventFrame {
  let t = i * 2;
  return {
    v: 1,
    i,
    kind: "segment",
    payload: {
      segment: {
        id,
        start: t,
        end: t + 1.5,
        words: words.map((w, k) => ({ w, s: t + k * 0.3, e: t + (k + 1) * 0.3 })),
        label,
      },
    },
  };
}

// a recorded session: two segments, a summary tick, one applied
// correction (revision + enrollment), then the budget closes
const recordedLog: EventFrame[] = [
  segEvent(0, "seg-0", "A", ["you", "can", "stay", "below", "1250"]),
  segEvent(1, "seg-1", "B", ["become", "a", "choice", "between", "like"]),
  {
    v: 1,
    i: 2,
    kind: "summary",
    payload: {
      mode: "summary",
      segment_ids: ["seg-0", "seg-1"],
      text: "A talked about staying below 1250\nB talked about a choice",
      word_count: 12,
      degraded: false,
    },
  },
  {
    v: 1,
    i: 3,
    kind: "revision",
    payload: {
      segment_id: "seg-0",
      old_speaker: "A",
      new_speaker: "B",
      source: "user",
      applied_at: 3,
      corrections_used: 1,
    },
  },
  {
    v: 1,
    i: 4,
    kind: "enrollment",
    payload: {
      speaker: "B",
      segment_id: "seg-0",
      pool_revision: 1,
      online_counts: { A: 0, B: 1 },
      corrections_used: 1,
    },
  },
  { v: 1, i: 5, kind: "limit-reached", payload: { corrections_used: 1 } },
];

describe("event-sourced view model", () => {
  test("replaying a recorded log yields the expected rows and counters", () => {
    const state = foldEvents(
      { ...initialState(), correctionLimit: 1 },
      recordedLog,
    );

    expect(state.rows.map((r) => [r.segmentId, r.speaker, r.revised])).toEqual([
      ["seg-0", "B", true],
      ["seg-1", "B", false],
    ]);
    expect(state.rows[0]!.text).toBe("you can stay below 1250");
    expect(state.summary?.text).toBe(
      "A talked about staying below 1250\nB talked about a choice",
    );
    expect(state.summary?.wordCount).toBe(12);
    expect(state.summary?.segmentIds).toEqual(["seg-0", "seg-1"]);
    expect(state.correctionsUsed).toBe(1);
    expect(state.limitReached).toBe(true);
    expect(state.enrollments).toEqual({ A: 0, B: 1 });
    expect(state.lastLogicalIndex).toBe(5);
  });

  test("replay is deterministic", () => {
    const a = foldEvents(initialState(), recordedLog);
    const b = foldEvents(initialState(), recordedLog);
    expect(b).toEqual(a);
  });

  test("a revision flips exactly one row", () => {
    const base = foldEvents(initialState(), recordedLog.slice(0, 2));
    const after = applyEvent(base, recordedLog[3]!);
    expect(after.rows[0]!.speaker).toBe("B");
    expect(after.rows[0]!.revised).toBe(true);
    expect(after.rows[1]).toEqual(base.rows[1]);
    expect(after.rows[0]!.text).toBe(base.rows[0]!.text);
  });

  test("frames at or below the applied index are ignored (idempotent re-sync)", () => {
    const once = foldEvents(initialState(), recordedLog);
    const twice = foldEvents(once, recordedLog);
    expect(twice).toEqual(once);
    const withDuplicates = foldEvents(
      initialState(),
      [...recordedLog.slice(0, 3), ...recordedLog],
    );
    expect(withDuplicates.rows).toEqual(once.rows);
  });

  test("snapshot plus tail events equals full replay", () => {
    const full = foldEvents(
      { ...initialState(), correctionLimit: 1 },
      recordedLog,
    );
    const snapshot: Snapshot = {
      v: 1,
      session_id: "s",
      rows: [
        {
          segment_id: "seg-0",
          speaker: "A",
          text: "you can stay below 1250",
          t_start: 0,
          t_end: 1.5,
          parent_id: null,
          revised: false,
        },
        {
          segment_id: "seg-1",
          speaker: "B",
          text: "become a choice between like",
          t_start: 2,
          t_end: 3.5,
          parent_id: null,
          revised: false,
        },
      ],
      corrections_used: 0,
      correction_limit: 1,
      limit_reached: false,
      enrollments: { A: 0, B: 0 },
      speakers: ["A", "B"],
      last_logical_index: 2,
    };
    const resumed = foldEvents(fromSnapshot(snapshot), recordedLog.slice(3));
    expect(resumed.rows).toEqual(full.rows);
    expect(resumed.correctionsUsed).toBe(full.correctionsUsed);
    expect(resumed.limitReached).toBe(full.limitReached);
    expect(resumed.enrollments).toEqual(full.enrollments);
  });

  test("display text is rendered verbatim", () => {
    const text = "  A: exact \n\n  spacing &<> preserved  ";
    const state = applyEvent(initialState(), {
      v: 1,
      i: 0,
      kind: "summary",
      payload: {
        mode: "conversation",
        segment_ids: [],
        text,
        word_count: 5,
        degraded: false,
      },
    });
    expect(state.summary?.text).toBe(text);
  });

  test("split children carry their parent id", () => {
    const state = applyEvent(initialState(), {
      v: 1,
      i: 0,
      kind: "segment",
      payload: {
        segment: {
          id: "seg-3.L",
          start: 0,
          end: 1,
          words: [{ w: "hi", s: 0, e: 1 }],
          label: "A",
          parent_id: "seg-3",
        },
      },
    });
    expect(state.rows[0]!.parentId).toBe("seg-3");
  });

  test("error events surface as notices without touching rows", () => {
    const base = foldEvents(initialState(), recordedLog.slice(0, 2));
    const after = applyEvent(base, {
      v: 1,
      i: 9,
      kind: "error",
      payload: { stage: "locate", message: "no matching line" },
    });
    expect(after.rows).toEqual(base.rows);
    expect(after.notice?.text).toBe("locate: no matching line");
  });
});

describe("wake word handling", () => {
  test("prefixes when missing", () => {
    expect(ensureWakeWord("Predicted A, was actually B")).toBe(
      "Hey Cobi: Predicted A, was actually B",
    );
  });

  test("keeps an existing wake word regardless of case", () => {
    expect(ensureWakeWord("hey COBI: fix it")).toBe("hey COBI: fix it");
    expect(ensureWakeWord("  Hey Cobi please  ")).toBe("Hey Cobi please");
  });
});
