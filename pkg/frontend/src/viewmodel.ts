/**
 * Pure event-sourced view model: the rendered state is a fold over
 * (snapshot, event frames). Events at or below the last applied
 * logical index are ignored, so replays and reconnect re-syncs are
 * idempotent by construction.
 */

import type {
  ConnectionStatus,
  EventFrame,
  SegmentRecord,
  Snapshot,
} from "./types.js";

export const WAKE_WORD = "Hey Cobi";

export interface TranscriptRow {
  segmentId: string;
  speaker: string | null;
  text: string;
  tStart: number;
  tEnd: number;
  parentId: string | null;
  revised: boolean;
}

export interface SummaryView {
  mode: string;
  text: string;
  wordCount: number;
  segmentIds: string[];
  degraded: boolean;
}

export interface Notice {
  kind: "error" | "info";
  text: string;
  atIndex: number;
}

export interface ViewState {
  rows: TranscriptRow[];
  summary: SummaryView | null;
  correctionsUsed: number;
  correctionLimit: number;
  limitReached: boolean;
  enrollments: Record<string, number>;
  speakers: string[];
  lastLogicalIndex: number;
  connection: ConnectionStatus;
  notice: Notice | null;
}

export function initialState(): ViewState {
  return {
    rows: [],
    summary: null,
    correctionsUsed: 0,
    correctionLimit: 0,
    limitReached: false,
    enrollments: {},
    speakers: [],
    lastLogicalIndex: -1,
    connection: "idle",
    notice: null,
  };
}

export function fromSnapshot(snap: Snapshot, connection: ConnectionStatus = "live"): ViewState {
  return {
    rows: snap.rows.map((r) => ({
      segmentId: r.segment_id,
      speaker: r.speaker,
      text: r.text,
      tStart: r.t_start,
      tEnd: r.t_end,
      parentId: r.parent_id,
      revised: r.revised,
    })),
    summary: null,
    correctionsUsed: snap.corrections_used,
    correctionLimit: snap.correction_limit,
    limitReached: snap.limit_reached,
    enrollments: { ...snap.enrollments },
    speakers: [...snap.speakers],
    lastLogicalIndex: snap.last_logical_index,
    connection,
    notice: null,
  };
}

function segmentText(record: SegmentRecord): string {
  return record.words.map((w) => w.w).join(" ");
}

export function applyEvent(state: ViewState, frame: EventFrame): ViewState {
  if (frame.i <= state.lastLogicalIndex) {
    return state; // already applied (snapshot overlap or replayed frame)
  }
  const next: ViewState = { ...state, lastLogicalIndex: frame.i };
  const payload = frame.payload as Record<string, unknown>;
  switch (frame.kind) {
    case "segment": {
      const record = payload["segment"] as SegmentRecord;
      next.rows = [
        ...state.rows,
        {
          segmentId: record.id,
          speaker: record.label ?? null,
          text: segmentText(record),
          tStart: record.start,
          tEnd: record.end,
          parentId: record.parent_id ?? null,
          revised: false,
        },
      ];
      break;
    }
    case "summary": {
      next.summary = {
        mode: payload["mode"] as string,
        text: payload["text"] as string,
        wordCount: payload["word_count"] as number,
        segmentIds: [...(payload["segment_ids"] as string[])],
        degraded: Boolean(payload["degraded"]),
      };
      break;
    }
    case "revision": {
      const segmentId = payload["segment_id"] as string;
      const newSpeaker = payload["new_speaker"] as string;
      next.rows = state.rows.map((row) =>
        row.segmentId === segmentId
          ? { ...row, speaker: newSpeaker, revised: true }
          : row,
      );
      next.correctionsUsed =
        (payload["corrections_used"] as number) ?? state.correctionsUsed;
      break;
    }
    case "enrollment": {
      next.enrollments = { ...(payload["online_counts"] as Record<string, number>) };
      next.correctionsUsed =
        (payload["corrections_used"] as number) ?? state.correctionsUsed;
      break;
    }
    case "limit-reached": {
      next.limitReached = true;
      next.correctionsUsed =
        (payload["corrections_used"] as number) ?? state.correctionsUsed;
      break;
    }
    case "error": {
      next.notice = {
        kind: "error",
        text: `${payload["stage"]}: ${payload["message"]}`,
        atIndex: frame.i,
      };
      break;
    }
  }
  return next;
}

export function foldEvents(state: ViewState, frames: EventFrame[]): ViewState {
  return frames.reduce(applyEvent, state);
}

/** Corrections must start with the wake word; prefix it when missing. */
export function ensureWakeWord(text: string): string {
  const trimmed = text.trim();
  if (trimmed.toLowerCase().startsWith(WAKE_WORD.toLowerCase())) {
    return trimmed;
  }
  return `${WAKE_WORD}: ${trimmed}`;
}
