/** Wire types for the session service protocol (v1). */

export interface EventFrame {
  v: number;
  i: number;
  kind:
    | "segment"
    | "summary"
    | "revision"
    | "enrollment"
    | "limit-reached"
    | "error";
  payload: Record<string, unknown>;
}

export interface SegmentRecord {
  id: string;
  start: number;
  end: number;
  words: { w: string; s: number; e: number }[];
  label?: string;
  parent_id?: string;
}

export interface SnapshotRow {
  segment_id: string;
  speaker: string | null;
  text: string;
  t_start: number;
  t_end: number;
  parent_id: string | null;
  revised: boolean;
}

export interface Snapshot {
  v: number;
  session_id: string;
  rows: SnapshotRow[];
  corrections_used: number;
  correction_limit: number;
  limit_reached: boolean;
  enrollments: Record<string, number>;
  speakers: string[];
  last_logical_index: number;
}

export type ConnectionStatus = "idle" | "connecting" | "live" | "reconnecting" | "closed";
