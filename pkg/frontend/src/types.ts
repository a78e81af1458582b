// Payload shapes of the reader-study HTTP API.

export interface ReaderProgress {
  reader_id: string;
  items_done: number;
  items_total: number;
  next_item: number | null;
}

export interface SessionMeta {
  session_id: string;
  item_count: number;
  readers: string[];
  progress: ReaderProgress[];
}

export interface BlindedSummary {
  label: string;
  text: string;
}

export interface RubricEntry {
  subsection: string;
  guidance: string;
}

export interface SubmittedRecord {
  session_id: string;
  item_index: number;
  reader_id: string;
  blinded_label: string;
  scores: Record<string, number>;
  comment: string | null;
  insufficient_input: boolean;
  submitted_at: string;
}

export interface ItemPayload {
  session_id: string;
  item_index: number;
  input_text: string;
  reference_summary: string;
  summaries: BlindedSummary[];
  rubric: RubricEntry[];
  score_values: number[];
  submitted: SubmittedRecord[];
}

export interface ScoreSubmission {
  reader_id: string;
  blinded_label: string;
  scores: Record<string, number>;
  comment?: string;
  insufficient_input?: boolean;
}

export type SubmitResult =
  | { status: "accepted" }
  | { status: "rejected"; reason: string };

export interface Draft {
  scores: Record<string, number>;
  comment: string;
  insufficient: boolean;
}
