/** Wire types mirroring the service JSON API. */

export interface ColorJson {
  id: string;
  display_name: string;
}

export interface ItemJson {
  item_id: string;
  instruction: string[];
  pool: ColorJson[];
}

export interface ReferenceEntry {
  item_id: string;
  instruction: string[];
  target: ColorJson[] | null;
  covered: boolean;
}

export interface Progress {
  completed: number;
  total: number;
}

export interface NextPayload {
  format_version: number;
  session_id: string;
  experiment: string;
  status: "item" | "done";
  phase: string;
  stage: string | null;
  cycle: number | null;
  item: ItemJson | null;
  progress: Progress;
  practice_target?: ColorJson[];
  reference?: ReferenceEntry[];
  trial_index?: number;
  word_roster?: string[];
  page_items?: ItemJson[];
  survey_pending?: boolean;
}

export interface Feedback {
  correct: boolean;
  expected: ColorJson[];
}

export interface SubmitAck {
  format_version: number;
  session_id: string;
  accepted: boolean;
  phase: string;
  feedback: Feedback | null;
}

export interface CreatedSession {
  format_version: number;
  session_id: string;
  nonce: string;
  experiment: string;
  next: NextPayload;
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}
