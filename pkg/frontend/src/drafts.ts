import type { Draft } from "./types.js";

/** Minimal slice of the Storage interface, so tests can inject a fake. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/**
 * Per-(session, reader, item, summary) draft persistence. Drafts survive page
 * reloads until the submission is accepted, then they are cleared.
 */
export class DraftStore {
  constructor(
    private readonly store: KeyValueStore,
    private readonly sessionId: string,
    private readonly readerId: string,
  ) {}

  private key(itemIndex: number, label: string): string {
    return `chocosa-draft:${this.sessionId}:${this.readerId}:${itemIndex}:${label}`;
  }

  load(itemIndex: number, label: string): Draft | null {
    const raw = this.store.getItem(this.key(itemIndex, label));
    if (raw === null) return null;
    try {
      return JSON.parse(raw) as Draft;
    } catch {
      return null;
    }
  }

  save(itemIndex: number, label: string, draft: Draft): void {
    this.store.setItem(this.key(itemIndex, label), JSON.stringify(draft));
  }

  clear(itemIndex: number, label: string): void {
    this.store.removeItem(this.key(itemIndex, label));
  }
}
