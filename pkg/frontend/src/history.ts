/**
 * Bounded history of (scribbles, result) pairs for side-by-side comparison.
 * Oldest entries are evicted past the cap so memory stays bounded.
 */

export interface HistoryEntry<T> {
  scribblesJson: string;
  seed: number | undefined;
  result: T;
  at: number;
}

export class HistoryStrip<T> {
  private items: HistoryEntry<T>[] = [];

  constructor(public readonly cap: number = 20) {
    if (cap < 1) throw new Error("history cap must be >= 1");
  }

  push(scribblesJson: string, seed: number | undefined, result: T): HistoryEntry<T> {
    const entry: HistoryEntry<T> = { scribblesJson, seed, result, at: Date.now() };
    this.items.push(entry);
    while (this.items.length > this.cap) {
      this.items.shift();
    }
    return entry;
  }

  entries(): readonly HistoryEntry<T>[] {
    return this.items;
  }

  get length(): number {
    return this.items.length;
  }

  clear(): void {
    this.items = [];
  }
}
