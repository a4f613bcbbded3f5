/** Debounced single-slot requester.
 *
 * A burst of trigger() calls issues exactly one request once the input has
 * settled for the debounce delay (at least 250 ms). At most one request is
 * in flight; if the input changes meanwhile, one follow-up is issued when
 * the current request resolves. Responses are sequence-numbered and a
 * response that has been superseded by a newer request is discarded.
 */

export const MIN_DEBOUNCE_MS = 250;

export class DebouncedRequester<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private latestSeq = 0;
  private inFlight = false;
  private pending = false;

  /** Requests issued over this instance's lifetime (for tests/telemetry). */
  issuedCount = 0;

  constructor(
    private readonly issue: () => Promise<T>,
    private readonly apply: (result: T) => void,
    private readonly onError: (error: unknown) => void = () => {},
    private readonly delayMs: number = MIN_DEBOUNCE_MS,
  ) {
    if (delayMs < MIN_DEBOUNCE_MS) {
      throw new Error(`debounce delay must be at least ${MIN_DEBOUNCE_MS} ms`);
    }
  }

  /** Note a config change; the request fires after the input settles. */
  trigger(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire();
    }, this.delayMs);
  }

  /** Cancel any pending debounce without issuing. */
  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.pending = false;
  }

  private fire(): void {
    // any newer settled intent supersedes responses still in flight
    const seq = ++this.latestSeq;
    if (this.inFlight) {
      this.pending = true; // one follow-up once the current request lands
      return;
    }
    this.issuedCount += 1;
    this.inFlight = true;
    this.issue().then(
      (result) => {
        this.inFlight = false;
        if (seq === this.latestSeq) {
          this.apply(result);
        }
        this.drain();
      },
      (error) => {
        this.inFlight = false;
        if (seq === this.latestSeq) {
          this.onError(error);
        }
        this.drain();
      },
    );
  }

  private drain(): void {
    if (this.pending) {
      this.pending = false;
      this.fire();
    }
  }
}
