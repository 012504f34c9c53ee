/** Debounced, single-flight request scheduling.
 *
 * Rules:
 *  - a schedule() call (re)starts a quiet-period timer; the request
 *    fires only after `debounceMs` with no further calls, carrying the
 *    newest state;
 *  - at most one request is ever in flight;
 *  - schedule() calls that arrive while a request is in flight do not
 *    start timers or requests; instead the newest state is sent as one
 *    trailing request the moment the current response (or failure)
 *    settles.
 */

export interface SchedulerOptions<S, R> {
  /** Performs the actual request. Exactly one call is outstanding at a time. */
  request: (state: S) => Promise<R>;
  /** Called for every settled successful request. */
  onResult: (state: S, result: R) => void;
  /** Called for every settled failed request. */
  onError?: (state: S, error: unknown) => void;
  /** Called when a request leaves the gate (for in-flight indicators). */
  onLaunch?: (state: S) => void;
  /** Quiet period; default 250 ms. */
  debounceMs?: number;
}

export class SimulateScheduler<S, R> {
  private readonly opts: SchedulerOptions<S, R>;
  private readonly debounceMs: number;
  private pending: S | undefined;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private flying = false;
  private trailing = false;
  private disposed = false;

  constructor(opts: SchedulerOptions<S, R>) {
    this.opts = opts;
    this.debounceMs = opts.debounceMs ?? 250;
  }

  /** True while a request is outstanding. */
  get inFlight(): boolean {
    return this.flying;
  }

  /** Record a state change; the request fires after the quiet period. */
  schedule(state: S): void {
    if (this.disposed) return;
    this.pending = state;
    if (this.flying) {
      this.trailing = true;
      return;
    }
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.launch(this.pending as S);
    }, this.debounceMs);
  }

  /** Send the newest state immediately (retry/re-run affordance). */
  flushNow(state?: S): void {
    if (this.disposed) return;
    if (state !== undefined) this.pending = state;
    if (this.pending === undefined) return;
    if (this.flying) {
      this.trailing = true;
      return;
    }
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.launch(this.pending);
  }

  /** Cancel timers and ignore any still-outstanding response. */
  dispose(): void {
    this.disposed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private launch(state: S): void {
    this.flying = true;
    this.opts.onLaunch?.(state);
    this.opts.request(state).then(
      (result) => this.settle(() => this.opts.onResult(state, result)),
      (error) => this.settle(() => this.opts.onError?.(state, error)),
    );
  }

  private settle(deliver: () => void): void {
    this.flying = false;
    if (this.disposed) return;
    deliver();
    if (this.trailing && !this.flying) {
      // deliver() may itself have scheduled or flushed; launch the
      // trailing state only if nothing is flying yet
      this.trailing = false;
      this.launch(this.pending as S);
    }
  }
}
