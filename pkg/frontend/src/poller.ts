/**
 * Fixed-interval driver for the event poll. The actual HTTP call and cursor
 * bookkeeping live in the store; this only guarantees one tick at a time
 * every intervalMs (a slow response never stacks a second request).
 */
export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private busy = false;

  constructor(
    private readonly tick: () => Promise<void>,
    readonly intervalMs = 2000,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      if (this.busy) return;
      this.busy = true;
      this.tick()
        .catch(() => {
          // network blips surface through the store's status, not here
        })
        .finally(() => {
          this.busy = false;
        });
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return this.timer !== null;
  }
}
