/**
 * Rate limiter for preview requests: at most one call per window.
 *
 * An invocation on an idle limiter fires immediately (first slider touch
 * previews at once); invocations inside the window are coalesced into a
 * single trailing call carrying the latest arguments. A continuous drag
 * therefore fires about once per window plus one trailing flush.
 */
export function rateLimit<A extends unknown[]>(
  fn: (...args: A) => void,
  windowMs: number,
): (...args: A) => void {
  if (!(windowMs > 0)) throw new Error("window must be positive");
  let lastFire = -Infinity;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;

  const fire = (args: A) => {
    lastFire = Date.now();
    fn(...args);
  };

  return (...args: A) => {
    const now = Date.now();
    if (timer === null && now - lastFire >= windowMs) {
      fire(args);
      return;
    }
    pending = args;
    if (timer === null) {
      const wait = Math.max(0, lastFire + windowMs - now);
      timer = setTimeout(() => {
        timer = null;
        const p = pending;
        pending = null;
        if (p !== null) fire(p);
      }, wait);
    }
  };
}

export const PREVIEW_WINDOW_MS = 150;
