/** Session handling: token + expiry live in sessionStorage only (cleared when
 * the browser session ends), never in localStorage or cookies. */

export interface SessionState {
  token: string;
  username: string;
  /** Unix seconds, as reported by the API's expires_at. */
  expiry: number;
}

const KEY = "tumorscope.session";

export interface SessionStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** In-memory fallback for tests / non-browser environments. */
export class MemoryStore implements SessionStore {
  private items = new Map<string, string>();
  getItem(key: string): string | null {
    return this.items.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.items.set(key, value);
  }
  removeItem(key: string): void {
    this.items.delete(key);
  }
}

export class SessionManager {
  constructor(
    private readonly store: SessionStore,
    private readonly now: () => number = () => Date.now() / 1000,
  ) {}

  save(session: SessionState): void {
    this.store.setItem(KEY, JSON.stringify(session));
  }

  clear(): void {
    this.store.removeItem(KEY);
  }

  /** Current session, or null if absent or expired (expired is also purged). */
  current(): SessionState | null {
    const raw = this.store.getItem(KEY);
    if (!raw) return null;
    let session: SessionState;
    try {
      session = JSON.parse(raw) as SessionState;
    } catch {
      this.clear();
      return null;
    }
    if (!session.token || session.expiry <= this.now()) {
      this.clear();
      return null;
    }
    return session;
  }
}

/** Route guard: returns the login route (preserving the intended route) when
 * the session is missing or expired, or null when access is allowed. */
export function guardRoute(sessions: SessionManager, intendedRoute: string): string | null {
  if (intendedRoute.startsWith("#/login")) return null;
  if (sessions.current()) return null;
  return `#/login?next=${encodeURIComponent(intendedRoute)}`;
}
