/** Review session state machine.
 *
 * The server owns the truth: every verdict must be acknowledged before the
 * reviewer can move on, displayed statistics are always the server's own
 * fold (never recomputed client side), and the whole state is rebuilt from
 * the API on page load, so a refresh loses nothing.
 */

import {
  ApiClient,
  ApiError,
  ErrorType,
  Proposal,
  SessionInfo,
  Stats,
  Verdict,
  VerdictRecord,
} from "./api.js";

export interface OverlayToggles {
  proposal: boolean;
  labels: boolean;
  names: boolean;
}

export interface ViewState {
  zoom: number;
  panX: number;
  panY: number;
}

export interface QueuedSubmission {
  rank: number;
  verdict: Verdict;
  errorTypes: ErrorType[];
}

export type SubmitResult =
  | { ok: true; rank: number }
  | { ok: false; reason: string; queued: boolean };

const MIN_ZOOM = 0.25;
const MAX_ZOOM = 8;

export class ReviewController {
  readonly session: SessionInfo;
  readonly proposals: Map<number, Proposal>;
  readonly verdicts: Map<number, VerdictRecord>;
  stats: Stats | null;
  currentRank: number;
  pendingTypes: Set<ErrorType> = new Set();
  overlay: OverlayToggles = { proposal: true, labels: true, names: true };
  view: ViewState = { zoom: 1, panX: 0, panY: 0 };

  private submitting = false;
  private queued: QueuedSubmission | null = null;

  constructor(
    private readonly api: ApiClient,
    session: SessionInfo,
    proposals: Proposal[],
    stats: Stats | null,
  ) {
    this.session = session;
    this.proposals = new Map(proposals.map((p) => [p.rank, p]));
    this.verdicts = new Map();
    for (const p of proposals) {
      if (p.verdict) this.verdicts.set(p.rank, p.verdict);
    }
    this.stats = stats;
    this.currentRank = this.firstUnreviewed();
  }

  /** Rebuild the whole controller from the server. */
  static async load(api: ApiClient): Promise<ReviewController> {
    const session = await api.session();
    const proposals = await api.allProposals();
    const stats = await api.stats();
    return new ReviewController(api, session, proposals, stats);
  }

  get k(): number {
    return this.session.k;
  }

  private firstUnreviewed(): number {
    for (let rank = 1; rank <= this.k; rank++) {
      if (!this.verdicts.has(rank)) return rank;
    }
    return this.k; // session complete: stay on the last proposal
  }

  current(): Proposal | undefined {
    return this.proposals.get(this.currentRank);
  }

  currentVerdict(): VerdictRecord | undefined {
    return this.verdicts.get(this.currentRank);
  }

  /** Navigation is gated on acknowledgment of any outstanding verdict. */
  blocked(): boolean {
    return this.submitting || this.queued !== null;
  }

  queuedSubmission(): QueuedSubmission | null {
    return this.queued;
  }

  /** Clamp into [1, k]; refuse to move while a verdict is unacknowledged. */
  goTo(rank: number): boolean {
    if (this.blocked()) return false;
    const clamped = Math.min(Math.max(rank, 1), this.k);
    if (clamped !== this.currentRank) {
      this.currentRank = clamped;
      this.pendingTypes.clear();
      this.resetView();
    }
    return true;
  }

  next(): boolean {
    return this.goTo(this.currentRank + 1);
  }

  prev(): boolean {
    return this.goTo(this.currentRank - 1);
  }

  toggleType(type: ErrorType): void {
    if (this.pendingTypes.has(type)) this.pendingTypes.delete(type);
    else this.pendingTypes.add(type);
  }

  /** A confirmation needs at least one error type; fp/unsure never carry any. */
  canSubmit(verdict: Verdict): boolean {
    return verdict !== "tp" || this.pendingTypes.size > 0;
  }

  async submit(verdict: Verdict): Promise<SubmitResult> {
    if (this.blocked()) {
      return { ok: false, reason: "a verdict is awaiting acknowledgment", queued: this.queued !== null };
    }
    if (!this.canSubmit(verdict)) {
      return { ok: false, reason: "tp needs at least one error type", queued: false };
    }
    const submission: QueuedSubmission = {
      rank: this.currentRank,
      verdict,
      errorTypes: verdict === "tp" ? [...this.pendingTypes] : [],
    };
    return this.send(submission);
  }

  /** Re-send the locally retained verdict after a network failure. */
  async retry(): Promise<SubmitResult> {
    if (this.submitting || this.queued === null) {
      return { ok: false, reason: "nothing to retry", queued: this.queued !== null };
    }
    const submission = this.queued;
    this.queued = null;
    return this.send(submission);
  }

  private async send(submission: QueuedSubmission): Promise<SubmitResult> {
    this.submitting = true;
    try {
      const ack = await this.api.verdict(
        submission.rank,
        submission.verdict,
        submission.errorTypes,
      );
      this.verdicts.set(ack.record.proposal_rank, ack.record);
      this.stats = ack.stats; // server fold, never client arithmetic
      this.pendingTypes.clear();
      this.submitting = false;
      if (submission.rank === this.currentRank) this.next();
      return { ok: true, rank: ack.record.proposal_rank };
    } catch (err) {
      this.submitting = false;
      if (err instanceof ApiError) {
        // the server saw and rejected it; retrying the same payload cannot help
        return { ok: false, reason: err.message, queued: false };
      }
      this.queued = submission; // network failure: retained until acknowledged
      const reason = err instanceof Error ? err.message : String(err);
      return { ok: false, reason, queued: true };
    }
  }

  async refreshStats(): Promise<Stats> {
    const stats = await this.api.stats();
    this.stats = stats;
    return stats;
  }

  toggleOverlay(part: keyof OverlayToggles): void {
    this.overlay[part] = !this.overlay[part];
  }

  zoomBy(factor: number): void {
    const zoom = this.view.zoom * factor;
    this.view.zoom = Math.min(Math.max(zoom, MIN_ZOOM), MAX_ZOOM);
  }

  panBy(dx: number, dy: number): void {
    this.view.panX += dx;
    this.view.panY += dy;
  }

  resetView(): void {
    this.view = { zoom: 1, panX: 0, panY: 0 };
  }
}
