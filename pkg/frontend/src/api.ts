/** Typed client for the review service JSON API. All payloads lower_snake_case. */

export type Verdict = "tp" | "fp" | "unsure";
export type ErrorType = "drop" | "flip" | "shift" | "spawn";

/** Boxes travel as [cx, cy, w, h] in image pixel coordinates. */
export type WireBox = [number, number, number, number];

export interface SessionInfo {
  session_id: string;
  k: number;
  num_proposals: number;
  method: string | null;
  reviewed: number;
  num_images: number;
  num_labels: number;
  class_names: string[];
  has_images: boolean;
}

export interface VerdictRecord {
  proposal_rank: number;
  verdict: Verdict;
  error_types: ErrorType[];
  reviewer: string;
  timestamp: string;
}

export interface Proposal {
  rank: number;
  image_id: number;
  box: WireBox;
  key: number;
  method: string;
  predicted_class: number;
  components: Record<string, number>;
  source: string;
  label_ref: number | null;
  verdict: VerdictRecord | null;
}

export interface ProposalPage {
  offset: number;
  total: number;
  items: Proposal[];
}

export interface Stats {
  reviewed: number;
  counts: { tp: number; fp: number; unsure: number };
  precision: number | null;
  per_type: Record<ErrorType, number>;
}

export interface VerdictAck {
  ok: boolean;
  record: VerdictRecord;
  stats: Stats;
}

export interface ImageLabel {
  id: number;
  class_id: number;
  class_name: string;
  box: WireBox;
}

export interface ImageLabels {
  image_id: number;
  width: number;
  height: number;
  file_name: string | null;
  labels: ImageLabel[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(resp: Response): Promise<string> {
  const text = await resp.text();
  try {
    const body = JSON.parse(text);
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // not JSON; fall through to the raw body
  }
  return text || resp.statusText;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path);
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return (await resp.json()) as T;
  }

  session(): Promise<SessionInfo> {
    return this.getJson("/api/session");
  }

  proposals(offset: number, limit: number): Promise<ProposalPage> {
    return this.getJson(`/api/proposals?offset=${offset}&limit=${limit}`);
  }

  labels(imageId: number): Promise<ImageLabels> {
    return this.getJson(`/api/image/${imageId}/labels`);
  }

  stats(): Promise<Stats> {
    return this.getJson("/api/stats");
  }

  imageUrl(imageId: number): string {
    return `${this.baseUrl}/api/image/${imageId}`;
  }

  async verdict(rank: number, verdict: Verdict, errorTypes: ErrorType[]): Promise<VerdictAck> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        proposal_rank: rank,
        verdict,
        error_types: errorTypes,
      }),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return (await resp.json()) as VerdictAck;
  }

  /** Page through /api/proposals until every served rank is collected. */
  async allProposals(pageSize = 100): Promise<Proposal[]> {
    const out: Proposal[] = [];
    let offset = 0;
    for (;;) {
      const page = await this.proposals(offset, pageSize);
      out.push(...page.items);
      offset += page.items.length;
      if (offset >= page.total || page.items.length === 0) return out;
    }
  }
}
