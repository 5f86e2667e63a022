import { Batch, ParticipantInfo, RatingSubmission } from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export interface ApiClient {
  createSession(info: ParticipantInfo): Promise<string>;
  nextBatch(sessionId: string): Promise<Batch>;
  submitRating(sessionId: string, rating: RatingSubmission): Promise<void>;
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && body.detail) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class HttpApiClient implements ApiClient {
  constructor(readonly baseUrl: string = '') {}

  async createSession(info: ParticipantInfo): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/api/sessions`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(info),
    });
    if (!resp.ok) throw await parseError(resp);
    const body = await resp.json();
    return body.session_id as string;
  }

  async nextBatch(sessionId: string): Promise<Batch> {
    const resp = await fetch(`${this.baseUrl}/api/sessions/${sessionId}/batch`);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as Batch;
  }

  async submitRating(sessionId: string, rating: RatingSubmission): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/api/sessions/${sessionId}/ratings`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(rating),
    });
    // 409 means the service already holds this rating (e.g. a retried
    // batch submission); the participant's intent is satisfied either way.
    if (!resp.ok && resp.status !== 409) throw await parseError(resp);
  }
}
