// In-memory doubles honoring the service contract, plus a manual clock.

import { ApiClient, ApiError } from '../src/api.js';
import { Player } from '../src/player.js';
import { Batch, ParticipantInfo, RatingSubmission } from '../src/types.js';

export class ManualClock {
  t = 1_000_000;
  now = (): number => this.t;
  advance(ms: number): void {
    this.t += ms;
  }
}

export class FakePlayer implements Player {
  constructor(
    readonly clock: ManualClock,
    readonly clipMs: number = 3000,
  ) {}
  playedUrls: string[] = [];
  interruptNext = false;

  async play(url: string): Promise<boolean> {
    this.playedUrls.push(url);
    if (this.interruptNext) {
      this.interruptNext = false;
      this.clock.advance(Math.floor(this.clipMs / 2));
      return false;
    }
    this.clock.advance(this.clipMs);
    return true;
  }

  stop(): void {}
}

interface StoredRating extends RatingSubmission {
  session_id: string;
  batch_index: number;
}

export class FakeApi implements ApiClient {
  sessions = new Map<string, { info: ParticipantInfo; issued: Map<string, number>; batches: number }>();
  ratings: StoredRating[] = [];
  failNextSubmit = 0;
  private counter = 0;
  private stimulusCounter = 0;

  async createSession(info: ParticipantInfo): Promise<string> {
    if (info.familiarity < 1 || info.familiarity > 5) {
      throw new ApiError(422, 'familiarity out of range');
    }
    this.counter += 1;
    const id = `fake-${this.counter}`;
    this.sessions.set(id, { info, issued: new Map(), batches: 0 });
    return id;
  }

  async nextBatch(sessionId: string): Promise<Batch> {
    const sess = this.sessions.get(sessionId);
    if (!sess) throw new ApiError(404, 'unknown session');
    const stimuli = [];
    for (let i = 0; i < 5; i++) {
      const sid = `stim-${this.stimulusCounter++}`;
      sess.issued.set(sid, sess.batches);
      stimuli.push({
        stimulus_id: sid,
        audio_url: `/api/stimuli/${sid}/audio`,
        duration_s: 3.0,
      });
    }
    const batch = { batch_index: sess.batches, stimuli };
    sess.batches += 1;
    return batch;
  }

  async submitRating(sessionId: string, rating: RatingSubmission): Promise<void> {
    const sess = this.sessions.get(sessionId);
    if (!sess) throw new ApiError(404, 'unknown session');
    if (this.failNextSubmit > 0) {
      this.failNextSubmit -= 1;
      throw new ApiError(0, 'network down');
    }
    const batchIndex = sess.issued.get(rating.stimulus_id);
    if (batchIndex === undefined) throw new ApiError(404, 'stimulus not issued');
    if (this.ratings.some((r) => r.session_id === sessionId && r.stimulus_id === rating.stimulus_id)) {
      throw new ApiError(409, 'duplicate rating');
    }
    if (rating.score < 1 || rating.score > 5) throw new ApiError(422, 'score out of range');
    if (rating.listen_ms <= 0) throw new ApiError(422, 'listen_ms must be positive');
    this.ratings.push({ ...rating, session_id: sessionId, batch_index: batchIndex });
  }
}
