// Session state machine for the listening test.
//
// Screen order: demographics -> calibration -> instructions -> batch loop
// (listen, compare, rate, confirm) -> progress -> done.  A stimulus becomes
// ratable only after one full playback; all five ratings of a batch are
// sent together when the participant confirms, each carrying its own
// playback and response telemetry.

import { ApiClient } from './api.js';
import { Player } from './player.js';
import { Batch, ParticipantInfo, RatingSubmission } from './types.js';

export type Screen =
  | 'demographics'
  | 'calibration'
  | 'instructions'
  | 'batch'
  | 'progress'
  | 'done'
  | 'error';

export const SUGGESTED_MIN_RATINGS = 50;

export interface StimulusState {
  stimulusId: string;
  audioUrl: string;
  durationS: number;
  listenMs: number;
  playedFull: boolean;
  score: number | null;
  scoredAtMs: number | null;
  submitted: boolean;
}

export interface ControllerOptions {
  api: ApiClient;
  player: Player;
  now?: () => number;
  calibrationUrl?: string;
}

export class SessionController {
  readonly api: ApiClient;
  readonly player: Player;
  readonly now: () => number;
  readonly calibrationUrl: string;

  screen: Screen = 'demographics';
  sessionId: string | null = null;
  batch: Batch | null = null;
  stimuli: StimulusState[] = [];
  batchShownAtMs = 0;
  ratingsSubmitted = 0;
  lastError: string | null = null;
  private screenBeforeError: Screen = 'demographics';

  constructor(options: ControllerOptions) {
    this.api = options.api;
    this.player = options.player;
    this.now = options.now ?? (() => Date.now());
    this.calibrationUrl = options.calibrationUrl ?? 'calibration.wav';
  }

  async submitDemographics(info: ParticipantInfo): Promise<void> {
    this.expect('demographics');
    await this.guard(async () => {
      this.sessionId = await this.api.createSession(info);
      this.screen = 'calibration';
    });
  }

  async playCalibration(): Promise<void> {
    this.expect('calibration');
    await this.player.play(this.calibrationUrl);
  }

  finishCalibration(): void {
    this.expect('calibration');
    this.screen = 'instructions';
  }

  async acknowledgeInstructions(): Promise<void> {
    this.expect('instructions');
    await this.loadNextBatch();
  }

  async continueRating(): Promise<void> {
    this.expect('progress');
    await this.loadNextBatch();
  }

  finish(): void {
    // Allowed from the progress screen at any time: participation volume
    // is at the rater's discretion and the session stays valid server-side.
    this.expect('progress');
    this.screen = 'done';
  }

  private async loadNextBatch(): Promise<void> {
    await this.guard(async () => {
      const batch = await this.api.nextBatch(this.requireSession());
      this.batch = batch;
      // Presentation order is exactly the order the service returned.
      this.stimuli = batch.stimuli.map((s) => ({
        stimulusId: s.stimulus_id,
        audioUrl: s.audio_url,
        durationS: s.duration_s,
        listenMs: 0,
        playedFull: false,
        score: null,
        scoredAtMs: null,
        submitted: false,
      }));
      this.batchShownAtMs = this.now();
      this.screen = 'batch';
    });
  }

  /** Free relistening within the batch; accumulates playback time. */
  async playStimulus(index: number): Promise<void> {
    this.expect('batch');
    const stim = this.stimulusAt(index);
    const startedAt = this.now();
    const completed = await this.player.play(stim.audioUrl);
    stim.listenMs += this.now() - startedAt;
    if (completed) stim.playedFull = true;
  }

  canRate(index: number): boolean {
    return this.screen === 'batch' && this.stimulusAt(index).playedFull;
  }

  setScore(index: number, score: number): void {
    this.expect('batch');
    const stim = this.stimulusAt(index);
    if (!stim.playedFull) {
      throw new Error('listen to the full clip before rating it');
    }
    if (!Number.isInteger(score) || score < 1 || score > 5) {
      throw new Error(`score must be an integer in 1..5, got ${score}`);
    }
    stim.score = score;
    stim.scoredAtMs = this.now();
  }

  get batchComplete(): boolean {
    return this.stimuli.length > 0 && this.stimuli.every((s) => s.score !== null);
  }

  /** Send every rating of the batch; safe to retry after a network error. */
  async confirmBatch(): Promise<void> {
    this.expect('batch');
    if (!this.batchComplete) {
      throw new Error('rate all stimuli in the batch before confirming');
    }
    await this.guard(async () => {
      for (const stim of this.stimuli) {
        if (stim.submitted) continue;
        const rating: RatingSubmission = {
          stimulus_id: stim.stimulusId,
          score: stim.score as number,
          listen_ms: stim.listenMs,
          response_ms: (stim.scoredAtMs as number) - this.batchShownAtMs,
        };
        await this.api.submitRating(this.requireSession(), rating);
        stim.submitted = true;
        this.ratingsSubmitted += 1;
      }
      this.screen = 'progress';
    });
  }

  /** Re-run the step that failed, with all session state preserved. */
  async retry(): Promise<void> {
    this.expect('error');
    this.screen = this.screenBeforeError;
    this.lastError = null;
    if (this.screen === 'batch' && this.batchComplete) {
      await this.confirmBatch();
    } else if (this.screen === 'instructions') {
      await this.acknowledgeInstructions();
    } else if (this.screen === 'progress') {
      await this.continueRating();
    }
  }

  private async guard(step: () => Promise<void>): Promise<void> {
    const from = this.screen;
    try {
      await step();
    } catch (err) {
      this.screenBeforeError = from;
      this.lastError = err instanceof Error ? err.message : String(err);
      this.screen = 'error';
      throw err;
    }
  }

  private expect(screen: Screen): void {
    if (this.screen !== screen) {
      throw new Error(`action belongs to the ${screen} screen, current is ${this.screen}`);
    }
  }

  private stimulusAt(index: number): StimulusState {
    const stim = this.stimuli[index];
    if (!stim) throw new Error(`no stimulus at index ${index}`);
    return stim;
  }

  private requireSession(): string {
    if (!this.sessionId) throw new Error('no active session');
    return this.sessionId;
  }
}
