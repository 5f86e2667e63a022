// Wire types of the rating-service HTTP API.

export interface ParticipantInfo {
  age: number;
  gender: 'M' | 'F' | 'unspecified';
  nationality: string;
  familiarity: number; // 1..5
  self_reported_normal_hearing: boolean;
}

export interface BatchStimulus {
  stimulus_id: string;
  audio_url: string;
  duration_s: number;
}

export interface Batch {
  batch_index: number;
  stimuli: BatchStimulus[];
}

export interface RatingSubmission {
  stimulus_id: string;
  score: number; // 1..5
  listen_ms: number;
  response_ms: number;
}
