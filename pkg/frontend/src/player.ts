// Audio playback abstraction so the session logic stays testable off-browser.

export interface Player {
  /** Play a clip from the start; resolves true if it played to the end. */
  play(url: string): Promise<boolean>;
  stop(): void;
}

export class HtmlAudioPlayer implements Player {
  private audio: HTMLAudioElement | null = null;

  play(url: string): Promise<boolean> {
    this.stop();
    const audio = new Audio(url);
    this.audio = audio;
    return new Promise((resolve, reject) => {
      audio.addEventListener('ended', () => resolve(true));
      audio.addEventListener('pause', () => {
        if (!audio.ended) resolve(false);
      });
      audio.addEventListener('error', () => reject(new Error(`playback failed for ${url}`)));
      audio.play().catch(reject);
    });
  }

  stop(): void {
    if (this.audio && !this.audio.paused) this.audio.pause();
    this.audio = null;
  }
}
