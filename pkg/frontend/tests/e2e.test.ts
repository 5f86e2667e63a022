// Scripted end-to-end session against the real rating service:
// demographics -> calibration -> 3 batches (15 ratings) -> export check.

import { spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { HttpApiClient } from '../src/api.js';
import { SessionController } from '../src/controller.js';
import { FakePlayer, ManualClock } from './fakes.js';

const PORT = 8973;
const BASE = `http://127.0.0.1:${PORT}`;
const ADMIN_TOKEN = 'e2e-token';

function writeManifest(dir: string): string {
  const lines: string[] = [];
  let i = 0;
  for (let tier = 1; tier <= 5; tier++) {
    for (let k = 0; k < 5; k++) {
      lines.push(
        JSON.stringify({
          stimulus_id: `s${String(i).padStart(4, '0')}`,
          audio_path: `wav/s${i}.wav`,
          system_id: `sys${tier}`,
          speaker_id: `spk${tier}`,
          gender: i % 2 ? 'F' : 'M',
          dialect: 'es-AR',
          text: 'una frase de prueba',
          duration_s: 3.0,
          quality_tier: tier,
        }),
      );
      i += 1;
    }
  }
  const path = join(dir, 'manifest.jsonl');
  writeFileSync(path, lines.join('\n') + '\n');
  return path;
}

async function waitForServer(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/api/export`);
      if (resp.status > 0) return; // any HTTP status means the app is up
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error('rating service did not come up in time');
}

describe('end-to-end against the rating service', () => {
  let server: ChildProcess;

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), 'listen-ui-e2e-'));
    const manifest = writeManifest(dir);
    server = spawn(
      'python3',
      ['-m', 'mosaico.cli', 'serve', '--manifest', manifest, '--audio-root', dir,
       '--port', String(PORT), '--seed', '11'],
      { env: { ...process.env, MOSAICO_ADMIN_TOKEN: ADMIN_TOKEN }, stdio: 'ignore' },
    );
    await waitForServer();
  }, 30000);

  afterAll(() => {
    server?.kill();
  });

  it('completes 3 batches and the export holds exactly those ratings', async () => {
    const clock = new ManualClock();
    const player = new FakePlayer(clock);
    const controller = new SessionController({
      api: new HttpApiClient(BASE),
      player,
      now: clock.now,
    });

    await controller.submitDemographics({
      age: 31,
      gender: 'unspecified',
      nationality: 'Argentina',
      familiarity: 3,
      self_reported_normal_hearing: true,
    });
    await controller.playCalibration();
    controller.finishCalibration();
    await controller.acknowledgeInstructions();

    for (let batch = 0; batch < 3; batch++) {
      expect(controller.screen).toBe('batch');
      expect(controller.stimuli).toHaveLength(5);
      for (let i = 0; i < 5; i++) {
        await controller.playStimulus(i);
        clock.advance(700);
        controller.setScore(i, ((batch + i) % 5) + 1);
      }
      await controller.confirmBatch();
      expect(controller.screen).toBe('progress');
      if (batch < 2) await controller.continueRating();
    }
    controller.finish();
    expect(controller.ratingsSubmitted).toBe(15);

    const resp = await fetch(`${BASE}/api/export`, {
      headers: { 'X-Admin-Token': ADMIN_TOKEN },
    });
    expect(resp.status).toBe(200);
    const lines = (await resp.text()).trim().split('\n');
    expect(lines).toHaveLength(15);
    const ids = new Set<string>();
    for (const line of lines) {
      const record = JSON.parse(line);
      expect(record.session_id).toBe(controller.sessionId);
      expect(record.score).toBeGreaterThanOrEqual(1);
      expect(record.score).toBeLessThanOrEqual(5);
      expect(record.listen_ms).toBeGreaterThan(0);
      expect(record.response_ms).toBeGreaterThanOrEqual(record.listen_ms);
      expect([0, 1, 2]).toContain(record.batch_index);
      ids.add(record.stimulus_id);
    }
    expect(ids.size).toBe(15);
  }, 30000);
});
