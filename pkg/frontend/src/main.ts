import { HttpApiClient } from './api.js';
import { SessionController } from './controller.js';
import { HtmlAudioPlayer } from './player.js';
import { ListenUi } from './ui.js';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app container');

const controller = new SessionController({
  api: new HttpApiClient(''),
  player: new HtmlAudioPlayer(),
  calibrationUrl: 'calibration.wav',
});

new ListenUi(controller, root).render();
