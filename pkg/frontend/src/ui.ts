// DOM rendering for each protocol screen.

import { SessionController, SUGGESTED_MIN_RATINGS } from './controller.js';
import { ParticipantInfo } from './types.js';

export const INSTRUCTIONS_ES =
  'Estás a punto de escuchar una serie de clips de audio cortos con distintos ' +
  'tipos de voces. Algunas de estas voces pueden sonar más humanas, mientras ' +
  'que otras pueden sonar más robóticas. El propósito de esta prueba es ' +
  'evaluar la calidad de cada voz. Para ello, calificarás las voces en una ' +
  'escala de naturalidad de 5 puntos, donde 5 indica una voz completamente ' +
  'natural y 1 representa una voz completamente artificial.';

export const SCALE_LABELS: ReadonlyArray<string> = [
  '1 · completamente artificial',
  '2',
  '3',
  '4',
  '5 · completamente natural',
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ListenUi {
  constructor(
    readonly controller: SessionController,
    readonly root: HTMLElement,
  ) {}

  render(): void {
    this.root.replaceChildren();
    switch (this.controller.screen) {
      case 'demographics':
        return this.renderDemographics();
      case 'calibration':
        return this.renderCalibration();
      case 'instructions':
        return this.renderInstructions();
      case 'batch':
        return this.renderBatch();
      case 'progress':
        return this.renderProgress();
      case 'done':
        return this.renderDone();
      case 'error':
        return this.renderError();
    }
  }

  private async run(action: () => Promise<void> | void): Promise<void> {
    try {
      await action();
    } catch {
      // Controller already captured the error state; just re-render.
    }
    this.render();
  }

  private renderDemographics(): void {
    const form = el('form', { id: 'demographics' });
    form.append(
      this.labeled('Edad', el('input', { name: 'age', type: 'number', min: '18', value: '30' })),
      this.labeled(
        'Género',
        this.select('gender', [
          ['F', 'Femenino'],
          ['M', 'Masculino'],
          ['unspecified', 'Prefiero no decirlo'],
        ]),
      ),
      this.labeled('Nacionalidad', el('input', { name: 'nationality', value: 'Argentina' })),
      this.labeled(
        'Familiaridad con asistentes de voz (1-5)',
        el('input', { name: 'familiarity', type: 'number', min: '1', max: '5', value: '3' }),
      ),
      this.labeled(
        'Declaro tener audición normal',
        el('input', { name: 'hearing', type: 'checkbox', checked: 'checked' }),
      ),
    );
    const submit = el('button', { type: 'submit' }, 'Comenzar');
    form.append(submit);
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      const data = new FormData(form);
      const info: ParticipantInfo = {
        age: Number(data.get('age')),
        gender: data.get('gender') as ParticipantInfo['gender'],
        nationality: String(data.get('nationality') ?? ''),
        familiarity: Number(data.get('familiarity')),
        self_reported_normal_hearing: data.get('hearing') === 'on',
      };
      void this.run(() => this.controller.submitDemographics(info));
    });
    this.root.append(el('h1', {}, 'Prueba de naturalidad de voces'), form);
  }

  private renderCalibration(): void {
    this.root.append(
      el('h2', {}, 'Calibración de volumen'),
      el(
        'p',
        {},
        'Reproducí el clip de referencia y ajustá el volumen de tu dispositivo ' +
          'a un nivel cómodo antes de continuar.',
      ),
    );
    const play = el('button', { id: 'play-calibration' }, 'Reproducir referencia');
    play.addEventListener('click', () => void this.run(() => this.controller.playCalibration()));
    const done = el('button', { id: 'calibration-done' }, 'Continuar');
    done.addEventListener('click', () => void this.run(() => this.controller.finishCalibration()));
    this.root.append(play, done);
  }

  private renderInstructions(): void {
    this.root.append(el('h2', {}, 'Instrucciones'), el('p', { id: 'instructions' }, INSTRUCTIONS_ES));
    const start = el('button', { id: 'start-batches' }, 'Empezar');
    start.addEventListener('click', () =>
      void this.run(() => this.controller.acknowledgeInstructions()),
    );
    this.root.append(start);
  }

  private renderBatch(): void {
    const { controller } = this;
    this.root.append(
      el('h2', {}, `Lote ${(controller.batch?.batch_index ?? 0) + 1}`),
      el('p', {}, 'Escuchá los cinco clips; podés repetirlos y compararlos antes de calificar.'),
    );
    const list = el('ol', { id: 'batch' });
    controller.stimuli.forEach((stim, index) => {
      const item = el('li', { 'data-stimulus': stim.stimulusId });
      const play = el('button', { class: 'play' }, stim.playedFull ? 'Repetir' : 'Escuchar');
      play.addEventListener('click', () =>
        void this.run(() => controller.playStimulus(index)),
      );
      item.append(play);
      const scale = el('fieldset', { class: 'scale' });
      if (!controller.canRate(index)) scale.setAttribute('disabled', 'disabled');
      SCALE_LABELS.forEach((label, pos) => {
        const score = pos + 1;
        const radio = el('input', {
          type: 'radio',
          name: `score-${index}`,
          value: String(score),
        });
        if (stim.score === score) radio.setAttribute('checked', 'checked');
        radio.addEventListener('change', () =>
          void this.run(() => controller.setScore(index, score)),
        );
        const wrap = el('label');
        wrap.append(radio, document.createTextNode(` ${label}`));
        scale.append(wrap);
      });
      item.append(scale);
      list.append(item);
    });
    this.root.append(list);
    const confirm = el('button', { id: 'confirm-batch' }, 'Confirmar calificaciones');
    if (!controller.batchComplete) confirm.setAttribute('disabled', 'disabled');
    confirm.addEventListener('click', () => void this.run(() => controller.confirmBatch()));
    this.root.append(confirm);
  }

  private renderProgress(): void {
    const n = this.controller.ratingsSubmitted;
    this.root.append(
      el('h2', {}, 'Progreso'),
      el('p', { id: 'progress' }, `Calificaste ${n} clips.`),
      el(
        'p',
        {},
        n < SUGGESTED_MIN_RATINGS
          ? `Sugerimos llegar a ${SUGGESTED_MIN_RATINGS}, pero podés salir cuando quieras.`
          : '¡Gracias! Podés seguir o terminar cuando quieras.',
      ),
    );
    const cont = el('button', { id: 'continue' }, 'Seguir calificando');
    cont.addEventListener('click', () => void this.run(() => this.controller.continueRating()));
    const exit = el('button', { id: 'exit' }, 'Terminar');
    exit.addEventListener('click', () => void this.run(() => this.controller.finish()));
    this.root.append(cont, exit);
  }

  private renderDone(): void {
    this.root.append(
      el('h2', {}, '¡Listo!'),
      el('p', {}, `Gracias por participar: registramos ${this.controller.ratingsSubmitted} calificaciones.`),
    );
  }

  private renderError(): void {
    this.root.append(
      el('h2', {}, 'Error de conexión'),
      el('p', { id: 'error' }, this.controller.lastError ?? 'error desconocido'),
    );
    const retry = el('button', { id: 'retry' }, 'Reintentar');
    retry.addEventListener('click', () => void this.run(() => this.controller.retry()));
    this.root.append(retry);
  }

  private labeled(text: string, control: HTMLElement): HTMLElement {
    const wrap = el('label');
    wrap.append(document.createTextNode(`${text}: `), control);
    return wrap;
  }

  private select(name: string, options: Array<[string, string]>): HTMLSelectElement {
    const node = el('select', { name });
    for (const [value, label] of options) node.append(el('option', { value }, label));
    return node;
  }
}
