import type { ServiceClient } from './api.js';

export interface ScrubberOptions {
  pageSize?: number;
  onPick?: (frameIndex: number) => void;
}

/**
 * Source-clip browser: a slider over [0, frameCount-1] plus a lazily loaded
 * thumbnail grid. Clicking a thumbnail (or the slider's "pin" button) hands
 * the frame index to the timeline.
 */
export class FrameScrubber {
  readonly root: HTMLElement;
  private readonly grid: HTMLElement;
  private readonly slider: HTMLInputElement;
  private readonly pickButton: HTMLButtonElement;
  private readonly counter: HTMLElement;
  private loaded = 0;

  constructor(
    private readonly doc: Document,
    private readonly client: ServiceClient,
    private readonly projectId: string,
    readonly frameCount: number,
    private readonly options: ScrubberOptions = {},
  ) {
    this.root = doc.createElement('section');
    this.root.className = 'scrubber';

    const controls = doc.createElement('div');
    controls.className = 'scrubber-controls';
    this.slider = doc.createElement('input');
    this.slider.type = 'range';
    this.slider.min = '0';
    this.slider.max = String(Math.max(frameCount - 1, 0));
    this.slider.value = '0';
    this.counter = doc.createElement('span');
    this.counter.className = 'scrubber-counter';
    this.pickButton = doc.createElement('button');
    this.pickButton.textContent = 'pin keyframe';
    controls.append(this.slider, this.counter, this.pickButton);

    this.grid = doc.createElement('div');
    this.grid.className = 'thumb-grid';
    this.root.append(controls, this.grid);

    this.slider.addEventListener('input', () => this.updateCounter());
    this.pickButton.addEventListener('click', () => this.options.onPick?.(Number(this.slider.value)));
    this.updateCounter();
    this.loadMore();
  }

  get sliderRange(): [number, number] {
    return [Number(this.slider.min), Number(this.slider.max)];
  }

  private updateCounter(): void {
    this.counter.textContent = `frame ${this.slider.value} / ${this.frameCount - 1}`;
  }

  /** Append the next page of thumbnails; called initially and on demand. */
  loadMore(): number {
    const pageSize = this.options.pageSize ?? 60;
    const end = Math.min(this.loaded + pageSize, this.frameCount);
    for (let i = this.loaded; i < end; i++) {
      const img = this.doc.createElement('img');
      img.loading = 'lazy';
      img.src = this.client.frameUrl(this.projectId, i);
      img.alt = `frame ${i}`;
      img.dataset.frame = String(i);
      img.addEventListener('click', () => this.options.onPick?.(i));
      this.grid.appendChild(img);
    }
    this.loaded = end;
    return end;
  }

  thumbnails(): HTMLImageElement[] {
    return Array.from(this.grid.querySelectorAll('img'));
  }
}
