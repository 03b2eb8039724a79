/** Offline indicator: visible whenever the service is unreachable. */
export class OfflineBanner {
  readonly element: HTMLElement;
  private retryHandler: (() => void) | null = null;

  constructor(doc: Document) {
    this.element = doc.createElement('div');
    this.element.className = 'offline-banner';
    this.element.hidden = true;
    const text = doc.createElement('span');
    text.textContent = 'service unreachable — showing last known state';
    const retry = doc.createElement('button');
    retry.textContent = 'retry';
    retry.addEventListener('click', () => this.retryHandler?.());
    this.element.append(text, retry);
  }

  onRetry(handler: () => void): void {
    this.retryHandler = handler;
  }

  show(): void {
    this.element.hidden = false;
  }

  hide(): void {
    this.element.hidden = true;
  }

  get visible(): boolean {
    return !this.element.hidden;
  }
}
