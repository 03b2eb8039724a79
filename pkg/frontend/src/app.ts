import { OfflineError, ServiceClient } from './api.js';
import { OfflineBanner } from './banner.js';
import { requestComparison, stripElement, ValidationFailed } from './preview.js';
import { FrameScrubber } from './scrubber.js';
import { TimelineModel } from './timeline.js';
import type { Project } from './types.js';

/**
 * Single-page workspace. All state lives on the server or in the timeline
 * model; a refresh rebuilds the whole view from server state alone.
 */
export class StudioApp {
  readonly timeline = new TimelineModel();
  readonly banner: OfflineBanner;
  private project: Project | null = null;
  private scrubber: FrameScrubber | null = null;

  constructor(
    private readonly doc: Document,
    private readonly client: ServiceClient,
    private readonly root: HTMLElement,
  ) {
    this.banner = new OfflineBanner(doc);
    this.banner.onRetry(() => void this.reload());
  }

  async reload(projectId?: string): Promise<void> {
    const id = projectId ?? this.project?.id;
    if (!id) {
      return;
    }
    try {
      this.project = await this.client.getProject(id);
      this.banner.hide();
    } catch (err) {
      if (err instanceof OfflineError) {
        this.banner.show();
        return;
      }
      throw err;
    }
    this.render();
  }

  async open(projectId: string): Promise<void> {
    await this.reload(projectId);
  }

  private render(): void {
    const doc = this.doc;
    this.root.textContent = '';
    this.root.appendChild(this.banner.element);
    if (!this.project) {
      return;
    }

    const header = doc.createElement('header');
    const title = doc.createElement('h1');
    title.textContent = this.project.name;
    const count = doc.createElement('p');
    count.className = 'frame-count';
    count.textContent =
      this.project.frame_count != null ? `${this.project.frame_count} frames` : 'no dataset attached';
    header.append(title, count);
    this.root.appendChild(header);

    if (this.project.frame_count) {
      this.scrubber = new FrameScrubber(doc, this.client, this.project.id, this.project.frame_count, {
        onPick: (index) => {
          this.timeline.addKeyframe(index);
          this.renderTimeline();
        },
      });
      this.root.appendChild(this.scrubber.root);
    }

    const timelineSection = doc.createElement('section');
    timelineSection.className = 'timeline';
    this.root.appendChild(timelineSection);
    this.renderTimeline();

    const previewSection = doc.createElement('section');
    previewSection.className = 'preview';
    this.root.appendChild(previewSection);
  }

  renderTimeline(): void {
    const section = this.root.querySelector<HTMLElement>('.timeline');
    if (!section || !this.project) {
      return;
    }
    const doc = this.doc;
    section.textContent = '';
    const list = doc.createElement('ol');
    list.className = 'timeline-entries';
    this.timeline.entries.forEach((entry, index) => {
      const item = doc.createElement('li');
      item.dataset.entry = String(index);
      const thumb = doc.createElement('img');
      if (typeof entry.ref === 'number') {
        thumb.src = this.client.frameUrl(this.project!.id, entry.ref);
        thumb.alt = `keyframe ${entry.ref}`;
      } else {
        thumb.src = entry.ref;
        thumb.alt = 'uploaded keyframe';
      }
      const transition = doc.createElement('input');
      transition.value = entry.transitionSeconds;
      transition.title = 'transition seconds';
      transition.addEventListener('input', () => (entry.transitionSeconds = transition.value));
      const hold = doc.createElement('input');
      hold.value = entry.holdSeconds;
      hold.title = 'hold seconds';
      hold.addEventListener('input', () => (entry.holdSeconds = hold.value));
      const remove = doc.createElement('button');
      remove.textContent = 'remove';
      remove.addEventListener('click', () => {
        this.timeline.removeKeyframe(index);
        this.renderTimeline();
      });
      const issueBox = doc.createElement('span');
      issueBox.className = 'entry-issues';
      item.append(thumb, transition, hold, remove, issueBox);
      list.appendChild(item);
    });
    section.appendChild(list);

    const params = doc.createElement('div');
    params.className = 'blend-params';
    for (const name of ['alpha', 'beta', 'lambda', 'k'] as const) {
      const label = doc.createElement('label');
      label.textContent = name;
      const input = doc.createElement('input');
      input.name = name;
      input.value = this.timeline.blend[name];
      input.addEventListener('input', () => (this.timeline.blend[name] = input.value));
      label.appendChild(input);
      params.appendChild(label);
    }
    const fpsLabel = doc.createElement('label');
    fpsLabel.textContent = 'fps';
    const fps = doc.createElement('input');
    fps.name = 'fps';
    fps.value = this.timeline.fps;
    fps.addEventListener('input', () => (this.timeline.fps = fps.value));
    fpsLabel.appendChild(fps);
    params.appendChild(fpsLabel);
    section.appendChild(params);

    const go = doc.createElement('button');
    go.className = 'request-preview';
    go.textContent = 'render preview';
    go.addEventListener('click', () => void this.runPreview());
    section.appendChild(go);
  }

  /** Submit the comparison render and show both strips when it completes. */
  async runPreview(): Promise<void> {
    if (!this.project) {
      return;
    }
    const section = this.root.querySelector<HTMLElement>('.preview');
    if (!section) {
      return;
    }
    this.clearInlineIssues();
    try {
      const { raw, denoised } = await requestComparison(this.client, this.project.id, this.timeline);
      section.textContent = '';
      section.appendChild(stripElement(this.doc, raw, 'generator'));
      section.appendChild(stripElement(this.doc, denoised, 'denoised'));
      if (!raw.roundTripExact || !denoised.roundTripExact) {
        const warn = this.doc.createElement('p');
        warn.className = 'round-trip-warning';
        warn.textContent = 'server echoed different parameters than submitted';
        section.appendChild(warn);
      }
    } catch (err) {
      if (err instanceof ValidationFailed) {
        this.showInlineIssues(err);
        return;
      }
      if (err instanceof OfflineError) {
        this.banner.show();
        return;
      }
      const failure = this.doc.createElement('p');
      failure.className = 'preview-error';
      failure.textContent = String(err);
      section.textContent = '';
      section.appendChild(failure);
    }
  }

  private clearInlineIssues(): void {
    for (const box of Array.from(this.root.querySelectorAll('.entry-issues, .global-issues'))) {
      box.textContent = '';
    }
  }

  private showInlineIssues(failure: ValidationFailed): void {
    const section = this.root.querySelector<HTMLElement>('.timeline');
    if (!section) {
      return;
    }
    let global = section.querySelector<HTMLElement>('.global-issues');
    if (!global) {
      global = this.doc.createElement('p');
      global.className = 'global-issues';
      section.appendChild(global);
    }
    for (const issue of failure.issues) {
      if (issue.entry < 0) {
        global.textContent = [global.textContent, issue.message].filter(Boolean).join('; ');
      } else {
        const box = section.querySelector<HTMLElement>(`li[data-entry="${issue.entry}"] .entry-issues`);
        if (box) {
          box.textContent = issue.message;
        }
      }
    }
  }
}

export function boot(doc: Document, win: Window & typeof globalThis): StudioApp {
  const params = new URLSearchParams(win.location.search);
  const base = params.get('api') ?? '';
  const client = new ServiceClient(base);
  const root = doc.getElementById('app') ?? doc.body;
  const app = new StudioApp(doc, client, root as HTMLElement);
  const projectId = params.get('project');
  if (projectId) {
    void app.open(projectId);
  } else {
    void client
      .listProjects()
      .then((projects) => {
        if (projects.length > 0) {
          return app.open(projects[0].id);
        }
        (root as HTMLElement).textContent = 'no projects yet — create one via the service API';
        return undefined;
      })
      .catch(() => app.banner.show());
    (root as HTMLElement).appendChild(app.banner.element);
  }
  return app;
}
