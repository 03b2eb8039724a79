import type { JobStatus, PreviewRequestConfig, Project } from './types.js';

export type Fetcher = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status: number, readonly detail?: unknown) {
    super(message);
  }
}

export class OfflineError extends Error {}

/**
 * Thin typed client for the animation service. All server access in the app
 * goes through this class, so the UI never mutates server state except via
 * the documented endpoints.
 */
export class ServiceClient {
  constructor(readonly baseUrl: string = '', private readonly fetcher: Fetcher = fetch.bind(globalThis)) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetcher(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new OfflineError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail: unknown;
      try {
        detail = (await response.json()).detail;
      } catch {
        detail = undefined;
      }
      throw new ApiError(`${init?.method ?? 'GET'} ${path} -> ${response.status}`, response.status, detail);
    }
    return (await response.json()) as T;
  }

  listProjects(): Promise<Project[]> {
    return this.request<Project[]>('/projects');
  }

  getProject(id: string): Promise<Project> {
    return this.request<Project>(`/projects/${id}`);
  }

  createProject(name: string, dataset?: string): Promise<Project> {
    return this.request<Project>('/projects', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ name, dataset: dataset ?? null }),
    });
  }

  frameUrl(projectId: string, index: number, full = false): string {
    return `${this.baseUrl}/projects/${projectId}/frames/${index}${full ? '?full=true' : ''}`;
  }

  renderFrameUrl(projectId: string, jobId: string, frame: number): string {
    return `${this.baseUrl}/projects/${projectId}/render/${jobId}/${frame}`;
  }

  submitJob(projectId: string, kind: string, config: Record<string, unknown>): Promise<JobStatus> {
    return this.request<JobStatus>(`/projects/${projectId}/jobs`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ kind, config }),
    });
  }

  submitPreview(projectId: string, config: PreviewRequestConfig): Promise<JobStatus> {
    return this.submitJob(projectId, 'interpolate', config);
  }

  getJob(projectId: string, jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/projects/${projectId}/jobs/${jobId}`);
  }

  listJobs(projectId: string): Promise<JobStatus[]> {
    return this.request<JobStatus[]>(`/projects/${projectId}/jobs`);
  }
}
