/** Thin typed client over the annotation-service HTTP API.
 *
 * The transport is injectable so tests can script a mock service; the
 * component never talks to anything but this API.
 */

import type {
  Bootstrap,
  InstanceView,
  Label,
  RecordView,
  SbsView,
  SpanCoverage,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export interface ApiResult<T> {
  status: number;
  ok: boolean;
  conflict: boolean;
  body: T | null;
  errorDetail?: string;
}

export class ServiceClient {
  private base: string;
  private token?: string;
  private fetchLike: FetchLike;

  constructor(bootstrap: Bootstrap, fetchLike?: FetchLike) {
    this.base = bootstrap.serviceUrl.replace(/\/$/, "");
    this.token = bootstrap.annotatorToken;
    this.fetchLike =
      fetchLike ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<ApiResult<T>> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
    };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchLike(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const ok = response.status >= 200 && response.status < 300;
    let parsed: unknown = null;
    try {
      parsed = await response.json();
    } catch {
      parsed = null;
    }
    let errorDetail: string | undefined;
    if (!ok && parsed && typeof parsed === "object" && "detail" in parsed) {
      const detail = (parsed as { detail: unknown }).detail;
      errorDetail =
        detail && typeof detail === "object" && "error" in detail
          ? String((detail as { error: unknown }).error)
          : String(detail);
    }
    return {
      status: response.status,
      ok,
      conflict: response.status === 409 && errorDetail === "version-conflict",
      body: ok ? (parsed as T) : null,
      errorDetail,
    };
  }

  getRecord(recordId: string): Promise<ApiResult<RecordView>> {
    return this.request("GET", `/records/${recordId}`);
  }

  getInstance(instanceId: string): Promise<ApiResult<InstanceView>> {
    return this.request("GET", `/instances/${instanceId}`);
  }

  putSpan(
    recordId: string,
    span: SpanCoverage,
    expectedVersion: number,
  ): Promise<ApiResult<RecordView>> {
    return this.request("PUT", `/records/${recordId}/spans`, {
      span,
      expected_version: expectedVersion,
    });
  }

  putQA(
    recordId: string,
    qaId: string,
    label: Label,
    note: string | undefined,
    expectedVersion: number,
  ): Promise<ApiResult<RecordView>> {
    return this.request("PUT", `/records/${recordId}/qas/${qaId}`, {
      label,
      note: note ?? null,
      expected_version: expectedVersion,
    });
  }

  submit(
    recordId: string,
    expectedVersion: number,
  ): Promise<ApiResult<RecordView>> {
    return this.request("POST", `/records/${recordId}/submit`, {
      expected_version: expectedVersion,
    });
  }

  putSideBySide(
    pairId: string,
    annotatorId: string,
    likert: number,
  ): Promise<ApiResult<SbsView>> {
    return this.request("PUT", `/sbs/${pairId}`, {
      annotator_id: annotatorId,
      likert,
    });
  }
}
