/**
 * Typed client for the spanweak annotation service.
 *
 * Every endpoint returns an envelope: {status: "ok", payload} on success or
 * {status: "error", error: {code, message}} on failure. Failures are thrown
 * as ApiError so callers can branch on the machine-readable code.
 */

import { z } from "zod";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly httpStatus: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

const envelopeSchema = z.union([
  z.object({ status: z.literal("ok"), payload: z.unknown() }),
  z.object({
    status: z.literal("error"),
    error: z.object({ code: z.string(), message: z.string() }),
  }),
]);

export const tokenSchema = z.object({
  text: z.string(),
  pos: z.string(),
  dep: z.string(),
  ner: z.string(),
});

export const nextDocSchema = z.object({
  doc_id: z.string(),
  strategy: z.string(),
  split: z.string(),
  tokens: z.array(tokenSchema),
});

export const lfStatsSchema = z.object({
  coverage: z.number(),
  dev_precision: z.number().nullable(),
  dev_votes: z.number().optional(),
  doc_coverage: z.number().optional(),
  conflict_rate: z.number().optional(),
});

export const lfSchema = z.object({
  id: z.string(),
  name: z.string(),
  target: z.string(),
  polarity: z.string(),
  vote: z.string(),
  selected: z.boolean(),
  stats: lfStatsSchema,
});

export const lfListSchema = z.object({
  suggested: z.array(lfSchema),
  selected: z.array(lfSchema),
});

export const metricsSchema = z.object({
  per_class: z.record(
    z.object({ precision: z.number(), recall: z.number(), f1: z.number() }),
  ),
  micro_precision: z.number(),
  micro_recall: z.number(),
  micro_f1: z.number(),
});

export const modelSchema = z.object({
  status: z.enum(["none", "stale", "fresh", "fitting"]),
  model: z.string(),
  fit_error: z.string().nullable(),
  metrics: metricsSchema.nullable(),
  lf_stats: z.record(z.unknown()).nullable(),
  fit_seconds: z.number().nullable(),
  selected_hash: z.string().nullable(),
});

export const falsePositiveSchema = z.object({
  doc_id: z.string(),
  start: z.number(),
  end: z.number(),
  vote: z.string(),
  gold: z.array(z.string()),
  context_tokens: z.array(z.string()),
  context_offset: z.number(),
});

export const feedbackSchema = z.object({
  lf_id: z.string(),
  dev_precision: z.number().nullable(),
  dev_votes: z.number(),
  train_coverage: z.number(),
  dev_false_positives: z.array(falsePositiveSchema),
  train_sample: z.array(
    z.object({
      doc_id: z.string(),
      start: z.number(),
      end: z.number(),
      context_tokens: z.array(z.string()),
      context_offset: z.number(),
    }),
  ),
});

export const projectInfoSchema = z.object({
  classes: z.array(z.string()),
  model: z.string(),
  tau_default: z.number(),
  docs: z.record(z.number()),
  annotations: z.number(),
  suggested: z.number(),
  selected: z.array(z.string()),
});

export const annotationResponseSchema = z.object({
  suggestions: z.array(lfSchema),
});

export type Token = z.infer<typeof tokenSchema>;
export type NextDoc = z.infer<typeof nextDocSchema>;
export type Lf = z.infer<typeof lfSchema>;
export type LfList = z.infer<typeof lfListSchema>;
export type Metrics = z.infer<typeof metricsSchema>;
export type ModelState = z.infer<typeof modelSchema>;
export type Feedback = z.infer<typeof feedbackSchema>;
export type ProjectInfo = z.infer<typeof projectInfoSchema>;

export interface AnnotationRequest {
  doc_id: string;
  start: number;
  end: number;
  label: string;
  polarity: "positive" | "negative";
}

/** Unwrap one envelope, throwing ApiError on the error arm. */
export function unwrapEnvelope(body: unknown, httpStatus: number): unknown {
  const parsed = envelopeSchema.parse(body);
  if (parsed.status === "error") {
    throw new ApiError(parsed.error.code, parsed.error.message, httpStatus);
  }
  return parsed.payload;
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private async request(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
  ): Promise<unknown> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return unwrapEnvelope(await resp.json(), resp.status);
  }

  async projectInfo(): Promise<ProjectInfo> {
    return projectInfoSchema.parse(await this.request("GET", "/project"));
  }

  async nextDoc(): Promise<NextDoc> {
    return nextDocSchema.parse(await this.request("GET", "/next_doc"));
  }

  async submitAnnotation(req: AnnotationRequest): Promise<Lf[]> {
    const payload = await this.request("POST", "/annotations", req);
    return annotationResponseSchema.parse(payload).suggestions;
  }

  async listLfs(): Promise<LfList> {
    return lfListSchema.parse(await this.request("GET", "/lfs"));
  }

  async selectLf(id: string): Promise<void> {
    await this.request("POST", `/lfs/${id}/select`);
  }

  async deselectLf(id: string): Promise<void> {
    await this.request("POST", `/lfs/${id}/deselect`);
  }

  async feedback(id: string): Promise<Feedback> {
    return feedbackSchema.parse(
      await this.request("GET", `/lfs/${id}/feedback`),
    );
  }

  async model(): Promise<ModelState> {
    return modelSchema.parse(await this.request("GET", "/model"));
  }

  async retrain(): Promise<void> {
    await this.request("POST", "/retrain");
  }

  async save(): Promise<void> {
    await this.request("POST", "/save");
  }
}
