// Mirrors of the service's JSON schemas. The UI never invents course data:
// everything rendered originates from one of these payloads.

export type Confidence = "High" | "Medium" | "Low";

export type LevelSelection = "all" | "100-200" | "300-400" | "500+";

export const LEVEL_CHOICES: LevelSelection[] = ["all", "100-200", "300-400", "500+"];

export interface RecommendRequest {
  query: string;
  levels: LevelSelection;
  k?: number;
}

export interface ServerRecommendation {
  course_id: string;
  rationale: string;
  confidence: Confidence;
}

export interface ContextEntry {
  course_id: string;
  similarity: number;
  rank: number;
}

export interface RecommendResponse {
  recommendations: ServerRecommendation[];
  ideal_description: string;
  context: ContextEntry[];
  timing: { retrieval_ms: number; total_ms: number };
  warnings: string[];
}

export interface CourseDetail {
  course_id: string;
  level: number;
  subject: string;
  title: string;
  description: string;
}

export interface HealthInfo {
  status: string;
  catalog_size: number;
  dimension: number | null;
  provider_mode: string;
}

// A recommendation as the UI renders it: the server record joined with its
// similarity rank from the returned context.
export interface UiRecommendation {
  courseId: string;
  rationale: string;
  confidence: Confidence;
  similarityRank?: number;
}

export function toUiRecommendations(response: RecommendResponse): UiRecommendation[] {
  const rankOf = new Map(response.context.map((entry) => [entry.course_id, entry.rank]));
  return response.recommendations.map((rec) => ({
    courseId: rec.course_id,
    rationale: rec.rationale,
    confidence: rec.confidence,
    similarityRank: rankOf.get(rec.course_id),
  }));
}
