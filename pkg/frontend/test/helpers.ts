import type { CourseDetail, RecommendResponse } from "../src/types.js";

export function fakeResponse(n = 10): RecommendResponse {
  const confidences = ["High", "Medium", "Low"] as const;
  const recommendations = Array.from({ length: n }, (_, i) => ({
    course_id: `SUBJ ${100 + i}`,
    rationale: `Covers requested topic ${i}.`,
    confidence: confidences[i % 3],
  }));
  const context = Array.from({ length: 50 }, (_, i) => ({
    course_id: `SUBJ ${100 + i}`,
    similarity: 1 - i / 100,
    rank: i + 1,
  }));
  return {
    recommendations,
    ideal_description: "An idealized description.",
    context,
    timing: { retrieval_ms: 12.5, total_ms: 40.2 },
    warnings: [],
  };
}

export function fakeCourse(courseId = "SUBJ 100"): CourseDetail {
  return {
    course_id: courseId,
    level: 100,
    subject: "SUBJ",
    title: "Topics in Testing",
    description: "A thorough treatment of fixtures and fakes.",
  };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
