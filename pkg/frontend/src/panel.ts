/** Policy panel and card carousel view models. */

import type {
  GuidanceCardWire,
  InsightCardWire,
  LedgerEntryWire,
  PolicyWire,
  RippleSummaryWire,
  SessionView,
} from "./types.js";

export const POLICY_FIELD_LABELS: Record<string, string> = {
  subject: "Who",
  resource: "What",
  action: "Action",
  context: "When",
  description: "Description",
  explanation: "Explanation",
};

export const EDITABLE_FIELDS = Object.keys(POLICY_FIELD_LABELS);

/** Split a heading into its text and the propagation marker, if present. */
export function splitUpdatedMarker(heading: string): { text: string; updated: boolean } {
  const marker = " [Updated]";
  return heading.endsWith(marker)
    ? { text: heading.slice(0, -marker.length), updated: true }
    : { text: heading, updated: false };
}

/** Split a description into its text and the edit annotation, if present. */
export function splitEditMarker(description: string): { text: string; editNote: string | null } {
  const match = / \[Edit: ([^\]]*)\]$/.exec(description);
  if (!match) return { text: description, editNote: null };
  return { text: description.slice(0, match.index), editNote: match[1] };
}

export function rippleToast(summary: RippleSummaryWire): string {
  const lines = [summary.phase1.summary];
  if (summary.phase2 && !summary.phase2.skipped) lines.push(summary.phase2.summary);
  if (summary.phase1.degraded) lines.push("(kept original policies: propagation was incomplete)");
  lines.push(...summary.warnings);
  return lines.join(" — ");
}

export interface PolicyRow {
  policyNumber: string;
  fields: { field: string; label: string; value: string }[];
  elements: string[];
}

export function policyRows(policies: PolicyWire[]): PolicyRow[] {
  return policies.map((policy) => ({
    policyNumber: policy.policyNumber,
    fields: [
      { field: "subject", label: "Who", value: policy.subject },
      { field: "action", label: "Action", value: policy.action },
      { field: "resource", label: "What", value: policy.resource },
      { field: "context", label: "When", value: policy.context },
      { field: "description", label: "Description", value: policy.description },
    ],
    elements: policy.elements,
  }));
}

export type CarouselCard =
  | { kind: "guidance"; guidance: GuidanceCardWire }
  | { kind: "insight"; card: InsightCardWire; lifecycle: LedgerEntryWire["lifecycle"] }
  | { kind: "vignette"; card: InsightCardWire };

/** The carousel shows guidance cards in specify, insight cards in
 * analyze, and vignette cards in test; dismissed cards never appear. */
export function carouselCards(view: SessionView): CarouselCard[] {
  if (view.stage === "specify") {
    return (view.guidanceDeck ?? []).map((guidance) => ({ kind: "guidance", guidance }));
  }
  if (view.stage === "analyze") {
    return view.insights
      .filter((entry) => entry.lifecycle !== "dismissed" && entry.card.type !== "vignette")
      .map((entry) => ({ kind: "insight", card: entry.card, lifecycle: entry.lifecycle }));
  }
  return view.vignettes.map((card) => ({ kind: "vignette", card }));
}

export function outcomeBadge(card: InsightCardWire): string | null {
  return card.expectedOutcome ?? null;
}
