/** Client-side mirror of the service's stage machine.
 *
 * Stage controls built from this module can never offer a transition the
 * service would reject.
 */

import type { Stage } from "./types.js";

const LEGAL: Record<Stage, Stage[]> = {
  specify: ["analyze"],
  analyze: ["test"],
  test: ["analyze"],
};

export function legalTargets(stage: Stage): Stage[] {
  return [...LEGAL[stage]];
}

export function canEnter(stage: Stage, target: Stage): boolean {
  return LEGAL[stage].includes(target);
}

export const STAGE_ORDER: Stage[] = ["specify", "analyze", "test"];

export function stageLabel(stage: Stage): string {
  return stage.charAt(0).toUpperCase() + stage.slice(1);
}
