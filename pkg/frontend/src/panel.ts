/** Cluster panel state: thumbnails, representative highlight, relevance sliders. */

import type { ClusterPayload } from "./api.js";

export interface ClusterView {
  memberIds: number[];
  thumbUrls: string[];
  representativeId: number;
  weight: number; // slider value in [0, 1]
}

export class ClusterPanelState {
  clusters: ClusterView[] = [];

  loadFromResponse(clusters: ClusterPayload[]): void {
    this.clusters = clusters.map((c) => ({
      memberIds: c.member_ids.slice(),
      thumbUrls: c.thumb_urls.slice(),
      representativeId: c.representative_id,
      weight: 0,
    }));
  }

  setWeight(index: number, value: number): void {
    if (index < 0 || index >= this.clusters.length) {
      throw new RangeError(`no cluster at index ${index}`);
    }
    this.clusters[index].weight = Math.min(1, Math.max(0, value));
  }

  weights(): number[] {
    return this.clusters.map((c) => c.weight);
  }

  get hasTargets(): boolean {
    return this.clusters.length > 0;
  }

  get anyWeightSet(): boolean {
    return this.clusters.some((c) => c.weight > 0);
  }
}
