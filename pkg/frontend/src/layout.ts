// Level-banded layout shared by the tree and CEG drawings: x grows with the
// variable level (scaled by the user's separation slider), nodes within a
// level are spread evenly down the band.

export interface LayoutNode {
  id: string;
  level: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface LevelLayout {
  points: Map<string, Point>;
  width: number;
  height: number;
}

const MARGIN_X = 70;
const MARGIN_Y = 40;
const ROW_GAP = 46;

export function layoutByLevel(nodes: readonly LayoutNode[], levelSeparation: number): LevelLayout {
  const byLevel = new Map<number, LayoutNode[]>();
  for (const node of nodes) {
    const bucket = byLevel.get(node.level);
    if (bucket) bucket.push(node);
    else byLevel.set(node.level, [node]);
  }
  const deepest = Math.max(0, ...byLevel.keys());
  const tallest = Math.max(1, ...[...byLevel.values()].map((b) => b.length));
  const height = Math.max(220, MARGIN_Y * 2 + (tallest - 1) * ROW_GAP);

  const points = new Map<string, Point>();
  for (const [level, bucket] of byLevel) {
    const x = MARGIN_X + level * levelSeparation;
    const step = bucket.length > 1 ? (height - 2 * MARGIN_Y) / (bucket.length - 1) : 0;
    bucket.forEach((node, i) => {
      const y = bucket.length > 1 ? MARGIN_Y + i * step : height / 2;
      points.set(node.id, { x, y });
    });
  }
  return { points, width: MARGIN_X * 2 + deepest * levelSeparation, height };
}

/** Quadratic path between two points, bowed so parallel edges stay distinct. */
export function edgePath(a: Point, b: Point, bow: number): string {
  const mx = (a.x + b.x) / 2;
  const my = (a.y + b.y) / 2;
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len = Math.hypot(dx, dy) || 1;
  const cx = mx - (dy / len) * bow;
  const cy = my + (dx / len) * bow;
  return `M ${a.x} ${a.y} Q ${cx} ${cy} ${b.x} ${b.y}`;
}

/** Offsets like 0, ±18, ±36 for the i-th of n edges sharing endpoints. */
export function parallelBow(index: number, total: number): number {
  if (total <= 1) return 0;
  const spread = 18;
  return (index - (total - 1) / 2) * 2 * spread;
}
