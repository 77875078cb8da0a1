/**
 * Renders a protocol as an SVG state graph: states as circles, transitions
 * as role-labeled edges, the process's current state highlighted. Pure
 * string-in string-out so it can be tested without a DOM.
 *
 * Enablement is display-only here: edges listed in enabledIds get the
 * "enabled" class, everything else renders muted. The clickable controls
 * live outside the graph and are built strictly from the server's
 * available-transitions response.
 */

import type { EditDoc, ProtocolDoc, StateDoc, TransitionDoc } from './types.js';

const NODE_R = 26;
const COL_W = 185;
const ROW_H = 115;
const PAD_X = 70;
const PAD_Y = 58;

type Diff = 'added' | 'removed' | 'rebound';

interface DiffState extends StateDoc {
  diff?: Diff;
}

interface DiffTransition extends TransitionDoc {
  diff?: Diff;
}

export interface GraphOptions {
  currentState?: string | null;
  enabledIds?: ReadonlySet<string>;
  /** Overlay a patch as a visual diff instead of applying it. */
  patch?: EditDoc[];
}

/**
 * Merge a patch into the protocol for display: additions and removals stay
 * visible but carry a diff marker. Never used to compute behavior.
 */
export function overlayPatch(
  protocol: ProtocolDoc,
  patch: EditDoc[],
): { states: DiffState[]; transitions: DiffTransition[] } {
  const states: DiffState[] = protocol.states.map((s) => ({ ...s }));
  const transitions: DiffTransition[] = protocol.transitions.map((t) => ({ ...t }));
  for (const edit of patch) {
    switch (edit.op) {
      case 'add_state':
        states.push({ ...edit.state, diff: 'added' });
        break;
      case 'remove_state': {
        const s = states.find((x) => x.id === edit.state_id);
        if (s) s.diff = 'removed';
        break;
      }
      case 'add_transition':
        transitions.push({ ...edit.transition, diff: 'added' });
        break;
      case 'remove_transition': {
        const t = transitions.find((x) => x.id === edit.transition_id);
        if (t) t.diff = 'removed';
        break;
      }
      case 'bind_action': {
        const t = transitions.find((x) => x.id === edit.transition_id);
        if (t) {
          t.action = { name: t.action.name, binding: edit.uri };
          t.diff = t.diff ?? 'rebound';
        }
        break;
      }
      case 'unbind_action': {
        const t = transitions.find((x) => x.id === edit.transition_id);
        if (t) {
          t.action = { name: t.action.name, binding: null };
          t.diff = t.diff ?? 'rebound';
        }
        break;
      }
      case 'bind_role':
      case 'unbind_role':
        break; // no geometry to show
    }
  }
  return { states, transitions };
}

/** Deterministic layered layout: columns by BFS depth from the start states. */
function layout(states: DiffState[], transitions: DiffTransition[]): Map<string, { x: number; y: number }> {
  const depth = new Map<string, number>();
  const queue: string[] = [];
  for (const s of [...states].sort((a, b) => a.id.localeCompare(b.id))) {
    if (s.kind === 'start') {
      depth.set(s.id, 0);
      queue.push(s.id);
    }
  }
  while (queue.length > 0) {
    const here = queue.shift() as string;
    const d = depth.get(here) as number;
    const next = transitions
      .filter((t) => t.from === here && t.to !== here)
      .map((t) => t.to)
      .sort();
    for (const to of next) {
      if (!depth.has(to)) {
        depth.set(to, d + 1);
        queue.push(to);
      }
    }
  }
  const fallback = Math.max(0, ...depth.values()) + 1;
  for (const s of states) {
    if (!depth.has(s.id)) depth.set(s.id, fallback); // disconnected fragments still render
  }

  const byColumn = new Map<number, string[]>();
  for (const s of [...states].sort((a, b) => a.id.localeCompare(b.id))) {
    const d = depth.get(s.id) as number;
    const column = byColumn.get(d) ?? [];
    column.push(s.id);
    byColumn.set(d, column);
  }
  const positions = new Map<string, { x: number; y: number }>();
  for (const [d, ids] of byColumn) {
    ids.forEach((id, i) => {
      positions.set(id, { x: PAD_X + d * COL_W, y: PAD_Y + i * ROW_H });
    });
  }
  return positions;
}

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function edgePath(
  from: { x: number; y: number },
  to: { x: number; y: number },
  lane: number,
): { d: string; lx: number; ly: number } {
  if (from.x === to.x && from.y === to.y) {
    // self loop: arc above the node
    const r = NODE_R;
    const d = `M ${from.x - r * 0.6} ${from.y - r * 0.8} C ${from.x - r * 2.2} ${from.y - r * 3.1 - lane * 24}, ${
      from.x + r * 2.2
    } ${from.y - r * 3.1 - lane * 24}, ${from.x + r * 0.6} ${from.y - r * 0.8}`;
    return { d, lx: from.x, ly: from.y - r * 3.0 - lane * 24 };
  }
  const dx = to.x - from.x;
  const dy = to.y - from.y;
  const len = Math.hypot(dx, dy) || 1;
  const ux = dx / len;
  const uy = dy / len;
  const sx = from.x + ux * NODE_R;
  const sy = from.y + uy * NODE_R;
  const ex = to.x - ux * (NODE_R + 7);
  const ey = to.y - uy * (NODE_R + 7);
  // parallel edges bow out on alternating sides
  const bow = lane === 0 ? 0 : Math.ceil(lane / 2) * 26 * (lane % 2 === 1 ? 1 : -1);
  const mx = (sx + ex) / 2 - uy * bow;
  const my = (sy + ey) / 2 + ux * bow;
  return { d: `M ${sx} ${sy} Q ${mx} ${my} ${ex} ${ey}`, lx: mx, ly: my - 7 };
}

export function renderProcessGraph(protocol: ProtocolDoc, options: GraphOptions = {}): string {
  const { states, transitions } = options.patch
    ? overlayPatch(protocol, options.patch)
    : { states: protocol.states as DiffState[], transitions: protocol.transitions as DiffTransition[] };
  const positions = layout(states, transitions);
  const enabled = options.enabledIds ?? new Set<string>();

  const width = Math.max(...[...positions.values()].map((p) => p.x)) + PAD_X + NODE_R;
  const height = Math.max(...[...positions.values()].map((p) => p.y)) + PAD_Y + NODE_R;

  const parts: string[] = [];
  parts.push(
    `<svg class="process-graph" viewBox="0 0 ${width} ${height}" role="img" aria-label="protocol state graph">`,
    '<defs>' +
      '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
      '<path d="M 0 0 L 10 5 L 0 10 z"/></marker>' +
      '</defs>',
  );

  // edges under nodes; lane index separates edges sharing an endpoint pair
  const laneCount = new Map<string, number>();
  const sorted = [...transitions].sort((a, b) => a.id.localeCompare(b.id));
  for (const t of sorted) {
    const from = positions.get(t.from);
    const to = positions.get(t.to);
    if (!from || !to) continue; // dangling endpoint, nothing to draw
    const key = t.from <= t.to ? `${t.from}|${t.to}` : `${t.to}|${t.from}`;
    const lane = laneCount.get(key) ?? 0;
    laneCount.set(key, lane + 1);
    const { d, lx, ly } = edgePath(from, to, lane);
    const classes = ['edge'];
    if (enabled.has(t.id)) classes.push('enabled');
    if (t.diff) classes.push(`diff-${t.diff}`);
    const bound = t.action.binding ? ` → ${t.action.binding}` : ' (unbound)';
    parts.push(
      `<g class="${classes.join(' ')}" data-transition="${esc(t.id)}">` +
        `<path d="${d}" marker-end="url(#arrow)"><title>${esc(`${t.id}: ${t.role} / ${t.action.name}${bound}`)}</title></path>` +
        `<text x="${lx}" y="${ly}" text-anchor="middle" class="edge-label">${esc(t.role)} · ${esc(t.action.name)}</text>` +
        '</g>',
    );
  }

  for (const s of [...states].sort((a, b) => a.id.localeCompare(b.id))) {
    const p = positions.get(s.id) as { x: number; y: number };
    const classes = ['node', `kind-${s.kind}`];
    if (s.id === options.currentState) classes.push('current');
    if (s.diff) classes.push(`diff-${s.diff}`);
    if (s.outcome) classes.push(`outcome-${s.outcome}`);
    parts.push(`<g class="${classes.join(' ')}" data-state="${esc(s.id)}">`);
    if (s.kind === 'start') {
      parts.push(`<circle cx="${p.x}" cy="${p.y}" r="${NODE_R + 5}" class="start-ring"/>`);
    }
    parts.push(
      `<circle cx="${p.x}" cy="${p.y}" r="${NODE_R}"><title>${esc(s.label || s.id)}</title></circle>`,
      `<text x="${p.x}" y="${p.y + 4}" text-anchor="middle" class="node-id">${esc(s.id)}</text>`,
      `<text x="${p.x}" y="${p.y + NODE_R + 17}" text-anchor="middle" class="node-label">${esc(trim(s.label, 26))}</text>`,
    );
    if (s.kind === 'end' && s.outcome) {
      parts.push(
        `<text x="${p.x + NODE_R - 4}" y="${p.y - NODE_R + 6}" text-anchor="middle" class="outcome-mark">${
          s.outcome === 'success' ? '✓' : '✗'
        }</text>`,
      );
    }
    parts.push('</g>');
  }

  parts.push('</svg>');
  return parts.join('');
}

function trim(text: string, max: number): string {
  return text.length > max ? text.slice(0, max - 1) + '…' : text;
}
