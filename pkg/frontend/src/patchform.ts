/**
 * Patch authoring, constrained to the edit vocabulary. A draft is a list of
 * form rows; each row names one edit op and fills its fields as plain
 * strings. rowsToPatch() either produces well-formed edit documents or a
 * per-row complaint, so no free-form structure ever reaches the wire.
 */

import type { EditDoc, ProtocolDoc, StateKind } from './types.js';

export const EDIT_OPS = [
  'add_transition',
  'remove_transition',
  'add_state',
  'remove_state',
  'bind_action',
  'unbind_action',
  'bind_role',
  'unbind_role',
] as const;

export type EditOp = (typeof EDIT_OPS)[number];

export interface EditRow {
  op: EditOp;
  fields: Record<string, string>;
}

export function emptyRow(op: EditOp = 'add_transition'): EditRow {
  return { op, fields: {} };
}

function need(row: EditRow, key: string): string | null {
  const value = (row.fields[key] ?? '').trim();
  return value === '' ? null : value;
}

/** Build one edit document from a row, or a human-readable complaint. */
export function rowToEdit(row: EditRow, index: number): { edit: EditDoc } | { error: string } {
  const at = `row ${index + 1}`;
  const missing = (field: string) => ({ error: `${at}: ${row.op} needs ${field}` });
  switch (row.op) {
    case 'add_transition': {
      const id = need(row, 'id');
      const from = need(row, 'from');
      const to = need(row, 'to');
      const role = need(row, 'role');
      const action = need(row, 'action');
      if (!id) return missing('a transition id');
      if (!from) return missing('a source state');
      if (!to) return missing('a target state');
      if (!role) return missing('a role');
      if (!action) return missing('an action name');
      return {
        edit: {
          op: 'add_transition',
          transition: {
            id,
            from,
            to,
            role,
            action: { name: action, binding: need(row, 'binding') },
          },
        },
      };
    }
    case 'remove_transition': {
      const id = need(row, 'transition_id');
      return id ? { edit: { op: 'remove_transition', transition_id: id } } : missing('a transition id');
    }
    case 'add_state': {
      const id = need(row, 'id');
      const kind = need(row, 'kind') as StateKind | null;
      if (!id) return missing('a state id');
      if (!kind || !['start', 'intermediate', 'end'].includes(kind)) {
        return { error: `${at}: state kind must be start, intermediate or end` };
      }
      const outcome = need(row, 'outcome');
      if (kind === 'end' && !outcome) return missing('an outcome for the end state');
      return {
        edit: {
          op: 'add_state',
          state: { id, kind, label: need(row, 'label') ?? '', outcome: kind === 'end' ? outcome : null },
        },
      };
    }
    case 'remove_state': {
      const id = need(row, 'state_id');
      return id ? { edit: { op: 'remove_state', state_id: id } } : missing('a state id');
    }
    case 'bind_action': {
      const id = need(row, 'transition_id');
      const uri = need(row, 'uri');
      if (!id) return missing('a transition id');
      if (!uri) return missing('an endpoint URI');
      return { edit: { op: 'bind_action', transition_id: id, uri } };
    }
    case 'unbind_action': {
      const id = need(row, 'transition_id');
      return id ? { edit: { op: 'unbind_action', transition_id: id } } : missing('a transition id');
    }
    case 'bind_role': {
      const role = need(row, 'role');
      const raw = need(row, 'collaborators');
      if (!role) return missing('a role');
      if (!raw) return missing('collaborator ids (comma separated)');
      const collaborators = raw
        .split(',')
        .map((c) => c.trim())
        .filter((c) => c !== '');
      if (collaborators.length === 0) return missing('collaborator ids (comma separated)');
      return { edit: { op: 'bind_role', role, collaborators } };
    }
    case 'unbind_role': {
      const role = need(row, 'role');
      return role ? { edit: { op: 'unbind_role', role } } : missing('a role');
    }
  }
}

export function rowsToPatch(rows: EditRow[]): { patch: EditDoc[] } | { error: string } {
  if (rows.length === 0) return { error: 'a proposal needs at least one edit' };
  const patch: EditDoc[] = [];
  for (let i = 0; i < rows.length; i++) {
    const row = rows[i] as EditRow;
    const result = rowToEdit(row, i);
    if ('error' in result) return result;
    patch.push(result.edit);
  }
  return { patch };
}

export function summarizeEdit(edit: EditDoc): string {
  switch (edit.op) {
    case 'add_transition': {
      const t = edit.transition;
      const binding = t.action.binding ? ` bound to ${t.action.binding}` : ', unbound';
      return `add transition ${t.id}: ${t.from} → ${t.to} (${t.role}, "${t.action.name}"${binding})`;
    }
    case 'remove_transition':
      return `remove transition ${edit.transition_id}`;
    case 'add_state':
      return `add ${edit.state.kind} state ${edit.state.id}${edit.state.outcome ? ` (${edit.state.outcome})` : ''}`;
    case 'remove_state':
      return `remove state ${edit.state_id}`;
    case 'bind_action':
      return `bind ${edit.transition_id} to ${edit.uri}`;
    case 'unbind_action':
      return `unbind action on ${edit.transition_id}`;
    case 'bind_role':
      return `bind role ${edit.role} to ${edit.collaborators.join(', ')}`;
    case 'unbind_role':
      return `unbind role ${edit.role}`;
  }
}

/** Select options the transition-builder offers, straight from the base protocol. */
export function builderOptions(protocol: ProtocolDoc): {
  states: { id: string; label: string }[];
  roles: string[];
  transitions: string[];
} {
  return {
    states: protocol.states.map((s) => ({ id: s.id, label: s.label })),
    roles: [...protocol.roles],
    transitions: protocol.transitions.map((t) => t.id),
  };
}

/** A free slot for a new transition id: t-1, t-2, ... skipping taken ids. */
export function suggestTransitionId(protocol: ProtocolDoc, taken: Iterable<string> = []): string {
  const used = new Set<string>(protocol.transitions.map((t) => t.id));
  for (const id of taken) used.add(id);
  for (let n = 1; ; n++) {
    const candidate = `t-${n}`;
    if (!used.has(candidate)) return candidate;
  }
}
