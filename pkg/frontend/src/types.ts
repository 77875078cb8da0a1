/**
 * Shapes of the documents the REST API serves and accepts.
 *
 * These mirror the server's serializers field for field; the client treats
 * them as read-only data and never recomputes anything the server already
 * decided (enablement, redaction, compatibility).
 */

export type StateKind = 'start' | 'intermediate' | 'end';

export interface StateDoc {
  id: string;
  kind: StateKind;
  label: string;
  outcome: string | null;
}

export interface ActionDoc {
  name: string;
  binding: string | null;
}

export interface TransitionDoc {
  id: string;
  from: string;
  to: string;
  role: string;
  action: ActionDoc;
}

export interface RoleBindingDoc {
  role: string;
  collaborators: string[];
}

export interface ProtocolDoc {
  protocol_id: string;
  parent_version: string | null;
  version: string;
  states: StateDoc[];
  transitions: TransitionDoc[];
  roles: string[];
  role_bindings: RoleBindingDoc[];
}

export type ScopeDoc = { kind: 'catalog' } | { kind: 'private'; group_id: string };

/** GET /protocols/{version} */
export interface ProtocolView {
  protocol: ProtocolDoc;
  scope: ScopeDoc;
  tombstoned: boolean;
  refinement: 'abstract' | 'semi-implemented' | 'implemented' | null;
}

export interface GroupDoc {
  group_id: string;
  members: Record<string, string[]>;
  environment_ref: string | null;
}

export interface ProcessEventDoc {
  seq: number;
  kind: string;
  transition_id: string | null;
  actor: string | null;
  from_state: string;
  to_state: string;
  action_result: unknown;
  timestamp: string;
}

/** GET /processes/{id} */
export interface ProcessDoc {
  process_id: string;
  protocol_version: string;
  group: GroupDoc;
  current_state: string;
  status: 'running' | 'completed' | 'retired';
  superseded: boolean;
  history: ProcessEventDoc[];
  outcome: string | null;
}

/** One entry from GET /processes/{id}/transitions: a move the server will accept. */
export interface AvailableMove {
  id: string;
  from: string;
  to: string;
  role: string;
  action: ActionDoc;
}

// Patch edit vocabulary. Forms build these and nothing else.
export type EditDoc =
  | { op: 'add_state'; state: StateDoc }
  | { op: 'remove_state'; state_id: string }
  | { op: 'add_transition'; transition: TransitionDoc }
  | { op: 'remove_transition'; transition_id: string }
  | { op: 'bind_action'; transition_id: string; uri: string }
  | { op: 'unbind_action'; transition_id: string }
  | { op: 'bind_role'; role: string; collaborators: string[] }
  | { op: 'unbind_role'; role: string };

export type RuleDoc = { kind: 'unanimity' } | { kind: 'quorum'; fraction: number };

export interface ProposalDoc {
  proposal_id: string;
  author: string;
  // Both null when the server redacted a non-consenting author.
  patch: EditDoc[] | null;
  rationale: string | null;
  supersedes: string | null;
}

/** GET /negotiations/{id} */
export interface SessionDoc {
  session_id: string;
  process_id: string;
  group_id: string;
  base_version: string;
  participants: string[];
  rule: RuleDoc;
  opened_by: string;
  proposals: ProposalDoc[];
  votes: Record<string, Record<string, 'accept' | 'reject'>>;
  status: 'open' | 'accepted' | 'rejected' | 'withdrawn';
  result_version: string | null;
}

export interface Tally {
  accept: number;
  reject: number;
  pending: number;
}

/** POST /negotiations/{id}/votes response. */
export interface VoteResult {
  session_id: string;
  proposal_id: string;
  tally: Tally;
}

/** POST /negotiations/{id}/close response. */
export interface CloseResult {
  ruling: 'accepted' | 'rejected';
  tally: Record<string, number>;
  result_version: string | null;
  accepted_proposal_id?: string;
}

/** POST /propagate response (200 applied, 409 refused with conflicts). */
export interface PropagationReport {
  applied: boolean;
  strategy: string;
  version: string;
  replaced_version?: string | null;
  migrated?: string[];
  withdrawn_sessions?: string[];
  conflicts?: unknown[];
}

/** POST /adopt response (409 when services are missing). */
export interface AdoptResult {
  adopted: boolean;
  missing_actions: string[];
  version: string | null;
}

/** GET /catalog?group= entry. */
export interface CatalogEntry {
  version: string;
  protocol_id: string;
  refinement: 'abstract' | 'semi-implemented' | 'implemented';
  compatible: boolean | null;
  missing_actions: string[];
}

/** GET /lineage/{version} hop, root last. */
export interface LineageHop {
  version: string;
  parent: string | null;
  negotiation_ref: string | null;
}

/** GET /history/{version}?group= record, already redacted server-side. */
export interface HistoryRecord {
  session_id: string;
  process_id: string;
  group_id: string;
  base_version: string;
  result_version: string | null;
  status: string;
  rule: Record<string, unknown>;
  participants: string[];
  proposals: ProposalDoc[];
  votes: Record<string, Record<string, string>>;
  consents: Record<string, boolean>;
  recorded_at: string;
}

/** GET /events?since= entry from the server's append-only log. */
export interface LogEvent {
  global_seq: number;
  kind: string;
  timestamp: string;
  payload: Record<string, unknown>;
  checksum: string;
}

export interface ValidationReport {
  valid: boolean;
  findings: { severity: string; code: string; subject: string; detail?: string }[];
}

/** Error envelope every non-2xx (except refused reports) carries. */
export interface ErrorEnvelope {
  error: { code: string; message: string; details?: Record<string, unknown> };
}
