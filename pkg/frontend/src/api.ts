/**
 * Typed client for the community service REST surface.
 *
 * Every method is one documented endpoint call; the client adds the
 * X-Collaborator identity header and unwraps the error envelope into
 * ApiError. It holds no state of its own.
 */

import type {
  AdoptResult,
  AvailableMove,
  CatalogEntry,
  CloseResult,
  EditDoc,
  ErrorEnvelope,
  GroupDoc,
  HistoryRecord,
  LineageHop,
  LogEvent,
  ProcessDoc,
  PropagationReport,
  ProposalDoc,
  ProtocolView,
  RuleDoc,
  ScopeDoc,
  SessionDoc,
  ValidationReport,
  VoteResult,
} from './types.js';

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly details: Record<string, unknown>;

  constructor(code: string, message: string, status: number, details: Record<string, unknown> = {}) {
    super(message);
    this.name = 'ApiError';
    this.code = code;
    this.status = status;
    this.details = details;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly doFetch: FetchLike;

  /** Identity attached to every request; swap it to act as someone else. */
  actor: string | null = null;

  constructor(base = '', fetchImpl?: FetchLike) {
    this.base = base.replace(/\/$/, '');
    this.doFetch = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.actor) headers['X-Collaborator'] = this.actor;
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    const res = await this.doFetch(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    const data: unknown = text ? JSON.parse(text) : null;
    if (!res.ok) throw toApiError(data, res.status);
    return data as T;
  }

  /**
   * Like request(), but a 409 whose body is a refusal report (propagate,
   * adopt) comes back as data rather than as an error: the refusal is a
   * domain outcome the caller renders, not a protocol failure.
   */
  private async requestReport<T extends object>(
    method: string,
    path: string,
    body: unknown,
    refusalKey: string,
  ): Promise<T> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.actor) headers['X-Collaborator'] = this.actor;
    const res = await this.doFetch(this.base + path, { method, headers, body: JSON.stringify(body) });
    const data: unknown = JSON.parse(await res.text());
    if (res.ok) return data as T;
    if (res.status === 409 && data && typeof data === 'object' && refusalKey in data) return data as T;
    throw toApiError(data, res.status);
  }

  // -- identity and community layout --------------------------------------

  /** GET /groups */
  listGroups(): Promise<GroupDoc[]> {
    return this.request('GET', '/groups');
  }

  // -- protocols -----------------------------------------------------------

  /** GET /protocols */
  listProtocols(): Promise<ProtocolView[]> {
    return this.request('GET', '/protocols');
  }

  /** GET /protocols/{version} */
  getProtocol(version: string): Promise<ProtocolView> {
    return this.request('GET', `/protocols/${encodeURIComponent(version)}`);
  }

  /** POST /protocols */
  registerProtocol(protocol: unknown, scope?: ScopeDoc): Promise<{ version: string }> {
    return this.request('POST', '/protocols', { protocol, scope });
  }

  /** POST /protocols/validate (a document, before upload) */
  validateDocument(protocol: unknown): Promise<ValidationReport> {
    return this.request('POST', '/protocols/validate', { protocol });
  }

  /** POST /protocols/{version}/validate */
  validateVersion(version: string): Promise<ValidationReport> {
    return this.request('POST', `/protocols/${encodeURIComponent(version)}/validate`);
  }

  // -- processes -----------------------------------------------------------

  /** GET /processes */
  listProcesses(): Promise<ProcessDoc[]> {
    return this.request('GET', '/processes');
  }

  /** GET /processes/{id} */
  getProcess(processId: string): Promise<ProcessDoc> {
    return this.request('GET', `/processes/${encodeURIComponent(processId)}`);
  }

  /**
   * GET /processes/{id}/transitions
   *
   * The ONLY source of action enablement. Whatever this returns is clickable;
   * everything else stays inert. The client never re-derives this from roles.
   */
  transitionsFor(processId: string): Promise<AvailableMove[]> {
    return this.request('GET', `/processes/${encodeURIComponent(processId)}/transitions`);
  }

  /** POST /processes/{id}/trigger */
  trigger(processId: string, transitionId: string): Promise<ProcessDoc> {
    return this.request('POST', `/processes/${encodeURIComponent(processId)}/trigger`, {
      transition_id: transitionId,
    });
  }

  /** POST /processes */
  instantiate(version: string, groupId: string, startState?: string): Promise<ProcessDoc> {
    return this.request('POST', '/processes', {
      version,
      group_id: groupId,
      start_state: startState,
    });
  }

  // -- negotiations --------------------------------------------------------

  /** GET /negotiations */
  listSessions(): Promise<SessionDoc[]> {
    return this.request('GET', '/negotiations');
  }

  /** GET /negotiations/{id} */
  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request('GET', `/negotiations/${encodeURIComponent(sessionId)}`);
  }

  /** POST /negotiations */
  openNegotiation(processId: string, patch: EditDoc[], rationale: string, rule?: RuleDoc): Promise<SessionDoc> {
    return this.request('POST', '/negotiations', {
      process_id: processId,
      patch,
      rationale,
      rule,
    });
  }

  /** POST /negotiations/{id}/proposals */
  propose(sessionId: string, patch: EditDoc[], rationale: string, supersedes: string): Promise<ProposalDoc> {
    return this.request('POST', `/negotiations/${encodeURIComponent(sessionId)}/proposals`, {
      patch,
      rationale,
      supersedes,
    });
  }

  /** POST /negotiations/{id}/votes */
  vote(sessionId: string, proposalId: string, value: 'accept' | 'reject'): Promise<VoteResult> {
    return this.request('POST', `/negotiations/${encodeURIComponent(sessionId)}/votes`, {
      proposal_id: proposalId,
      value,
    });
  }

  /** POST /negotiations/{id}/close */
  closeSession(sessionId: string): Promise<CloseResult> {
    return this.request('POST', `/negotiations/${encodeURIComponent(sessionId)}/close`, {});
  }

  /** POST /negotiations/{id}/record */
  recordHistory(sessionId: string, consents: Record<string, boolean>): Promise<HistoryRecord> {
    return this.request('POST', `/negotiations/${encodeURIComponent(sessionId)}/record`, { consents });
  }

  // -- propagation, catalog, lineage, history ------------------------------

  /** POST /propagate; a 409 refusal report is returned, not thrown. */
  propagate(version: string, strategy: 'local' | 'global' | 'instant'): Promise<PropagationReport> {
    return this.requestReport('POST', '/propagate', { version, strategy }, 'applied');
  }

  /** POST /adopt; a 409 missing-services result is returned, not thrown. */
  adopt(
    version: string,
    groupId: string,
    actionChoices?: Record<string, string>,
  ): Promise<AdoptResult> {
    return this.requestReport(
      'POST',
      '/adopt',
      { version, group_id: groupId, action_choices: actionChoices },
      'adopted',
    );
  }

  /** GET /catalog?group= */
  catalog(groupId: string): Promise<CatalogEntry[]> {
    return this.request('GET', `/catalog?group=${encodeURIComponent(groupId)}`);
  }

  /** GET /lineage/{version} */
  lineage(version: string): Promise<LineageHop[]> {
    return this.request('GET', `/lineage/${encodeURIComponent(version)}`);
  }

  /** GET /history/{version}?group= (records arrive redacted for this group) */
  history(version: string, groupId: string): Promise<HistoryRecord[]> {
    return this.request(
      'GET',
      `/history/${encodeURIComponent(version)}?group=${encodeURIComponent(groupId)}`,
    );
  }

  /** GET /events?since= */
  eventsSince(seq: number): Promise<LogEvent[]> {
    return this.request('GET', `/events?since=${seq}`);
  }
}

function toApiError(data: unknown, status: number): ApiError {
  const envelope = data as Partial<ErrorEnvelope> | null;
  if (envelope && typeof envelope === 'object' && envelope.error && envelope.error.code) {
    const e = envelope.error;
    return new ApiError(e.code, e.message ?? e.code, status, e.details ?? {});
  }
  return new ApiError('HTTP_' + status, `request failed with status ${status}`, status);
}
