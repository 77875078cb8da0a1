/**
 * Application state for one browser session: the selected identity, the
 * current view, data fetched for it, and the polling cursor. Holds no
 * authority of its own; every mutation is a REST call and every displayed
 * fact is whatever the server last answered. DOM-free by design so the whole
 * client can be exercised in tests.
 */

import { ApiClient, ApiError } from './api.js';
import type {
  AvailableMove,
  CatalogEntry,
  EditDoc,
  GroupDoc,
  HistoryRecord,
  LineageHop,
  ProcessDoc,
  PropagationReport,
  ProposalDoc,
  ProtocolDoc,
  ProtocolView,
  RuleDoc,
  ScopeDoc,
  SessionDoc,
  ValidationReport,
} from './types.js';

export type View =
  | { kind: 'processes' }
  | { kind: 'process'; id: string }
  | { kind: 'negotiations' }
  | { kind: 'negotiation'; id: string }
  | { kind: 'catalog' }
  | { kind: 'protocols' }
  | { kind: 'protocol'; version: string }
  | { kind: 'lineage'; version: string }
  | { kind: 'history'; version: string };

export type Modal =
  | { kind: 'negotiate'; processId: string }
  | { kind: 'counter'; sessionId: string }
  | { kind: 'propagate'; version: string; report: PropagationReport | null }
  | { kind: 'record'; sessionId: string }
  | { kind: 'upload' }
  | null;

export interface Notice {
  id: number;
  text: string;
  tone: 'info' | 'error';
}

export interface SessionContext {
  collaborator: string | null;
  groupId: string | null;
  cursor: number; // last seen event seq, monotone
}

export interface ProcessDetail {
  process: ProcessDoc;
  protocol: ProtocolDoc;
  moves: AvailableMove[];
}

export interface SessionDetail {
  session: SessionDoc;
  baseProtocol: ProtocolDoc | null;
}

let noticeSeq = 0;

export class AppStore {
  readonly api: ApiClient;

  ctx: SessionContext = { collaborator: null, groupId: null, cursor: 0 };
  view: View = { kind: 'processes' };
  modal: Modal = null;
  connected = true;

  groups: GroupDoc[] = [];
  processes: ProcessDoc[] = [];
  processDetail: ProcessDetail | null = null;
  sessions: SessionDoc[] = [];
  sessionDetail: SessionDetail | null = null;
  catalogEntries: CatalogEntry[] = [];
  protocols: ProtocolView[] = [];
  protocolDetail: ProtocolView | null = null;
  lineageHops: LineageHop[] = [];
  historyRecords: HistoryRecord[] = [];
  uploadReport: ValidationReport | null = null;
  notices: Notice[] = [];
  /** Error code when the current detail view failed to load (404 banner). */
  detailError: string | null = null;

  private listeners: (() => void)[] = [];

  constructor(api: ApiClient) {
    this.api = api;
  }

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  // -- identity ------------------------------------------------------------

  async init(): Promise<void> {
    this.groups = await this.api.listGroups();
    const first = this.groups[0];
    if (first && !this.ctx.groupId) {
      const member = Object.keys(first.members).sort()[0] ?? null;
      this.setIdentityQuiet(first.group_id, member);
    }
    await this.load();
  }

  setIdentityQuiet(groupId: string | null, collaborator: string | null): void {
    this.ctx.groupId = groupId;
    this.ctx.collaborator = collaborator;
    this.api.actor = collaborator;
  }

  async setIdentity(groupId: string | null, collaborator: string | null): Promise<void> {
    this.setIdentityQuiet(groupId, collaborator);
    await this.load();
  }

  membersOf(groupId: string | null): string[] {
    const group = this.groups.find((g) => g.group_id === groupId);
    return group ? Object.keys(group.members).sort() : [];
  }

  // -- navigation and data loading -----------------------------------------

  async navigate(view: View): Promise<void> {
    this.view = view;
    this.detailError = null;
    await this.load();
  }

  /** Re-fetch whatever the current view shows. Safe to call any time. */
  async load(): Promise<void> {
    try {
      switch (this.view.kind) {
        case 'processes':
          this.processes = await this.api.listProcesses();
          break;
        case 'process': {
          const process = await this.api.getProcess(this.view.id);
          const [view, moves] = await Promise.all([
            this.api.getProtocol(process.protocol_version),
            this.ctx.collaborator ? this.api.transitionsFor(this.view.id) : Promise.resolve([]),
          ]);
          this.processDetail = { process, protocol: view.protocol, moves };
          break;
        }
        case 'negotiations':
          this.sessions = await this.api.listSessions();
          break;
        case 'negotiation': {
          const session = await this.api.getSession(this.view.id);
          let baseProtocol: ProtocolDoc | null = null;
          try {
            baseProtocol = (await this.api.getProtocol(session.base_version)).protocol;
          } catch {
            // base may be unreadable after an instant replacement; panel still works
          }
          this.sessionDetail = { session, baseProtocol };
          break;
        }
        case 'catalog':
          this.catalogEntries = this.ctx.groupId ? await this.api.catalog(this.ctx.groupId) : [];
          break;
        case 'protocols':
          this.protocols = await this.api.listProtocols();
          break;
        case 'protocol':
          this.protocolDetail = await this.api.getProtocol(this.view.version);
          break;
        case 'lineage':
          this.lineageHops = await this.api.lineage(this.view.version);
          break;
        case 'history':
          this.historyRecords = this.ctx.groupId
            ? await this.api.history(this.view.version, this.ctx.groupId)
            : [];
          break;
      }
      this.detailError = null;
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.detailError = error.code;
      } else {
        this.report(error);
      }
    }
    this.emit();
  }

  // -- polling -------------------------------------------------------------

  /**
   * One poll tick: GET /events?since=cursor, advance the cursor (it only
   * ever moves forward), and refresh the view when anything happened.
   */
  async poll(): Promise<void> {
    try {
      const events = await this.api.eventsSince(this.ctx.cursor);
      this.connected = true;
      if (events.length === 0) {
        this.emit();
        return;
      }
      const top = Math.max(...events.map((e) => e.global_seq));
      if (top > this.ctx.cursor) this.ctx.cursor = top;
      if (this.modal === null) {
        await this.load(); // load() emits
      } else {
        this.emit(); // don't redraw under an open form; catch up on close
      }
    } catch {
      this.connected = false;
      this.emit();
    }
  }

  // -- process actions -----------------------------------------------------

  /**
   * Trigger a transition the server listed as available. Optimistic only in
   * timing: the POST decides, and any refusal surfaces as a toast with the
   * engine code while the follow-up load() resyncs the view.
   */
  async act(processId: string, transitionId: string): Promise<void> {
    try {
      await this.api.trigger(processId, transitionId);
      this.notify(`${transitionId} done`);
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  // -- negotiation ---------------------------------------------------------

  /** The proposal votes currently attach to: the tail of the linear chain. */
  headProposal(session: SessionDoc): ProposalDoc | null {
    return session.proposals[session.proposals.length - 1] ?? null;
  }

  async openNegotiation(
    processId: string,
    patch: EditDoc[],
    rationale: string,
    rule?: RuleDoc,
  ): Promise<void> {
    try {
      const session = await this.api.openNegotiation(processId, patch, rationale, rule);
      this.modal = null;
      this.notify(`negotiation ${session.session_id} opened`);
      await this.navigate({ kind: 'negotiation', id: session.session_id });
    } catch (error) {
      this.report(error);
      this.emit();
    }
  }

  async counterPropose(sessionId: string, patch: EditDoc[], rationale: string): Promise<void> {
    const head = this.sessionDetail ? this.headProposal(this.sessionDetail.session) : null;
    if (!head) {
      this.notify('no proposal to supersede', 'error');
      return;
    }
    try {
      await this.api.propose(sessionId, patch, rationale, head.proposal_id);
      this.modal = null;
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  async vote(sessionId: string, proposalId: string, value: 'accept' | 'reject'): Promise<void> {
    try {
      await this.api.vote(sessionId, proposalId, value);
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  /** Close the session; acceptance opens the propagation dialog for the new version. */
  async closeSession(sessionId: string): Promise<void> {
    try {
      const result = await this.api.closeSession(sessionId);
      if (result.ruling === 'accepted' && result.result_version) {
        this.modal = { kind: 'propagate', version: result.result_version, report: null };
        this.notify(`accepted: new version ${result.result_version}`);
      } else {
        this.notify(`rejected (${result.tally['accept'] ?? 0} for, ${result.tally['reject'] ?? 0} against)`);
      }
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  async recordHistory(sessionId: string, consents: Record<string, boolean>): Promise<void> {
    try {
      await this.api.recordHistory(sessionId, consents);
      this.modal = null;
      this.notify('negotiation archived to the history database');
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  // -- propagation and adoption --------------------------------------------

  async propagate(version: string, strategy: 'local' | 'global' | 'instant'): Promise<void> {
    try {
      const report = await this.api.propagate(version, strategy);
      if (report.applied) {
        this.modal = null;
        this.notify(`propagated ${version} (${strategy})`);
      } else if (this.modal?.kind === 'propagate') {
        this.modal = { ...this.modal, report }; // show the conflicts, keep the dialog
      } else {
        this.notify(`propagation refused: ${report.conflicts?.length ?? 0} conflict(s)`, 'error');
      }
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  async adopt(version: string): Promise<void> {
    if (!this.ctx.groupId) return;
    try {
      const result = await this.api.adopt(version, this.ctx.groupId);
      if (result.adopted) {
        this.notify(`adopted as ${result.version}`);
      } else {
        this.notify(`cannot adopt: environment lacks ${result.missing_actions.join(', ')}`, 'error');
      }
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  // -- protocol upload -----------------------------------------------------

  async uploadProtocol(doc: unknown, scope: ScopeDoc | undefined): Promise<void> {
    try {
      const { version } = await this.api.registerProtocol(doc, scope);
      this.modal = null;
      this.uploadReport = null;
      this.notify(`registered as ${version}`);
    } catch (error) {
      this.report(error);
    }
    await this.load();
  }

  async validateUpload(doc: unknown): Promise<void> {
    try {
      this.uploadReport = await this.api.validateDocument(doc);
    } catch (error) {
      this.report(error);
    }
    this.emit();
  }

  // -- modal and notices ---------------------------------------------------

  openModal(modal: Modal): void {
    this.modal = modal;
    this.emit();
  }

  async closeModal(): Promise<void> {
    this.modal = null;
    await this.load(); // pick up anything polling deferred while the form was open
  }

  notify(text: string, tone: 'info' | 'error' = 'info'): void {
    this.notices.push({ id: ++noticeSeq, text, tone });
    if (this.notices.length > 4) this.notices.shift();
    this.emit();
  }

  dismissNotice(id: number): void {
    this.notices = this.notices.filter((n) => n.id !== id);
    this.emit();
  }

  private report(error: unknown): void {
    if (error instanceof ApiError) {
      this.notify(`${error.code}: ${error.message}`, 'error');
    } else {
      this.notify(String(error), 'error');
    }
  }
}
