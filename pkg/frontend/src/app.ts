/**
 * Browser entry point. Owns the DOM: renders store state into the page,
 * dispatches clicks and form submits back into store methods, and drives
 * the poll loop. All markup comes from render.ts; all data comes from the
 * store; this file only wires them together.
 */

import { ApiClient } from './api.js';
import {
  builderOptions,
  emptyRow,
  rowsToPatch,
  suggestTransitionId,
  type EditOp,
  type EditRow,
} from './patchform.js';
import { Poller } from './poller.js';
import * as ui from './render.js';
import { AppStore } from './store.js';
import type { ProtocolDoc, RuleDoc, ScopeDoc } from './types.js';

const POLL_MS = 2000;

interface BuilderState {
  rows: EditRow[];
  rationale: string;
  rule: string;
}

function parseRule(value: string): RuleDoc | undefined {
  if (value === 'unanimity') return undefined; // server default
  if (value.startsWith('quorum-')) return { kind: 'quorum', fraction: Number(value.slice(7)) };
  return undefined;
}

export class App {
  readonly store: AppStore;
  readonly poller: Poller;

  private builder: BuilderState = { rows: [], rationale: '', rule: 'unanimity' };
  // parsed upload kept across the validate re-render, which clears the file input
  private uploadDoc: unknown = null;
  private lastModalKey = 'null';

  constructor(store: AppStore) {
    this.store = store;
    this.poller = new Poller(() => store.poll(), POLL_MS);
    store.subscribe(() => this.render());
    document.addEventListener('click', (e) => this.onClick(e));
    document.addEventListener('submit', (e) => this.onSubmit(e));
    document.addEventListener('change', (e) => this.onChange(e));
  }

  async start(): Promise<void> {
    await this.store.init();
    this.poller.start();
  }

  // -- rendering -----------------------------------------------------------

  private el(id: string): HTMLElement {
    return document.getElementById(id) as HTMLElement;
  }

  private render(): void {
    this.el('identity').innerHTML = ui.renderIdentityPicker(this.store);
    this.renderNav();
    this.el('main').innerHTML = this.viewHtml();
    this.el('toasts').innerHTML = ui.renderNotices(this.store);

    // the modal holds live form state, so only redraw it when it changes
    const key = this.modalKey();
    if (key !== this.lastModalKey) {
      this.lastModalKey = key;
      this.renderModal();
    }
  }

  private renderNav(): void {
    const active: Record<string, string> = {
      processes: 'processes',
      process: 'processes',
      negotiations: 'negotiations',
      negotiation: 'negotiations',
      catalog: 'catalog',
      lineage: 'catalog',
      history: 'catalog',
      protocols: 'protocols',
      protocol: 'protocols',
    };
    const current = active[this.store.view.kind];
    for (const button of Array.from(document.querySelectorAll('#nav [data-nav]'))) {
      button.classList.toggle('active', button.getAttribute('data-nav') === current);
    }
  }

  private viewHtml(): string {
    switch (this.store.view.kind) {
      case 'processes':
        return ui.renderProcessList(this.store);
      case 'process':
        return ui.renderProcessDetail(this.store);
      case 'negotiations':
        return ui.renderSessionList(this.store);
      case 'negotiation':
        return ui.renderSessionDetail(this.store);
      case 'catalog':
        return ui.renderCatalog(this.store);
      case 'protocols':
        return ui.renderProtocolList(this.store);
      case 'protocol':
        return ui.renderProtocolDetail(this.store);
      case 'lineage':
        return ui.renderLineage(this.store);
      case 'history':
        return ui.renderHistory(this.store);
    }
  }

  private modalKey(): string {
    const extra = this.store.modal?.kind === 'upload' ? JSON.stringify(this.store.uploadReport) : '';
    return JSON.stringify(this.store.modal) + extra;
  }

  private builderProtocol(): ProtocolDoc | null {
    const modal = this.store.modal;
    if (modal?.kind === 'negotiate') return this.store.processDetail?.protocol ?? null;
    if (modal?.kind === 'counter') return this.store.sessionDetail?.baseProtocol ?? null;
    return null;
  }

  private renderModal(): void {
    const backdrop = this.el('modal-backdrop');
    const modal = this.store.modal;
    if (modal === null) {
      backdrop.hidden = true;
      this.el('modal').innerHTML = '';
      return;
    }
    backdrop.hidden = false;
    let html = '';
    switch (modal.kind) {
      case 'negotiate':
      case 'counter': {
        const protocol = this.builderProtocol();
        html = ui.renderPatchBuilder({
          title:
            modal.kind === 'negotiate'
              ? `Propose a change for ${modal.processId}`
              : 'Counter-proposal (supersedes the current head)',
          submitCmd: modal.kind === 'negotiate' ? 'submit-negotiation' : 'submit-counter',
          submitLabel: modal.kind === 'negotiate' ? 'Open negotiation' : 'Submit counter-proposal',
          contextId: modal.kind === 'negotiate' ? modal.processId : modal.sessionId,
          rows: this.builder.rows,
          options: protocol ? builderOptions(protocol) : { states: [], roles: [], transitions: [] },
          askRule: modal.kind === 'negotiate',
        });
        break;
      }
      case 'propagate':
        html = ui.renderPropagationDialog(modal.version, modal.report?.applied === false ? modal.report : null);
        break;
      case 'record': {
        const session = this.store.sessionDetail?.session;
        html = session ? ui.renderRecordDialog(session) : '';
        break;
      }
      case 'upload':
        html = ui.renderUploadDialog(this.store);
        break;
    }
    this.el('modal').innerHTML = html;
    this.restoreBuilderText();
  }

  /** innerHTML cannot carry textarea state, so put it back after a redraw. */
  private restoreBuilderText(): void {
    const form = document.getElementById('patch-builder');
    if (!form) return;
    const rationale = form.querySelector('textarea[name="rationale"]') as HTMLTextAreaElement | null;
    if (rationale) rationale.value = this.builder.rationale;
    const rule = form.querySelector('select[name="rule"]') as HTMLSelectElement | null;
    if (rule) rule.value = this.builder.rule;
  }

  // -- patch builder state -------------------------------------------------

  private seedRow(): EditRow {
    const protocol = this.builderProtocol();
    const row = emptyRow('add_transition');
    if (protocol) {
      const taken = this.builder.rows.map((r) => r.fields['id'] ?? '').filter((id) => id !== '');
      row.fields['id'] = suggestTransitionId(protocol, taken);
    }
    return row;
  }

  /** Pull the current form inputs back into builder state before a redraw. */
  private syncBuilderFromDom(): void {
    const form = document.getElementById('patch-builder');
    if (!form) return;
    const rows: EditRow[] = [];
    for (const fieldset of Array.from(form.querySelectorAll('fieldset.edit-row'))) {
      const opSelect = fieldset.querySelector('select[name="op"]') as HTMLSelectElement | null;
      if (!opSelect) continue;
      const row: EditRow = { op: opSelect.value as EditOp, fields: {} };
      for (const named of Array.from(fieldset.querySelectorAll('input[name], select[name]'))) {
        const input = named as HTMLInputElement | HTMLSelectElement;
        if (input.name !== 'op') row.fields[input.name] = input.value;
      }
      rows.push(row);
    }
    this.builder.rows = rows;
    const rationale = form.querySelector('textarea[name="rationale"]') as HTMLTextAreaElement | null;
    if (rationale) this.builder.rationale = rationale.value;
    const rule = form.querySelector('select[name="rule"]') as HTMLSelectElement | null;
    if (rule) this.builder.rule = rule.value;
  }

  // -- event dispatch ------------------------------------------------------

  private onClick(event: Event): void {
    const target = (event.target as HTMLElement).closest('[data-cmd], [data-nav]') as HTMLElement | null;
    if (!target) return;

    const nav = target.getAttribute('data-nav');
    if (nav === 'processes' || nav === 'negotiations' || nav === 'catalog' || nav === 'protocols') {
      event.preventDefault();
      void this.store.navigate({ kind: nav });
      return;
    }

    const cmd = target.getAttribute('data-cmd');
    if (!cmd) return;
    // submit buttons fall through to the form's submit event
    if (cmd.startsWith('submit-')) return;
    event.preventDefault();
    const data = target.dataset;
    const store = this.store;

    switch (cmd) {
      case 'dismiss-notice':
        store.dismissNotice(Number(data['id']));
        break;
      case 'open-process':
        void store.navigate({ kind: 'process', id: data['id'] ?? '' });
        break;
      case 'open-negotiation':
        void store.navigate({ kind: 'negotiation', id: data['id'] ?? '' });
        break;
      case 'open-protocol':
        void store.navigate({ kind: 'protocol', version: data['version'] ?? '' });
        break;
      case 'open-lineage':
        void store.navigate({ kind: 'lineage', version: data['version'] ?? '' });
        break;
      case 'open-history':
        void store.navigate({ kind: 'history', version: data['version'] ?? '' });
        break;
      case 'trigger':
        void store.act(data['process'] ?? '', data['transition'] ?? '');
        break;
      case 'start-negotiation':
        this.builder = { rows: [], rationale: '', rule: 'unanimity' };
        store.openModal({ kind: 'negotiate', processId: data['process'] ?? '' });
        this.builder.rows = [this.seedRow()];
        this.renderBuilderRows();
        break;
      case 'start-counter':
        this.builder = { rows: [], rationale: '', rule: 'unanimity' };
        store.openModal({ kind: 'counter', sessionId: data['session'] ?? '' });
        this.builder.rows = [this.seedRow()];
        this.renderBuilderRows();
        break;
      case 'start-record':
        store.openModal({ kind: 'record', sessionId: data['session'] ?? '' });
        break;
      case 'start-upload':
        this.uploadDoc = null;
        store.uploadReport = null;
        store.openModal({ kind: 'upload' });
        break;
      case 'vote':
        void store.vote(data['session'] ?? '', data['proposal'] ?? '', data['value'] as 'accept' | 'reject');
        break;
      case 'close-session':
        void store.closeSession(data['session'] ?? '');
        break;
      case 'propagate':
        void store.propagate(data['version'] ?? '', data['strategy'] as 'local' | 'global' | 'instant');
        break;
      case 'adopt':
        void store.adopt(data['version'] ?? '');
        break;
      case 'add-row':
        this.syncBuilderFromDom();
        this.builder.rows.push(this.seedRow());
        this.renderBuilderRows();
        break;
      case 'remove-row':
        this.syncBuilderFromDom();
        this.builder.rows.splice(Number(data['index']), 1);
        if (this.builder.rows.length === 0) this.builder.rows.push(this.seedRow());
        this.renderBuilderRows();
        break;
      case 'close-modal':
        void store.closeModal();
        break;
      case 'validate-upload':
        void this.validateUpload();
        break;
    }
  }

  /** Redraw the builder in place (modal key unchanged, so render() won't). */
  private renderBuilderRows(): void {
    this.renderModal();
  }

  private onChange(event: Event): void {
    const target = event.target as HTMLElement;
    if (target.id === 'pick-group') {
      const groupId = (target as HTMLSelectElement).value;
      const first = this.store.membersOf(groupId)[0] ?? null;
      void this.store.setIdentity(groupId, first);
      return;
    }
    if (target.id === 'pick-collaborator') {
      void this.store.setIdentity(this.store.ctx.groupId, (target as HTMLSelectElement).value);
      return;
    }
    if (target.getAttribute('data-cmd-change') === 'row-op') {
      this.syncBuilderFromDom();
      const index = Number(target.getAttribute('data-index'));
      const op = (target as HTMLSelectElement).value as EditOp;
      this.builder.rows[index] = emptyRow(op); // old fields don't apply to the new op
      this.renderBuilderRows();
    }
  }

  private onSubmit(event: Event): void {
    const form = event.target as HTMLFormElement;
    if (form.id === 'patch-builder') {
      event.preventDefault();
      this.submitBuilder();
    } else if (form.id === 'record-form') {
      event.preventDefault();
      this.submitRecord(form);
    } else if (form.id === 'upload-form') {
      event.preventDefault();
      void this.submitUpload(form);
    }
  }

  private submitBuilder(): void {
    this.syncBuilderFromDom();
    const result = rowsToPatch(this.builder.rows);
    if ('error' in result) {
      this.store.notify(result.error, 'error');
      return;
    }
    const modal = this.store.modal;
    if (modal?.kind === 'negotiate') {
      void this.store.openNegotiation(modal.processId, result.patch, this.builder.rationale, parseRule(this.builder.rule));
    } else if (modal?.kind === 'counter') {
      void this.store.counterPropose(modal.sessionId, result.patch, this.builder.rationale);
    }
  }

  private submitRecord(form: HTMLFormElement): void {
    const session = this.store.sessionDetail?.session;
    const modal = this.store.modal;
    if (!session || modal?.kind !== 'record') return;
    const consents: Record<string, boolean> = {};
    for (const participant of session.participants) consents[participant] = false;
    for (const box of Array.from(form.querySelectorAll('input[name="consent"]:checked'))) {
      consents[(box as HTMLInputElement).value] = true;
    }
    void this.store.recordHistory(modal.sessionId, consents);
  }

  private async readUploadDoc(form: HTMLFormElement): Promise<unknown> {
    const input = form.querySelector('input[type="file"]') as HTMLInputElement | null;
    const file = input?.files?.[0];
    if (file) {
      try {
        this.uploadDoc = JSON.parse(await file.text());
      } catch {
        this.store.notify('that file is not valid JSON', 'error');
        return null;
      }
    }
    if (this.uploadDoc === null) this.store.notify('choose a protocol file first', 'error');
    return this.uploadDoc;
  }

  private async validateUpload(): Promise<void> {
    const form = document.getElementById('upload-form') as HTMLFormElement | null;
    if (!form) return;
    const doc = await this.readUploadDoc(form);
    if (doc !== null) await this.store.validateUpload(doc);
  }

  private async submitUpload(form: HTMLFormElement): Promise<void> {
    const doc = await this.readUploadDoc(form);
    if (doc === null) return;
    const scopeValue = (form.querySelector('select[name="scope"]') as HTMLSelectElement).value;
    const scope: ScopeDoc | undefined =
      scopeValue === 'private' && this.store.ctx.groupId
        ? { kind: 'private', group_id: this.store.ctx.groupId }
        : { kind: 'catalog' };
    await this.store.uploadProtocol(doc, scope);
  }
}

export async function boot(): Promise<void> {
  const store = new AppStore(new ApiClient(''));
  const app = new App(store);
  await app.start();
}

if (typeof document !== 'undefined' && document.getElementById('main')) {
  void boot();
}
