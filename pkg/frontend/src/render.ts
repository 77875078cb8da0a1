/**
 * HTML builders for every view. Pure functions from store data to markup;
 * interactive elements carry data-cmd attributes that app.ts dispatches on.
 * Nothing here decides what is allowed: buttons exist only where the server
 * said the operation applies (moves from /transitions, participation from
 * the session document, compatibility from the catalog entry).
 */

import { renderProcessGraph } from './graph.js';
import { EDIT_OPS, summarizeEdit, type EditRow } from './patchform.js';
import type { AppStore } from './store.js';
import type {
  CatalogEntry,
  HistoryRecord,
  ProcessDoc,
  ProposalDoc,
  SessionDoc,
  Tally,
} from './types.js';

export function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function trimLabel(text: string): string {
  return text.length > 24 ? text.slice(0, 23) + '…' : text;
}

function attr(text: string): string {
  return esc(text);
}

export function shortVersion(version: string): string {
  return version.length > 10 ? version.slice(0, 10) + '…' : version;
}

function statusBadge(process: ProcessDoc): string {
  if (process.status === 'completed') {
    const outcome = process.outcome ?? 'done';
    return `<span class="badge outcome-${attr(outcome)}">${esc(outcome)}</span>`;
  }
  if (process.status === 'retired') return '<span class="badge muted">retired</span>';
  return '<span class="badge running">running</span>';
}

function refinementBadge(level: string | null): string {
  return level ? `<span class="badge level-${attr(level)}">${esc(level)}</span>` : '<span class="badge muted">invalid</span>';
}

// -- header chrome ----------------------------------------------------------

export function renderIdentityPicker(store: AppStore): string {
  const groups = store.groups
    .map(
      (g) =>
        `<option value="${attr(g.group_id)}"${g.group_id === store.ctx.groupId ? ' selected' : ''}>${esc(g.group_id)}</option>`,
    )
    .join('');
  const members = store
    .membersOf(store.ctx.groupId)
    .map(
      (m) =>
        `<option value="${attr(m)}"${m === store.ctx.collaborator ? ' selected' : ''}>${esc(m)}</option>`,
    )
    .join('');
  return (
    `<label>team <select id="pick-group">${groups}</select></label>` +
    `<label>acting as <select id="pick-collaborator">${members}</select></label>` +
    `<span class="poll-dot ${store.connected ? 'ok' : 'down'}" title="${
      store.connected ? `live, cursor ${store.ctx.cursor}` : 'server unreachable'
    }"></span>`
  );
}

export function renderNotices(store: AppStore): string {
  return store.notices
    .map(
      (n) =>
        `<div class="toast ${n.tone}" data-cmd="dismiss-notice" data-id="${n.id}">${esc(n.text)}</div>`,
    )
    .join('');
}

// -- processes --------------------------------------------------------------

export function renderProcessList(store: AppStore): string {
  if (store.processes.length === 0) return '<p class="empty">No processes yet.</p>';
  const rows = store.processes
    .map(
      (p) => `
      <tr class="rowlink" data-cmd="open-process" data-id="${attr(p.process_id)}">
        <td>${esc(p.process_id)}</td>
        <td><code>${esc(shortVersion(p.protocol_version))}</code></td>
        <td>${esc(p.group.group_id)}</td>
        <td>${esc(p.current_state)}</td>
        <td>${statusBadge(p)}</td>
      </tr>`,
    )
    .join('');
  return `
    <h2>Processes</h2>
    <table class="list">
      <thead><tr><th>process</th><th>version</th><th>team</th><th>state</th><th>status</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderProcessDetail(store: AppStore): string {
  if (store.detailError) {
    return `<div class="banner error">Process not found (${esc(store.detailError)}).</div>`;
  }
  const detail = store.processDetail;
  if (!detail) return '<p class="empty">Loading…</p>';
  const { process, protocol, moves } = detail;
  const readOnly = process.status !== 'running';
  const enabledIds = new Set(moves.map((m) => m.id));

  const moveButtons = readOnly
    ? ''
    : moves.length === 0
      ? `<p class="empty">No moves for ${esc(store.ctx.collaborator ?? 'you')} at ${esc(process.current_state)}.</p>`
      : moves
          .map(
            (m) => `
          <button class="move" data-cmd="trigger" data-process="${attr(process.process_id)}" data-transition="${attr(m.id)}">
            ${esc(m.action.name)}
            <small>${esc(m.from)} → ${esc(m.to)}</small>
          </button>`,
          )
          .join('');

  const history = process.history
    .slice()
    .reverse()
    .map((e) => {
      const what =
        e.kind === 'transition'
          ? `${e.actor ?? '?'} moved ${e.from_state} → ${e.to_state} (${e.transition_id})`
          : e.kind === 'failure'
            ? `action failed on ${e.transition_id ?? '?'}, stayed at ${e.from_state}`
            : `${e.kind} ${e.from_state} → ${e.to_state}`;
      return `<li><span class="ts">${esc(e.timestamp)}</span> ${esc(what)}</li>`;
    })
    .join('');

  return `
    <div class="detail-head">
      <h2>${esc(process.process_id)} ${statusBadge(process)}</h2>
      <div class="meta">
        ruled by <a data-cmd="open-protocol" data-version="${attr(process.protocol_version)}" href="#"><code>${esc(shortVersion(process.protocol_version))}</code></a>
        · team ${esc(process.group.group_id)}
        ${process.superseded ? '· <span class="badge muted">superseded</span>' : ''}
      </div>
    </div>
    ${renderProcessGraph(protocol, { currentState: process.current_state, enabledIds })}
    <section class="moves">
      <h3>Your moves</h3>
      ${readOnly ? `<p class="empty">Process ${esc(process.status)}; read only.</p>` : moveButtons}
    </section>
    <section>
      <button data-cmd="start-negotiation" data-process="${attr(process.process_id)}" ${readOnly ? 'disabled' : ''}>
        Propose a protocol change…
      </button>
    </section>
    <section>
      <h3>Timeline</h3>
      <ul class="timeline">${history || '<li class="empty">nothing yet</li>'}</ul>
    </section>`;
}

// -- negotiations ------------------------------------------------------------

export function renderSessionList(store: AppStore): string {
  if (store.sessions.length === 0) return '<p class="empty">No negotiations.</p>';
  const rows = store.sessions
    .map(
      (s) => `
      <tr class="rowlink" data-cmd="open-negotiation" data-id="${attr(s.session_id)}">
        <td>${esc(s.session_id)}</td>
        <td>${esc(s.process_id)}</td>
        <td>${s.proposals.length}</td>
        <td><span class="badge session-${attr(s.status)}">${esc(s.status)}</span></td>
      </tr>`,
    )
    .join('');
  return `
    <h2>Negotiations</h2>
    <table class="list">
      <thead><tr><th>session</th><th>process</th><th>proposals</th><th>status</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function tallyFor(session: SessionDoc, proposalId: string): Tally {
  const votes = session.votes[proposalId] ?? {};
  const values = Object.values(votes);
  return {
    accept: values.filter((v) => v === 'accept').length,
    reject: values.filter((v) => v === 'reject').length,
    pending: session.participants.length - values.length,
  };
}

function renderProposalCard(
  session: SessionDoc,
  proposal: ProposalDoc,
  isHead: boolean,
  viewer: string | null,
  open: boolean,
): string {
  const tally = tallyFor(session, proposal.proposal_id);
  const votes = session.votes[proposal.proposal_id] ?? {};
  const isParticipant = viewer !== null && session.participants.includes(viewer);
  const edits =
    proposal.patch === null
      ? '<li class="redacted">content withheld (author did not consent)</li>'
      : proposal.patch.map((e) => `<li>${esc(summarizeEdit(e))}</li>`).join('');
  const voteButtons =
    isHead && open && isParticipant
      ? `<div class="vote-buttons">
          <button data-cmd="vote" data-session="${attr(session.session_id)}" data-proposal="${attr(proposal.proposal_id)}" data-value="accept">Accept</button>
          <button data-cmd="vote" data-session="${attr(session.session_id)}" data-proposal="${attr(proposal.proposal_id)}" data-value="reject">Reject</button>
         </div>`
      : '';
  const yourVote = viewer && votes[viewer] ? ` · you voted ${votes[viewer]}` : '';
  return `
    <div class="proposal ${isHead ? 'head' : 'superseded'}">
      <div class="proposal-top">
        <strong>${esc(proposal.proposal_id)}</strong> by ${esc(proposal.author)}
        ${proposal.supersedes ? `<span class="supersedes">supersedes ${esc(proposal.supersedes)}</span>` : ''}
        ${isHead ? '' : '<span class="badge muted">superseded</span>'}
      </div>
      ${proposal.rationale === null ? '<p class="redacted">rationale withheld</p>' : proposal.rationale ? `<p class="rationale">${esc(proposal.rationale)}</p>` : ''}
      <ul class="edits">${edits}</ul>
      <div class="tally">
        <span class="accept">${tally.accept} accept</span>
        <span class="reject">${tally.reject} reject</span>
        <span class="pending">${tally.pending} pending</span>${esc(yourVote)}
      </div>
      ${voteButtons}
    </div>`;
}

export function renderSessionDetail(store: AppStore): string {
  if (store.detailError) {
    return `<div class="banner error">Negotiation not found (${esc(store.detailError)}).</div>`;
  }
  const detail = store.sessionDetail;
  if (!detail) return '<p class="empty">Loading…</p>';
  const { session, baseProtocol } = detail;
  const viewer = store.ctx.collaborator;
  const isParticipant = viewer !== null && session.participants.includes(viewer);
  const open = session.status === 'open';
  const head = session.proposals[session.proposals.length - 1] ?? null;

  const participants = session.participants
    .map((p) => `<span class="chip${p === viewer ? ' you' : ''}">${esc(p)}</span>`)
    .join(' ');

  const chain = session.proposals
    .map((p, i) => renderProposalCard(session, p, i === session.proposals.length - 1, viewer, open))
    .join('<div class="chain-arrow">↑ superseded by</div>');

  // the head proposal's patch shown as a diff over the base protocol
  const diffGraph =
    baseProtocol && head && head.patch !== null
      ? renderProcessGraph(baseProtocol, { patch: head.patch })
      : '';

  const rule =
    session.rule.kind === 'unanimity' ? 'unanimity' : `quorum ≥ ${(session.rule as { fraction: number }).fraction}`;

  const controls = open
    ? isParticipant
      ? `<div class="session-controls">
          <button data-cmd="start-counter" data-session="${attr(session.session_id)}">Counter-propose…</button>
          <button data-cmd="close-session" data-session="${attr(session.session_id)}">Close session</button>
         </div>`
      : '<p class="empty">You are not a participant; this panel is read only.</p>'
    : `<div class="session-result">
        Closed: <span class="badge session-${attr(session.status)}">${esc(session.status)}</span>
        ${
          session.result_version
            ? `→ <a data-cmd="open-protocol" data-version="${attr(session.result_version)}" href="#"><code>${esc(
                shortVersion(session.result_version),
              )}</code></a>`
            : ''
        }
        ${isParticipant ? `<button data-cmd="start-record" data-session="${attr(session.session_id)}">Archive with consents…</button>` : ''}
       </div>`;

  return `
    <div class="detail-head">
      <h2>${esc(session.session_id)} <span class="badge session-${attr(session.status)}">${esc(session.status)}</span></h2>
      <div class="meta">
        adapting <a data-cmd="open-process" data-id="${attr(session.process_id)}" href="#">${esc(session.process_id)}</a>
        from <code>${esc(shortVersion(session.base_version))}</code>
        · decision rule: ${esc(rule)} · opened by ${esc(session.opened_by)}
      </div>
    </div>
    <section><h3>Participants</h3>${participants}</section>
    ${diffGraph ? `<section><h3>Head proposal on the protocol</h3>${diffGraph}</section>` : ''}
    <section class="chain"><h3>Proposal chain</h3>${chain}</section>
    ${controls}`;
}

// -- catalog, lineage, history ----------------------------------------------

function compatibilityCell(entry: CatalogEntry): string {
  if (entry.compatible === null) return '<span class="badge muted">no environment</span>';
  if (entry.compatible) return '<span class="badge ok">compatible</span>';
  return `<span class="badge bad" title="missing: ${attr(entry.missing_actions.join(', '))}">missing ${esc(
    entry.missing_actions.join(', '),
  )}</span>`;
}

export function renderCatalog(store: AppStore): string {
  if (store.catalogEntries.length === 0) return '<p class="empty">Catalog is empty for this team.</p>';
  const rows = store.catalogEntries
    .map((e) => {
      // adopt offered unless the server flagged the environment incompatible
      const adoptDisabled = e.compatible === false ? ' disabled' : '';
      return `
      <tr data-version="${attr(e.version)}">
        <td><a data-cmd="open-protocol" data-version="${attr(e.version)}" href="#"><code>${esc(shortVersion(e.version))}</code></a></td>
        <td>${esc(e.protocol_id)}</td>
        <td>${refinementBadge(e.refinement)}</td>
        <td>${compatibilityCell(e)}</td>
        <td class="actions">
          <button data-cmd="open-lineage" data-version="${attr(e.version)}">lineage</button>
          <button data-cmd="open-history" data-version="${attr(e.version)}">history</button>
          <button data-cmd="adopt" data-version="${attr(e.version)}"${adoptDisabled}>adopt</button>
        </td>
      </tr>`;
    })
    .join('');
  return `
    <h2>Catalog for ${esc(store.ctx.groupId ?? '—')}</h2>
    <table class="list">
      <thead><tr><th>version</th><th>protocol</th><th>refinement</th><th>environment fit</th><th></th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderLineage(store: AppStore): string {
  if (store.lineageHops.length === 0) return '<p class="empty">No lineage recorded.</p>';
  const hops = store.lineageHops
    .map(
      (hop) => `
      <li>
        <a data-cmd="open-protocol" data-version="${attr(hop.version)}" href="#"><code>${esc(shortVersion(hop.version))}</code></a>
        ${hop.parent ? `<span class="meta">derived from <code>${esc(shortVersion(hop.parent))}</code></span>` : '<span class="badge muted">root</span>'}
        ${hop.negotiation_ref ? `<span class="meta">via negotiation <a data-cmd="open-negotiation" data-id="${attr(hop.negotiation_ref)}" href="#">${esc(hop.negotiation_ref)}</a></span>` : ''}
      </li>`,
    )
    .join('');
  return `<h2>Lineage</h2><ol class="lineage">${hops}</ol>`;
}

function renderRecord(record: HistoryRecord): string {
  const proposals = record.proposals
    .map((p) => {
      return `
      <li class="${p.patch === null ? 'redacted' : ''}">
        <strong>${esc(p.proposal_id)}</strong> by ${esc(p.author)}:
        ${
          p.patch === null
            ? '<em>content withheld</em>'
            : p.patch.map((e) => esc(summarizeEdit(e))).join('; ') +
              (p.rationale ? ` — "${esc(p.rationale)}"` : '')
        }
      </li>`;
    })
    .join('');
  const votes = Object.entries(record.votes)
    .map(([pid, byVoter]) => {
      const cast = Object.entries(byVoter)
        .map(([voter, v]) => `${esc(voter)}: ${esc(v)}`)
        .join(', ');
      return `<li>${esc(pid)} — ${cast || '<em>none visible</em>'}</li>`;
    })
    .join('');
  return `
    <div class="record">
      <div class="record-top">
        <strong>${esc(record.session_id)}</strong>
        <span class="badge session-${attr(record.status)}">${esc(record.status)}</span>
        <span class="meta">${esc(record.base_version)} → ${esc(record.result_version ?? '—')} · recorded ${esc(record.recorded_at)}</span>
      </div>
      <div class="meta">participants: ${record.participants.map((p) => esc(p)).join(', ')}</div>
      <h4>Proposals</h4><ul>${proposals}</ul>
      <h4>Votes</h4><ul>${votes || '<li class="empty">none</li>'}</ul>
    </div>`;
}

export function renderHistory(store: AppStore): string {
  if (store.detailError) {
    return `<div class="banner error">History unavailable (${esc(store.detailError)}).</div>`;
  }
  if (store.historyRecords.length === 0) {
    return '<h2>Negotiation history</h2><p class="empty">No recorded negotiations along this lineage.</p>';
  }
  return `<h2>Negotiation history</h2>
    <p class="meta">Records are redacted by the server for your team; withheld entries were authored by non-consenting participants.</p>
    ${store.historyRecords.map(renderRecord).join('')}`;
}

// -- protocols ----------------------------------------------------------------

export function renderProtocolList(store: AppStore): string {
  const rows = store.protocols
    .map((v) => {
      const scope =
        v.scope.kind === 'private' ? `private to ${esc(v.scope.group_id)}` : 'catalog';
      return `
      <tr class="rowlink" data-cmd="open-protocol" data-version="${attr(v.protocol.version)}">
        <td><code>${esc(shortVersion(v.protocol.version))}</code></td>
        <td>${esc(v.protocol.protocol_id)}</td>
        <td>${refinementBadge(v.refinement)}</td>
        <td>${scope}</td>
        <td>${v.tombstoned ? '<span class="badge muted">replaced</span>' : ''}</td>
      </tr>`;
    })
    .join('');
  return `
    <h2>Protocol versions</h2>
    <p><button data-cmd="start-upload">Upload a protocol file…</button></p>
    <table class="list">
      <thead><tr><th>version</th><th>protocol</th><th>refinement</th><th>visibility</th><th></th></tr></thead>
      <tbody>${rows || ''}</tbody>
    </table>`;
}

export function renderProtocolDetail(store: AppStore): string {
  if (store.detailError) {
    return `<div class="banner error">Version not found (${esc(store.detailError)}).</div>`;
  }
  const view = store.protocolDetail;
  if (!view) return '<p class="empty">Loading…</p>';
  const p = view.protocol;
  const roleBindings = p.role_bindings
    .map((rb) => `<li>${esc(rb.role)}: ${rb.collaborators.map(esc).join(', ')}</li>`)
    .join('');
  return `
    <div class="detail-head">
      <h2><code>${esc(p.version)}</code> ${refinementBadge(view.refinement)}
        ${view.tombstoned ? '<span class="badge muted">replaced</span>' : ''}</h2>
      <div class="meta">
        protocol ${esc(p.protocol_id)}
        ${p.parent_version ? `· parent <a data-cmd="open-protocol" data-version="${attr(p.parent_version)}" href="#"><code>${esc(shortVersion(p.parent_version))}</code></a>` : ''}
        · <a data-cmd="open-lineage" data-version="${attr(p.version)}" href="#">lineage</a>
        · <a data-cmd="open-history" data-version="${attr(p.version)}" href="#">history</a>
      </div>
    </div>
    ${renderProcessGraph(p)}
    <section>
      <h3>Roles</h3>
      <p>${p.roles.map((r) => `<span class="chip">${esc(r)}</span>`).join(' ') || '<span class="empty">none</span>'}</p>
      ${roleBindings ? `<ul>${roleBindings}</ul>` : '<p class="empty">No role bindings (abstract template).</p>'}
    </section>`;
}

// -- modals -------------------------------------------------------------------

export interface BuilderOptions {
  states: { id: string; label: string }[];
  roles: string[];
  transitions: string[];
}

function editRowForm(row: EditRow, index: number, options: BuilderOptions): string {
  const f = (name: string) => attr(row.fields[name] ?? '');
  const stateOptions = (selected: string) =>
    ['<option value=""></option>']
      .concat(
        options.states.map(
          (s) =>
            `<option value="${attr(s.id)}"${s.id === selected ? ' selected' : ''}>${esc(s.id)}${
              s.label ? ` — ${esc(trimLabel(s.label))}` : ''
            }</option>`,
        ),
      )
      .join('');
  const transitionOptions = (selected: string) =>
    ['<option value=""></option>']
      .concat(
        options.transitions.map(
          (t) => `<option value="${attr(t)}"${t === selected ? ' selected' : ''}>${esc(t)}</option>`,
        ),
      )
      .join('');
  const opOptions = EDIT_OPS.map(
    (op) => `<option value="${op}"${op === row.op ? ' selected' : ''}>${op.replace('_', ' ')}</option>`,
  ).join('');

  let fields: string;
  switch (row.op) {
    case 'add_transition':
      fields = `
        <input name="id" placeholder="transition id" value="${f('id')}">
        <select name="from" title="from state">${stateOptions(row.fields['from'] ?? '')}</select>
        <span>→</span>
        <select name="to" title="to state">${stateOptions(row.fields['to'] ?? '')}</select>
        <input name="role" list="known-roles" placeholder="role" value="${f('role')}">
        <input name="action" placeholder="action name" value="${f('action')}">
        <input name="binding" placeholder="endpoint URI (optional)" value="${f('binding')}">`;
      break;
    case 'remove_transition':
    case 'unbind_action':
      fields = `<select name="transition_id">${transitionOptions(row.fields['transition_id'] ?? '')}</select>`;
      break;
    case 'add_state':
      fields = `
        <input name="id" placeholder="state id" value="${f('id')}">
        <select name="kind">
          ${['intermediate', 'start', 'end'].map((k) => `<option value="${k}"${(row.fields['kind'] ?? 'intermediate') === k ? ' selected' : ''}>${k}</option>`).join('')}
        </select>
        <input name="label" placeholder="label" value="${f('label')}">
        <input name="outcome" placeholder="outcome (end states)" value="${f('outcome')}">`;
      break;
    case 'remove_state':
      fields = `<select name="state_id">${stateOptions(row.fields['state_id'] ?? '')}</select>`;
      break;
    case 'bind_action':
      fields = `
        <select name="transition_id">${transitionOptions(row.fields['transition_id'] ?? '')}</select>
        <input name="uri" placeholder="endpoint URI" value="${f('uri')}">`;
      break;
    case 'bind_role':
      fields = `
        <input name="role" list="known-roles" placeholder="role" value="${f('role')}">
        <input name="collaborators" placeholder="ids, comma separated" value="${f('collaborators')}">`;
      break;
    case 'unbind_role':
      fields = `<input name="role" list="known-roles" placeholder="role" value="${f('role')}">`;
      break;
  }
  return `
    <fieldset class="edit-row" data-index="${index}">
      <select name="op" data-cmd-change="row-op" data-index="${index}">${opOptions}</select>
      ${fields}
      <button type="button" data-cmd="remove-row" data-index="${index}" title="remove this edit">✕</button>
    </fieldset>`;
}

export interface BuilderModalData {
  title: string;
  submitCmd: string;
  submitLabel: string;
  contextId: string; // process or session id
  rows: EditRow[];
  options: BuilderOptions;
  askRule: boolean;
}

export function renderPatchBuilder(data: BuilderModalData): string {
  const datalist = `<datalist id="known-roles">${data.options.roles.map((r) => `<option value="${attr(r)}">`).join('')}</datalist>`;
  const ruleField = data.askRule
    ? `<label class="rule-field">decision rule
        <select name="rule">
          <option value="unanimity">unanimity (everyone accepts)</option>
          <option value="quorum-0.5">quorum: half accept</option>
          <option value="quorum-0.67">quorum: two thirds accept</option>
        </select>
      </label>`
    : '';
  return `
    <form id="patch-builder" data-context="${attr(data.contextId)}">
      <h3>${esc(data.title)}</h3>
      ${datalist}
      <div id="edit-rows">${data.rows.map((row, i) => editRowForm(row, i, data.options)).join('')}</div>
      <button type="button" data-cmd="add-row">+ add another edit</button>
      <label>why this change
        <textarea name="rationale" rows="2" placeholder="rationale shown to the other participants"></textarea>
      </label>
      ${ruleField}
      <div class="modal-actions">
        <button type="submit" data-cmd="${attr(data.submitCmd)}">${esc(data.submitLabel)}</button>
        <button type="button" data-cmd="close-modal">Cancel</button>
      </div>
    </form>`;
}

/** The three strategies, in plain language, for the dialog after an accepted close. */
export function renderPropagationDialog(version: string, report: { conflicts?: unknown[] } | null): string {
  const conflictBox = report
    ? `<div class="banner error">Instant replacement refused; nothing changed.
        <ul>${(report.conflicts ?? []).map((c) => `<li>${esc(JSON.stringify(c))}</li>`).join('')}</ul>
       </div>`
    : '';
  return `
    <div class="propagate-dialog">
      <h3>Share <code>${esc(shortVersion(version))}</code>?</h3>
      <p>The adapted protocol currently belongs to your team alone. Choose how far it travels:</p>
      ${conflictBox}
      <div class="strategy-cards">
        <button class="strategy" data-cmd="propagate" data-version="${attr(version)}" data-strategy="local">
          <strong>Local</strong>
          <span>Keep it to your team. Other teams keep using the original; you can still share later.</span>
        </button>
        <button class="strategy" data-cmd="propagate" data-version="${attr(version)}" data-strategy="global">
          <strong>Global</strong>
          <span>Publish to the community catalog. New groups can pick it; running groups stay on the original.</span>
        </button>
        <button class="strategy" data-cmd="propagate" data-version="${attr(version)}" data-strategy="instant">
          <strong>Instant</strong>
          <span>Replace the original everywhere, migrating every running group now. All or nothing: one conflict and nothing changes.</span>
        </button>
      </div>
      <div class="modal-actions"><button data-cmd="close-modal">Decide later</button></div>
    </div>`;
}

export function renderRecordDialog(session: SessionDoc): string {
  const boxes = session.participants
    .map(
      (p) => `
      <label class="consent">
        <input type="checkbox" name="consent" value="${attr(p)}"> ${esc(p)}
      </label>`,
    )
    .join('');
  return `
    <form id="record-form" data-session="${attr(session.session_id)}">
      <h3>Archive ${esc(session.session_id)}</h3>
      <p>Tick the participants who consent to appear in cross-team history.
         Everyone unticked is shown to other teams as a placeholder with their
         contributions withheld.</p>
      ${boxes}
      <div class="modal-actions">
        <button type="submit" data-cmd="submit-record">Archive</button>
        <button type="button" data-cmd="close-modal">Cancel</button>
      </div>
    </form>`;
}

export function renderUploadDialog(store: AppStore): string {
  const report = store.uploadReport;
  const findings = report
    ? report.valid
      ? '<div class="banner ok">Document is structurally valid.</div>'
      : `<div class="banner error"><ul>${report.findings
          .map((f) => `<li>${esc(f.severity)}: ${esc(f.code)} on ${esc(f.subject)}</li>`)
          .join('')}</ul></div>`
    : '';
  return `
    <form id="upload-form">
      <h3>Upload a protocol document</h3>
      <input type="file" name="file" accept="application/json,.json">
      <label>visibility
        <select name="scope">
          <option value="catalog">community catalog</option>
          <option value="private">private to my team</option>
        </select>
      </label>
      ${findings}
      <div class="modal-actions">
        <button type="button" data-cmd="validate-upload">Validate</button>
        <button type="submit" data-cmd="submit-upload">Register</button>
        <button type="button" data-cmd="close-modal">Cancel</button>
      </div>
    </form>`;
}
