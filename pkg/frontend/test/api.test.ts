import { describe, expect, it } from 'vitest';
import { ApiClient, ApiError } from '../src/api.js';
import { commentLoopEdit, seedFaq } from './fakeserver.js';

describe('ApiClient', () => {
  it('sends the collaborator identity header on every request', async () => {
    const { server, processId } = seedFaq();
    const api = new ApiClient('', server.handler);
    api.actor = 'john.smith';

    await api.listProcesses();
    await api.transitionsFor(processId);
    await api.trigger(processId, 't-ask-first');

    for (const entry of server.requestLog) {
      expect(entry.actor).toBe('john.smith');
    }
  });

  it('unwraps the error envelope into ApiError with code and status', async () => {
    const { server, processId } = seedFaq();
    const api = new ApiClient('', server.handler);
    api.actor = 'scott.tiger';

    // t-answer leaves q1 but the process is at q0
    const refusal = await api.trigger(processId, 't-answer').catch((e: unknown) => e);
    expect(refusal).toBeInstanceOf(ApiError);
    expect((refusal as ApiError).code).toBe('WRONG_SOURCE_STATE');
    expect((refusal as ApiError).status).toBe(409);
  });

  it('refuses a trigger without an identity', async () => {
    const { server, processId } = seedFaq();
    const api = new ApiClient('', server.handler);

    const refusal = await api.trigger(processId, 't-ask-first').catch((e: unknown) => e);
    expect((refusal as ApiError).code).toBe('MISSING_ACTOR');
  });

  it('maps unknown resources to 404 codes the views can banner on', async () => {
    const { server } = seedFaq();
    const api = new ApiClient('', server.handler);

    const refusal = await api.getProcess('proc-none').catch((e: unknown) => e);
    expect((refusal as ApiError).status).toBe(404);
    expect((refusal as ApiError).code).toBe('UNKNOWN_PROCESS');
  });

  it('returns a refused propagation report as data, not as an exception', async () => {
    const { server, groupId, processId } = seedFaq();
    const api = new ApiClient('', server.handler);
    api.actor = 'bill.bogard';

    // build a private adapted version via an accepted negotiation
    const session = await api.openNegotiation(processId, [commentLoopEdit()], 'let users comment');
    for (const member of Object.keys(server.groups[0]!.members)) {
      const voter = new ApiClient('', server.handler);
      voter.actor = member;
      await voter.vote(session.session_id, 'p-1', 'accept');
    }
    const closed = await api.closeSession(session.session_id);
    expect(closed.ruling).toBe('accepted');
    const version = closed.result_version as string;

    server.instantConflicts = [{ version, group_id: groupId, reason: 'diverged' }];
    const refused = await api.propagate(version, 'instant');
    expect(refused.applied).toBe(false);
    expect(refused.conflicts).toHaveLength(1);

    // a NOT_PRIVATE refusal is an error envelope, so it still throws
    await api.propagate(version, 'global');
    const second = await api.propagate(version, 'global').catch((e: unknown) => e);
    expect((second as ApiError).code).toBe('NOT_PRIVATE');
  });

  it('returns a refused adoption as data with the missing services listed', async () => {
    const { server, version, groupId } = seedFaq();
    server.compat.set(version, { compatible: false, missing: ['commentAnswer'] });
    const api = new ApiClient('', server.handler);
    api.actor = 'john.smith';

    const result = await api.adopt(version, groupId);
    expect(result.adopted).toBe(false);
    expect(result.missing_actions).toEqual(['commentAnswer']);
  });

  it('falls back to an HTTP_ code when the body is not an envelope', async () => {
    const api = new ApiClient('', () =>
      Promise.resolve(new Response('"half a page of html"', { status: 502 })),
    );
    const refusal = await api.listGroups().catch((e: unknown) => e);
    expect((refusal as ApiError).code).toBe('HTTP_502');
    expect((refusal as ApiError).status).toBe(502);
  });
});
