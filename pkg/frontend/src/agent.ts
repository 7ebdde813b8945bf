/**
 * The in-browser protocol agent: consent, interception decisions, and the
 * per-flow in-flight store. Pure application logic; the webRequest glue in
 * background.ts feeds it navigation events.
 */

import { canonicalOrigin, isSecureOrigin } from './origins.js';
import {
  AuthorizationParams,
  BISON_SUBJECT_TYPE,
  CONSTANT_REDIRECT_TARGET,
  authorizeAudience,
  offersBison,
  requestedAudience,
  returnFields,
  rewriteAuthorizationParams,
} from './rewrite.js';

export type ConsentDecision = 'pending' | 'approved' | 'denied';

export interface ConsentPrompt {
  spOrigin: string;
  audience: string;
  decision: ConsentDecision;
}

/** Everything kept for one flow; destroyed on completion or session end. */
export interface InFlightFlow {
  handle: string;
  originalRedirectUri: string;
  blind: bigint;
  audience: string;
  createdAt: number;
}

export type ConsentCallback = (prompt: ConsentPrompt) => boolean;

export type InterceptDecision =
  | { action: 'pass' }
  | { action: 'cancel'; reason: string }
  | { action: 'rewrite'; url: string; handle: string };

export type ReturnDecision =
  | { action: 'block'; reason: string }
  | { action: 'forward'; url: string; fields: { id_token: string; blind: string } };

const FLOW_TTL_MS = 600_000;

function randomHandle(): string {
  const buffer = new Uint8Array(16);
  crypto.getRandomValues(buffer);
  return [...buffer].map((b) => b.toString(16).padStart(2, '0')).join('');
}

function paramsFromUrl(url: string): AuthorizationParams | null {
  const parsed = new URL(url);
  const params = Object.fromEntries(parsed.searchParams) as Record<string, string>;
  for (const required of ['scope', 'client_id', 'redirect_uri', 'nonce']) {
    if (!(required in params)) return null;
  }
  return params as unknown as AuthorizationParams;
}

export class WebAgent {
  private flows = new Map<string, InFlightFlow>();

  constructor(private consent: ConsentCallback) {}

  /**
   * Decide what to do with a navigation. Pass-through for anything that is
   * not an opted-in authorization request on a secure page with an
   * authorized audience; consent denial cancels the navigation outright so
   * the original parameters never leave the device.
   */
  interceptAuthorization(url: string, pageOrigin: string, testBlind?: bigint): InterceptDecision {
    const parsed = new URL(url);
    const params = paramsFromUrl(url);
    if (params === null) return { action: 'pass' };
    if (!params.scope.split(' ').includes('openid')) return { action: 'pass' };
    if (!offersBison(params)) return { action: 'pass' };
    if (!isSecureOrigin(pageOrigin)) return { action: 'pass' };

    const audience = requestedAudience(params);
    if (!authorizeAudience(audience, pageOrigin)) return { action: 'pass' };

    const prompt: ConsentPrompt = {
      spOrigin: canonicalOrigin(pageOrigin),
      audience,
      decision: 'pending',
    };
    prompt.decision = this.consent(prompt) ? 'approved' : 'denied';
    if (prompt.decision !== 'approved') {
      return { action: 'cancel', reason: 'consent denied' };
    }

    const outcome = rewriteAuthorizationParams(params, pageOrigin, testBlind);
    const handle = randomHandle();
    this.flows.set(handle, { handle, ...outcome.record! });

    const rewritten = new URL(parsed.origin + parsed.pathname);
    for (const [key, value] of Object.entries(outcome.params)) {
      if (value !== undefined) rewritten.searchParams.set(key, value);
    }
    return { action: 'rewrite', url: rewritten.toString(), handle };
  }

  /** The return leg: a navigation posting the token to the constant target. */
  interceptReturn(targetUrl: string, idToken: string, handle: string): ReturnDecision {
    if (targetUrl.replace(/\/$/, '').split('?')[0] !== CONSTANT_REDIRECT_TARGET) {
      return { action: 'block', reason: 'not the constant return target' };
    }
    const flow = this.flows.get(handle);
    this.flows.delete(handle);
    if (flow === undefined) {
      return { action: 'block', reason: 'no in-flight flow for this return' };
    }
    if (Date.now() - flow.createdAt > FLOW_TTL_MS) {
      return { action: 'block', reason: 'stale flow' };
    }
    return { action: 'forward', url: flow.originalRedirectUri, fields: returnFields(idToken, flow.blind) };
  }

  inFlight(): number {
    return this.flows.size;
  }

  /** Session teardown: nothing survives the browsing session. */
  clear(): void {
    this.flows.clear();
  }
}
