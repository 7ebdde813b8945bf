/**
 * The request rewrite contract, shared byte for byte with the headless agent.
 *
 * Given an authorization request that opts into blinded derivation and an
 * authorized audience: the client identifier becomes the blinded audience
 * element, the return location becomes the constant non-resolving target,
 * and the nonce becomes a hash binding the provider's nonce to the
 * user-facing origin. Everything else identifying is stripped.
 */

import { sha512 } from '@noble/hashes/sha2.js';

import { b64uEncode, concat, utf8 } from './b64.js';
import {
  elementToB64,
  hashToGroup,
  randomScalar,
  scalarFromB64,
  scalarMult,
  scalarToB64,
} from './group.js';
import { canonicalOrigin, originHost } from './origins.js';
import { isRegistrableSuffixOf } from './psl.js';

export const CONSTANT_REDIRECT_TARGET = 'https://anonymous.invalid/bison';
export const BISON_SUBJECT_TYPE = 'bison';

export interface AuthorizationParams {
  scope: string;
  client_id: string;
  redirect_uri: string;
  nonce: string;
  response_type?: string;
  response_mode?: string;
  pairwise_subject_types?: string;
  pairwise_subject_type?: string;
  audience_id?: string;
  blind?: string;
  [key: string]: string | undefined;
}

export interface RewriteOutcome {
  params: AuthorizationParams;
  /** Present only when the request was actually blinded. */
  record?: {
    originalRedirectUri: string;
    blind: bigint;
    audience: string;
    createdAt: number;
  };
}

export function nonceBinding(origin: string, nonce: string): string {
  if (!nonce) throw new Error('nonce must be non-empty');
  return b64uEncode(sha512(concat(utf8(canonicalOrigin(origin)), utf8(nonce))));
}

export function requestedAudience(params: AuthorizationParams): string {
  if (params.audience_id !== undefined) return params.audience_id;
  try {
    return originHost(params.client_id);
  } catch {
    return params.client_id;
  }
}

export function offersBison(params: AuthorizationParams): boolean {
  return (params.pairwise_subject_types ?? '').split(' ').includes(BISON_SUBJECT_TYPE);
}

export function authorizeAudience(audience: string, pageOrigin: string): boolean {
  return isRegistrableSuffixOf(audience, originHost(pageOrigin));
}

/**
 * Apply the rewrite. The caller has already obtained consent and checked
 * the audience; `blind` is injectable for the provider-chosen-blind variant
 * and for test vectors.
 */
export function rewriteAuthorizationParams(
  params: AuthorizationParams,
  pageOrigin: string,
  blind?: bigint,
): RewriteOutcome {
  const audience = requestedAudience(params);
  let r = blind;
  if (r === undefined && params.blind !== undefined) r = scalarFromB64(params.blind);
  if (r === undefined) r = randomScalar();
  const blinded = scalarMult(r, hashToGroup(utf8(audience)));
  return {
    params: {
      scope: params.scope,
      client_id: elementToB64(blinded),
      redirect_uri: CONSTANT_REDIRECT_TARGET,
      nonce: nonceBinding(pageOrigin, params.nonce),
      response_type: params.response_type ?? 'id_token',
      response_mode: params.response_mode ?? 'form_post',
      pairwise_subject_type: BISON_SUBJECT_TYPE,
    },
    record: {
      originalRedirectUri: params.redirect_uri,
      blind: r,
      audience,
      createdAt: Date.now(),
    },
  };
}

export function returnFields(idToken: string, blind: bigint): { id_token: string; blind: string } {
  return { id_token: idToken, blind: scalarToB64(blind) };
}
