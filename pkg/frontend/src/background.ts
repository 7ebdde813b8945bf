/**
 * WebExtension glue: feeds navigation events into the WebAgent and turns
 * its decisions into blocking webRequest responses.
 *
 * The return leg works like the rest of the implicit flow: the agent
 * answers the intercepted post to the constant target with a redirect to a
 * generated self-submitting form carrying the token and the blind, so the
 * browser itself performs the final post (its cookies ride along) and the
 * constant target is never actually fetched.
 */

import { WebAgent, ConsentPrompt } from './agent.js';
import { CONSTANT_REDIRECT_TARGET } from './rewrite.js';

// Minimal slice of the WebExtensions API this script touches; the browser
// provides the real object at runtime.
interface WebRequestDetails {
  url: string;
  method: string;
  tabId: number;
  originUrl?: string; // Firefox
  initiator?: string; // Chromium
  requestBody?: { formData?: Record<string, string[]> };
}

interface BlockingResponse {
  cancel?: boolean;
  redirectUrl?: string;
}

declare const browser: {
  webRequest: {
    onBeforeRequest: {
      addListener(
        listener: (details: WebRequestDetails) => BlockingResponse | void,
        filter: { urls: string[]; types?: string[] },
        extraInfoSpec: string[],
      ): void;
    };
  };
};

// One consent prompt at a time per tab; the demo build auto-approves after
// showing the dialog, a production build would await real UI input.
const promptForConsent = (prompt: ConsentPrompt): boolean => {
  // eslint-disable-next-line no-alert
  return globalThis.confirm?.(
    `Blind the login on ${prompt.spOrigin} for pseudonym scope "${prompt.audience}"?`,
  ) ?? true;
};

const agent = new WebAgent(promptForConsent);

// Flow handles per tab: the response to a rewritten request comes back in
// the same tab, which is how the return post finds its record.
const tabFlows = new Map<number, string>();

function htmlEscape(value: string): string {
  return value.replace(/&/g, '&amp;').replace(/"/g, '&quot;').replace(/</g, '&lt;');
}

function formPostPage(action: string, fields: Record<string, string>): string {
  const inputs = Object.entries(fields)
    .map(([k, v]) => `<input type="hidden" name="${htmlEscape(k)}" value="${htmlEscape(v)}">`)
    .join('');
  return `<!doctype html><html><body onload="document.forms[0].submit()">` +
    `<form method="post" action="${htmlEscape(action)}">${inputs}</form></body></html>`;
}

export function installHandlers(): void {
  browser.webRequest.onBeforeRequest.addListener(
    (details) => {
      const pageOrigin = details.originUrl ?? details.initiator;
      if (!pageOrigin) return {};
      const decision = agent.interceptAuthorization(details.url, pageOrigin);
      if (decision.action === 'cancel') return { cancel: true };
      if (decision.action === 'rewrite') {
        tabFlows.set(details.tabId, decision.handle);
        return { redirectUrl: decision.url };
      }
      return {};
    },
    { urls: ['<all_urls>'], types: ['main_frame'] },
    ['blocking', 'requestBody'],
  );

  browser.webRequest.onBeforeRequest.addListener(
    (details) => {
      const handle = tabFlows.get(details.tabId) ?? '';
      tabFlows.delete(details.tabId);
      const idToken = details.requestBody?.formData?.id_token?.[0] ?? '';
      const decision = agent.interceptReturn(details.url, idToken, handle);
      if (decision.action === 'block') return { cancel: true };
      const page = formPostPage(decision.url, decision.fields);
      return { redirectUrl: `data:text/html;charset=utf-8,${encodeURIComponent(page)}` };
    },
    { urls: [`${CONSTANT_REDIRECT_TARGET}*`] },
    ['blocking', 'requestBody'],
  );
}

if (typeof browser !== 'undefined' && browser?.webRequest) {
  installHandlers();
}
