// Entry point: wire the session to the DOM, the keyboard, and the
// polling timers. Served by the review service itself.

import { ApiClient } from './api.js';
import { ReviewSession } from './state.js';
import { attachKeyboard } from './keyboard.js';
import { renderComparison, renderNotices, renderProgress } from './render.js';

const PROGRESS_POLL_MS = 2000;
const RETRY_UNSENT_MS = 3000;

function boot(): void {
  const client = new ApiClient(window.location.origin);
  const reviewer = `ui:${window.navigator.userAgent.slice(0, 24)}`;
  const session = new ReviewSession(client, reviewer);

  const comparison = document.getElementById('comparison') as HTMLElement;
  const progress = document.getElementById('progress') as HTMLElement;
  const notices = document.getElementById('notices') as HTMLElement;

  session.onChange(() => {
    const view = session.view();
    renderComparison(client, view, comparison);
    renderProgress(view.progress, view.progressStale, progress);
    renderNotices(view, notices);
  });

  attachKeyboard(session, window);
  void session.refresh();
  window.setInterval(() => void session.pollProgress(), PROGRESS_POLL_MS);
  window.setInterval(() => void session.retryUnsent(), RETRY_UNSENT_MS);
}

document.addEventListener('DOMContentLoaded', boot);
