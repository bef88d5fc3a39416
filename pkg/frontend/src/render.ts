// DOM rendering: side-by-side comparison, flag badges, queue status,
// and the per-class progress chart with its tolerance band.

import { ApiClient, ReviewItem, Progress } from './api.js';
import { SessionView } from './state.js';
import { formatRatio, formatScore } from './format.js';

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function imagePane(
  client: ApiClient,
  item: ReviewItem,
  which: 'source' | 'generated'
): HTMLElement {
  const pane = el('div', 'pane');
  pane.appendChild(el('h3', undefined, which));
  const img = document.createElement('img');
  img.src = client.imageUrl(item.item_id, which);
  img.alt = `${which} image for ${item.item_id}`;
  img.onerror = () => {
    img.remove();
    const failure = el('div', 'image-error', `failed to load ${which} image`);
    const retry = el('button', undefined, 'retry') as HTMLButtonElement;
    retry.onclick = () => {
      failure.remove();
      img.src = `${client.imageUrl(item.item_id, which)}&retry=${Date.now()}`;
      pane.appendChild(img);
    };
    failure.appendChild(retry);
    pane.appendChild(failure);
  };
  pane.appendChild(img);
  return pane;
}

function badges(item: ReviewItem): HTMLElement {
  const row = el('div', 'badges');
  row.appendChild(
    el('span', `badge severity-${item.flags.severity}`, item.flags.severity)
  );
  row.appendChild(
    el('span', 'badge', `structure ${formatScore(item.flags.structure_score)}`)
  );
  row.appendChild(
    el('span', 'badge', `clipped ${formatScore(item.flags.clipped_fraction)}`)
  );
  row.appendChild(
    el('span', 'badge', `${item.source_domain} → ${item.target_domain}`)
  );
  return row;
}

export function renderComparison(
  client: ApiClient,
  view: SessionView,
  container: HTMLElement
): void {
  container.replaceChildren();
  const item = view.items.length
    ? view.items[view.cursor % view.items.length]
    : null;
  if (!item) {
    container.appendChild(el('p', 'done', 'queue empty - nothing pending'));
    return;
  }
  const header = el('div', 'item-header');
  header.appendChild(
    el(
      'span',
      undefined,
      `${item.item_id}  (${(view.cursor % view.items.length) + 1}/${view.items.length} pending)`
    )
  );
  container.appendChild(header);
  container.appendChild(badges(item));
  const split = el('div', 'split');
  split.appendChild(imagePane(client, item, 'source'));
  split.appendChild(imagePane(client, item, 'generated'));
  container.appendChild(split);
}

export function renderProgress(progress: Progress | null, stale: boolean, container: HTMLElement): void {
  container.replaceChildren();
  if (!progress) {
    container.appendChild(el('p', undefined, 'no progress data yet'));
    return;
  }
  const headline = el(
    'div',
    'progress-headline',
    `ratio ${formatRatio(progress.ratio)} / tolerance ${formatRatio(progress.tolerance)}` +
      (progress.balanced ? ' - balanced' : '')
  );
  if (stale) {
    headline.appendChild(el('span', 'stale', ' (stale)'));
  }
  container.appendChild(headline);

  const counts = el(
    'div',
    'state-counts',
    `pending ${progress.counts.pending ?? 0} / accepted ${progress.counts.accepted ?? 0}` +
      ` / rejected ${progress.counts.rejected ?? 0}`
  );
  container.appendChild(counts);

  const chart = el('div', 'chart');
  const values = Object.values(progress.predicted);
  const peak = Math.max(...values, 1);
  // balanced means every class sits inside [peak/tolerance, peak]
  const bandFloor = peak / progress.tolerance;
  for (const [name, count] of Object.entries(progress.predicted)) {
    const column = el('div', 'column');
    const bar = el('div', 'bar');
    bar.style.height = `${Math.round((count / peak) * 160)}px`;
    bar.title = `${name}: ${count}`;
    if (count < bandFloor) {
      bar.classList.add('below-band');
    }
    column.appendChild(bar);
    column.appendChild(el('div', 'bar-label', `${name} ${count}`));
    chart.appendChild(column);
  }
  const band = el('div', 'band');
  band.style.bottom = `${Math.round((bandFloor / peak) * 160)}px`;
  band.title = `tolerance floor ${Math.round(bandFloor)}`;
  chart.appendChild(band);
  container.appendChild(chart);
}

export function renderNotices(view: SessionView, container: HTMLElement): void {
  container.replaceChildren();
  if (view.conflict) {
    container.appendChild(
      el('div', 'notice conflict', `conflict: ${view.conflict} - queue refreshed`)
    );
  }
  if (view.unsentCount > 0) {
    container.appendChild(
      el('div', 'notice unsent', `${view.unsentCount} decision(s) waiting to be resent`)
    );
  }
  if (view.lastError) {
    container.appendChild(el('div', 'notice error', view.lastError));
  }
}
