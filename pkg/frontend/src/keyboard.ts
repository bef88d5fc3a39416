// Keyboard bindings: reviewers process hundreds of items, so every
// verdict is one keystroke.
//
//   a / j : accept        r / k : reject
//   s / space : skip      u / z : undo last decision
//   escape : dismiss conflict notice

import { ReviewSession } from './state.js';

export function attachKeyboard(session: ReviewSession, target: EventTarget): () => void {
  const handler = (event: Event) => {
    const key = (event as KeyboardEvent).key;
    switch (key) {
      case 'a':
      case 'j':
        void session.accept();
        break;
      case 'r':
      case 'k':
        void session.reject();
        break;
      case 's':
      case ' ':
        session.skip();
        break;
      case 'u':
      case 'z':
        void session.undo();
        break;
      case 'Escape':
        session.dismissConflict();
        break;
      default:
        return;
    }
    event.preventDefault?.();
  };
  target.addEventListener('keydown', handler);
  return () => target.removeEventListener('keydown', handler);
}
