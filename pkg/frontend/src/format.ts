// Small display formatters shared by renderer and tests.

export function formatScore(value: number): string {
  return value.toFixed(2);
}

export function formatRatio(ratio: number | null): string {
  return ratio === null ? 'n/a' : ratio.toFixed(2);
}
