/** Response-builder state: a pool of selectable symbols and the ordered
 * response array.  All operations are pure so views can re-render from
 * scratch after every change; the transmitted sequence is always exactly
 * the array order.
 */

import type { ColorJson } from "./types.js";

export interface BuilderState {
  pool: ColorJson[];
  array: ColorJson[];
}

export function createBuilder(pool: ColorJson[]): BuilderState {
  return { pool: [...pool], array: [] };
}

export function append(state: BuilderState, id: string): BuilderState {
  const symbol = state.pool.find((c) => c.id === id);
  if (!symbol) return state; // only pool symbols may enter the array
  return { ...state, array: [...state.array, symbol] };
}

export function insertAt(
  state: BuilderState,
  id: string,
  index: number,
): BuilderState {
  const symbol = state.pool.find((c) => c.id === id);
  if (!symbol) return state;
  const pos = clamp(index, 0, state.array.length);
  const array = [...state.array];
  array.splice(pos, 0, symbol);
  return { ...state, array };
}

export function removeAt(state: BuilderState, index: number): BuilderState {
  if (index < 0 || index >= state.array.length) return state;
  const array = [...state.array];
  array.splice(index, 1);
  return { ...state, array };
}

export function move(
  state: BuilderState,
  from: number,
  to: number,
): BuilderState {
  if (from < 0 || from >= state.array.length) return state;
  const array = [...state.array];
  const [symbol] = array.splice(from, 1);
  array.splice(clamp(to, 0, array.length), 0, symbol!);
  return { ...state, array };
}

export function reset(state: BuilderState): BuilderState {
  return { ...state, array: [] };
}

export function canSubmit(state: BuilderState): boolean {
  return state.array.length > 0;
}

/** The ids posted to the service, in display (left-to-right) order. */
export function symbolIds(state: BuilderState): string[] {
  return state.array.map((c) => c.id);
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.max(lo, Math.min(hi, value));
}
