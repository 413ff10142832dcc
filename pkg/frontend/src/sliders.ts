/**
 * Seven-emotion slider state. The displayed distribution always sums to 1:
 * moving one slider redistributes the remaining mass over the unlocked
 * channels proportionally to their previous values.
 */

export const CHANNELS = [
  "anger",
  "disgust",
  "fear",
  "joy",
  "sadness",
  "surprise",
  "neutral",
] as const;

export type Channel = (typeof CHANNELS)[number];

export interface SliderState {
  values: number[]; // length 7, sums to 1
  locks: boolean[]; // length 7
  warning: string | null;
}

export function initialState(): SliderState {
  return {
    values: CHANNELS.map(() => 1 / CHANNELS.length),
    locks: CHANNELS.map(() => false),
    warning: null,
  };
}

export function toggleLock(state: SliderState, index: number): SliderState {
  const locks = state.locks.slice();
  locks[index] = !locks[index];
  return { ...state, locks, warning: null };
}

/**
 * Set channel `moved` to `newValue` and renormalize.
 *
 * Locked channels keep their values. The mass left after locks and the
 * moved channel is spread over the remaining unlocked channels in
 * proportion to their prior values (uniformly if they were all zero).
 * If locks plus the requested value exceed 1, the moved value is capped
 * and a warning is set. Moving a locked channel is a no-op.
 */
export function normalizeSliders(
  state: SliderState,
  moved: number,
  newValue: number,
): SliderState {
  if (moved < 0 || moved >= CHANNELS.length) {
    throw new RangeError(`channel index ${moved} out of range`);
  }
  if (newValue < 0 || newValue > 1 || Number.isNaN(newValue)) {
    throw new RangeError(`slider value ${newValue} outside [0, 1]`);
  }
  if (state.locks[moved]) {
    return { ...state, warning: `${CHANNELS[moved]} is locked` };
  }

  const values = state.values.slice();
  const lockedSum = values.reduce((s, v, i) => (state.locks[i] ? s + v : s), 0);
  let warning: string | null = null;

  let target = newValue;
  if (lockedSum + target > 1) {
    target = Math.max(0, 1 - lockedSum);
    warning = `value capped at ${target.toFixed(3)} by locked channels`;
  }

  const others = CHANNELS.map((_, i) => i).filter(
    (i) => i !== moved && !state.locks[i],
  );
  const remainder = 1 - lockedSum - target;

  if (others.length === 0) {
    // moved channel must absorb everything the locks leave over
    if (Math.abs(remainder) > 1e-12) {
      warning = `only unlocked channel; value forced to ${(target + remainder).toFixed(3)}`;
    }
    values[moved] = target + remainder;
    return { values, locks: state.locks, warning };
  }

  const priorSum = others.reduce((s, i) => s + values[i], 0);
  for (const i of others) {
    values[i] = priorSum > 1e-12 ? (values[i] / priorSum) * remainder : remainder / others.length;
  }
  values[moved] = target;
  return { values, locks: state.locks, warning };
}

export function distribution(state: SliderState): Record<Channel, number> {
  const out = {} as Record<Channel, number>;
  CHANNELS.forEach((c, i) => {
    out[c] = state.values[i];
  });
  return out;
}
