/* tslint:disable */
/* eslint-disable */

/**
 * Min-entropy per symbol for `N_d = 2 .. 2^14` at `n_t` framed detections.
 */
export function dimension_scan(v0: number, n_t: number, delta_ps: number): string;

/**
 * Simulates a fringe scan at laboratory detector settings and fits it.
 */
export function fringe_scan(v_true: number, pair_rate: number, points: number, duration_per_point: number, seed: bigint): string;

/**
 * Certified bits per sample and throughput for `steps` collection times
 * spread evenly up to `max_duration` seconds.
 */
export function throughput_curve(v0: number, n_d: number, symbol_rate: number, max_duration: number, steps: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly dimension_scan: (a: number, b: number, c: number) => [number, number, number, number];
    readonly fringe_scan: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly throughput_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
