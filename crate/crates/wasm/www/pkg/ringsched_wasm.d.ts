/* tslint:disable */
/* eslint-disable */

/**
 * Runs every policy on a generated cluster and trace. The specs use the
 * CLI's `key=value` syntax without the `gen:` prefix.
 */
export function compare_policies(cluster: string, trace: string, slots: number, seed: number): string;

/**
 * Per-iteration time `τ(w)` for `w = 1..=max_workers`.
 */
export function rar_curve(params: string, max_workers: number): string;

/**
 * One slot of GADGET against the exact optimum on a small instance.
 */
export function slot_vs_oracle(seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_policies: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly rar_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly slot_vs_oracle: (a: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
