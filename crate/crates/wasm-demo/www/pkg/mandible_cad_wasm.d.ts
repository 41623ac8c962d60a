/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    cb_candidates(fill_mm: number): Uint8Array;
    image(): Uint8Array;
    constructor(seed: number, cb_diameter_mm: number, ob_diameter_mm: number, noise_sigma: number);
    /**
     * `stage` is one of binary, small-closed, large-closed, difference, detections.
     */
    ob_stage(stage: string, large_fill_mm: number): Uint8Array;
    set_slice(k: number): void;
    /**
     * Objects found by the last `cb_candidates` or `ob_stage` call.
     */
    readonly last_count: number;
    readonly n_slices: number;
    readonly size: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_cb_candidates: (a: number, b: number) => [number, number, number, number];
    readonly demo_image: (a: number) => [number, number];
    readonly demo_last_count: (a: number) => number;
    readonly demo_n_slices: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_ob_stage: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_set_slice: (a: number, b: number) => [number, number];
    readonly demo_size: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
