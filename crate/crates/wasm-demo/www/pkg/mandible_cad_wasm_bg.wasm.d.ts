/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_cb_candidates: (a: number, b: number) => [number, number, number, number];
export const demo_image: (a: number) => [number, number];
export const demo_last_count: (a: number) => number;
export const demo_n_slices: (a: number) => number;
export const demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_ob_stage: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_set_slice: (a: number, b: number) => [number, number];
export const demo_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
