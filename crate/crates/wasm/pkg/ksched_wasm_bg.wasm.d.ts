/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_uavdemo_free: (a: number, b: number) => void;
export const approx_factor_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const compare_selection: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const uavdemo_frame: (a: number) => [number, number, number, number];
export const uavdemo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const uavdemo_step: (a: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
