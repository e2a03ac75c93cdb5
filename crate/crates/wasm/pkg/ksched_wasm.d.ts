/* tslint:disable */
/* eslint-disable */

/**
 * The UAV tracking scenario, stepped from the page.
 */
export class UavDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Current frame as JSON, without stepping.
     */
    frame(): string;
    /**
     * `policy` is one of `greedy`, `randomized`, `random`, `all`.
     */
    constructor(policy: string, eps: number, budget: number, seed: bigint);
    /**
     * Advance one step and return the frame as JSON.
     */
    step(): string;
}

/**
 * Approximation factor of randomized greedy over a log grid of epsilon,
 * from `e^-K` up to 0.99. Returns JSON.
 */
export function approx_factor_curve(c: number, n: number, k: number): string;

/**
 * One selection step on a random Gaussian instance: greedy, randomized
 * greedy, uniform random and all sensors. Returns JSON.
 */
export function compare_selection(m: number, n: number, k: number, eps: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_uavdemo_free: (a: number, b: number) => void;
    readonly approx_factor_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly compare_selection: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly uavdemo_frame: (a: number) => [number, number, number, number];
    readonly uavdemo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly uavdemo_step: (a: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
