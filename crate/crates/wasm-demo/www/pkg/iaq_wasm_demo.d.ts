/* tslint:disable */
/* eslint-disable */

export class Plan {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Per-patch bit depths, row-major on the 14×14 grid.
     */
    readonly bits: Uint8Array;
    readonly objective: number;
    readonly payloadBits: number;
    readonly rho: number;
}

export class SceneParams {
    free(): void;
    [Symbol.dispose](): void;
    constructor(rho: number, gamma: number, mu: number, solver: string, cx: number, cy: number, spread: number, seed: bigint);
}

/**
 * D(2^M; μ)/D0 for M = 0..=8.
 */
export function distortionCurve(mu: number): Float64Array;

export function planLevels(params: SceneParams): Plan;

/**
 * RGBA pixels of the scene before and after the channel, concatenated.
 */
export function transmitScene(params: SceneParams): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_plan_free: (a: number, b: number) => void;
    readonly __wbg_sceneparams_free: (a: number, b: number) => void;
    readonly distortionCurve: (a: number) => [number, number, number, number];
    readonly planLevels: (a: number) => [number, number, number];
    readonly plan_bits: (a: number) => [number, number];
    readonly plan_objective: (a: number) => number;
    readonly plan_payloadBits: (a: number) => number;
    readonly plan_rho: (a: number) => number;
    readonly sceneparams_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
    readonly transmitScene: (a: number) => [number, number, number, number];
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
