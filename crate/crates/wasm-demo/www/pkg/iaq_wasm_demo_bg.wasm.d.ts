/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_plan_free: (a: number, b: number) => void;
export const __wbg_sceneparams_free: (a: number, b: number) => void;
export const distortionCurve: (a: number) => [number, number, number, number];
export const planLevels: (a: number) => [number, number, number];
export const plan_bits: (a: number) => [number, number];
export const plan_objective: (a: number) => number;
export const plan_payloadBits: (a: number) => number;
export const plan_rho: (a: number) => number;
export const sceneparams_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number];
export const transmitScene: (a: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
