/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_convergence_free: (a: number, b: number) => void;
export const __wbg_sawtooth_free: (a: number, b: number) => void;
export const aoi_sawtooth: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
export const aoi_vs_wait: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const convergence_controlled: (a: number) => [number, number];
export const convergence_gamma_star: (a: number) => number;
export const convergence_sampled: (a: number) => [number, number];
export const gamma_convergence: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
export const sawtooth_average: (a: number) => number;
export const sawtooth_drops: (a: number) => number;
export const sawtooth_points: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
