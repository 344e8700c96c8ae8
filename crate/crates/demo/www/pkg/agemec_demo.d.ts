/* tslint:disable */
/* eslint-disable */

export class Convergence {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `γ_1 .. γ_final` with the inner error held at `0.9 α |Q|`.
     */
    controlled(): Float64Array;
    gamma_star(): number;
    /**
     * `γ_1 .. γ_final` with sampled inner loops.
     */
    sampled(): Float64Array;
}

export class Sawtooth {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    average(): number;
    drops(): number;
    /**
     * Interleaved `t0, Δ0, t1, Δ1, ...`.
     */
    points(): Float64Array;
}

/**
 * Age of a single device over `tasks` tasks. `route` 0 computes locally,
 * 1 or 2 offloads to that edge; `drop_coefficient <= 0` disables drops.
 */
export function aoi_sawtooth(seed: bigint, tasks: number, wait: number, route: number, drop_coefficient: number): Sawtooth;

/**
 * Average age under local computing for `points` fixed waits in
 * `[0, z_max]`, as `z0, Δ0, z1, Δ1, ...`. `sigma > 0` switches service
 * times to a lognormal with that shape.
 */
export function aoi_vs_wait(seed: bigint, tasks: number, z_max: number, points: number, sigma: number): Float64Array;

/**
 * Quotient iterates on a random fractional MDP with `states` states and
 * `actions` actions, against the exact optimum.
 */
export function gamma_convergence(seed: bigint, states: number, actions: number, alpha: number, episodes: number): Convergence;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_convergence_free: (a: number, b: number) => void;
    readonly __wbg_sawtooth_free: (a: number, b: number) => void;
    readonly aoi_sawtooth: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly aoi_vs_wait: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly convergence_controlled: (a: number) => [number, number];
    readonly convergence_gamma_star: (a: number) => number;
    readonly convergence_sampled: (a: number) => [number, number];
    readonly gamma_convergence: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly sawtooth_average: (a: number) => number;
    readonly sawtooth_drops: (a: number) => number;
    readonly sawtooth_points: (a: number) => [number, number];
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
