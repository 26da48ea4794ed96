/* tslint:disable */
/* eslint-disable */

/**
 * A running simulation on an `M × M` periodic mesh.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    c(): Float64Array;
    energy(): number;
    mesh(): number;
    /**
     * Seeded start `φ⁰ = phi_scale·u + phi_offset`, `c⁰ = 0.1·u + 0.4`.
     */
    constructor(mesh: number, eps: number, theta0: number, sigma: number, delta: number, tau: number, phi_scale: number, phi_offset: number, seed: number);
    /**
     * Newton iterations of the last step.
     */
    newton_iterations(): number;
    /**
     * Lumped integral of `c`; constant in time.
     */
    nutrient_mass(): number;
    /**
     * Nodal values, row-major with node `j·M + i`.
     */
    phi(): Float64Array;
    /**
     * Advances `n` steps; on failure the state stays at the last good step.
     */
    step(n: number): void;
    steps(): number;
    time(): number;
}

/**
 * Entries `[m11, m12, m22, det, trace]` of the mobility matrix at `(φ, c)`
 * with `g(c) = c²`.
 */
export function mobility_at(phi: number, c: number): Float64Array;

/**
 * `F₁,δ(φ) − F₂(φ)` at `n` equispaced points of `[lo, hi]`. Points where
 * the potential is undefined (outside `(0, 1)` when `δ = 0`) are NaN.
 */
export function potential_curve(theta0: number, delta: number, lo: number, hi: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly mobility_at: (a: number, b: number) => [number, number];
    readonly potential_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly simulation_c: (a: number) => [number, number];
    readonly simulation_energy: (a: number) => [number, number, number];
    readonly simulation_mesh: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly simulation_newton_iterations: (a: number) => number;
    readonly simulation_nutrient_mass: (a: number) => [number, number, number];
    readonly simulation_phi: (a: number) => [number, number];
    readonly simulation_step: (a: number, b: number) => [number, number];
    readonly simulation_steps: (a: number) => number;
    readonly simulation_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
