/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const mobility_at: (a: number, b: number) => [number, number];
export const potential_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const simulation_c: (a: number) => [number, number];
export const simulation_energy: (a: number) => [number, number, number];
export const simulation_mesh: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const simulation_newton_iterations: (a: number) => number;
export const simulation_nutrient_mass: (a: number) => [number, number, number];
export const simulation_phi: (a: number) => [number, number];
export const simulation_step: (a: number, b: number) => [number, number];
export const simulation_steps: (a: number) => number;
export const simulation_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
