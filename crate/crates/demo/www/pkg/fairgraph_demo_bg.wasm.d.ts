/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const explore_gap: (a: number, b: number, c: number, d: number) => [number, number];
export const generate_groups: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const train_small: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
