/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_treedemo_free: (a: number, b: number) => void;
export const densityCurve: (a: number, b: number, c: number) => [number, number, number, number];
export const treedemo_angles: (a: number) => [number, number];
export const treedemo_classify: (a: number, b: number, c: number) => [number, number, number, number];
export const treedemo_names: (a: number) => [number, number];
export const treedemo_new: (a: number) => [number, number, number];
export const treedemo_parents: (a: number) => [number, number];
export const treedemo_setKappa: (a: number, b: number, c: number) => [number, number];
export const treedemo_step: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
