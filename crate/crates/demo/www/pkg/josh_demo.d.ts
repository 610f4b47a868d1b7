/* tslint:disable */
/* eslint-disable */

/**
 * A nine-category tree embedded on the unit circle.
 */
export class TreeDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Center angle of every node in radians.
     */
    angles(): Float64Array;
    /**
     * Log density of the point at `angle` under every node (−∞ outside the
     * candidate set), followed by the winning node id.
     */
    classify(angle: number, leaves_only: boolean): Float64Array;
    /**
     * Node names in node-id order, ROOT first.
     */
    names(): string[];
    constructor(seed: number);
    /**
     * Parent node id per node; −1 for ROOT.
     */
    parents(): Int32Array;
    setKappa(node: number, kappa: number): void;
    /**
     * Runs `passes` sweeps of the tree hinge with one margin for every
     * level; returns the fraction of active hinges.
     */
    step(passes: number, margin: number, alpha: number): number;
}

export function densityCurve(dim: number, kappa: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_treedemo_free: (a: number, b: number) => void;
    readonly densityCurve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly treedemo_angles: (a: number) => [number, number];
    readonly treedemo_classify: (a: number, b: number, c: number) => [number, number, number, number];
    readonly treedemo_names: (a: number) => [number, number];
    readonly treedemo_new: (a: number) => [number, number, number];
    readonly treedemo_parents: (a: number) => [number, number];
    readonly treedemo_setKappa: (a: number, b: number, c: number) => [number, number];
    readonly treedemo_step: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
