/* tslint:disable */
/* eslint-disable */

/**
 * Held-out explained variance of mode-count regression on 2-D mixtures.
 */
export class ModeScore {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    explained_variance(): number;
    lambda(): number;
    length_scale(): number;
    predicted(): Float64Array;
    truth(): Float64Array;
}

/**
 * Centered Sinkhorn potential on a `side x side` grid over `[-2, 2]^2`.
 */
export class PotentialMap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    points(): Float64Array;
    side(): number;
    /**
     * Row-major, `y` increasing with the row.
     */
    values(): Float64Array;
}

/**
 * Quantile curves of two clouds along half-circle directions.
 */
export class SlicedComparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    directions(): number;
    distance(): number;
    /**
     * Direction-major quantiles of the first cloud.
     */
    first(): Float64Array;
    /**
     * Interleaved `x, y` samples.
     */
    first_points(): Float64Array;
    levels(): Float64Array;
    second(): Float64Array;
    second_points(): Float64Array;
}

export function compare_sliced(ax: number, ay: number, a_std: number, bx: number, by: number, b_std: number, samples: number, directions: number, quantiles: number, seed: bigint): SlicedComparison;

/**
 * `embedding` is `"mean"` or `"sliced"`. Half of the `n` mixtures train,
 * half test; `lambda` and `l` are picked by 5-fold cross validation.
 */
export function mode_regression(n: number, samples: number, max_modes: number, embedding: string, seed: bigint): ModeScore;

export function sinkhorn_potential(mx: number, my: number, std: number, samples: number, side: number, reg: number, seed: bigint): PotentialMap;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_modescore_free: (a: number, b: number) => void;
    readonly __wbg_potentialmap_free: (a: number, b: number) => void;
    readonly __wbg_slicedcomparison_free: (a: number, b: number) => void;
    readonly compare_sliced: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: bigint) => [number, number, number];
    readonly mode_regression: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly modescore_explained_variance: (a: number) => number;
    readonly modescore_lambda: (a: number) => number;
    readonly modescore_length_scale: (a: number) => number;
    readonly modescore_predicted: (a: number) => [number, number];
    readonly modescore_truth: (a: number) => [number, number];
    readonly potentialmap_points: (a: number) => [number, number];
    readonly potentialmap_side: (a: number) => number;
    readonly potentialmap_values: (a: number) => [number, number];
    readonly sinkhorn_potential: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly slicedcomparison_directions: (a: number) => number;
    readonly slicedcomparison_distance: (a: number) => number;
    readonly slicedcomparison_first: (a: number) => [number, number];
    readonly slicedcomparison_first_points: (a: number) => [number, number];
    readonly slicedcomparison_levels: (a: number) => [number, number];
    readonly slicedcomparison_second: (a: number) => [number, number];
    readonly slicedcomparison_second_points: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
