/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_modescore_free: (a: number, b: number) => void;
export const __wbg_potentialmap_free: (a: number, b: number) => void;
export const __wbg_slicedcomparison_free: (a: number, b: number) => void;
export const compare_sliced: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: bigint) => [number, number, number];
export const mode_regression: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const modescore_explained_variance: (a: number) => number;
export const modescore_lambda: (a: number) => number;
export const modescore_length_scale: (a: number) => number;
export const modescore_predicted: (a: number) => [number, number];
export const modescore_truth: (a: number) => [number, number];
export const potentialmap_points: (a: number) => [number, number];
export const potentialmap_side: (a: number) => number;
export const potentialmap_values: (a: number) => [number, number];
export const sinkhorn_potential: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const slicedcomparison_directions: (a: number) => number;
export const slicedcomparison_distance: (a: number) => number;
export const slicedcomparison_first: (a: number) => [number, number];
export const slicedcomparison_first_points: (a: number) => [number, number];
export const slicedcomparison_levels: (a: number) => [number, number];
export const slicedcomparison_second: (a: number) => [number, number];
export const slicedcomparison_second_points: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
