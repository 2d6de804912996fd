/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_alignmentresult_free: (a: number, b: number) => void;
export const __wbg_rocsummary_free: (a: number, b: number) => void;
export const align_landmarks: (a: number, b: number) => [number, number, number];
export const alignmentresult_mapped: (a: number) => [number, number];
export const alignmentresult_residual: (a: number) => number;
export const alignmentresult_rotation: (a: number) => number;
export const alignmentresult_scale: (a: number) => number;
export const alignmentresult_tx: (a: number) => number;
export const alignmentresult_ty: (a: number) => number;
export const canonical_landmarks: () => [number, number];
export const explore_roc: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const rocsummary_accuracy: (a: number) => number;
export const rocsummary_points: (a: number) => [number, number];
export const rocsummary_tar: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
