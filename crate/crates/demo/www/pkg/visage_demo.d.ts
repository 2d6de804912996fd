/* tslint:disable */
/* eslint-disable */

export class AlignmentResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Source landmarks after the transform, `[x1, y1, ...]`.
     */
    readonly mapped: Float64Array;
    /**
     * RMS landmark error in output pixels.
     */
    readonly residual: number;
    /**
     * Radians.
     */
    readonly rotation: number;
    readonly scale: number;
    readonly tx: number;
    readonly ty: number;
}

export class RocSummary {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Ten-fold verification accuracy.
     */
    readonly accuracy: number;
    /**
     * Curve as `[far1, tar1, far2, tar2, ...]`.
     */
    readonly points: Float64Array;
    /**
     * TAR at the requested FAR.
     */
    readonly tar: number;
}

/**
 * Fits the similarity taking five detected points onto the canonical frame.
 */
export function align_landmarks(points: Float64Array): AlignmentResult;

/**
 * Canonical five-point targets in the 112×96 frame as `[x1, y1, ..., x5, y5]`.
 */
export function canonical_landmarks(): Float64Array;

/**
 * Scores `pairs` synthetic pairs, half genuine, with genuine scores shifted
 * by `separation` standard deviations, then reports the ROC, TAR at
 * `far_target` and ten-fold accuracy.
 */
export function explore_roc(separation: number, pairs: number, far_target: number, seed: bigint): RocSummary;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_alignmentresult_free: (a: number, b: number) => void;
    readonly __wbg_rocsummary_free: (a: number, b: number) => void;
    readonly align_landmarks: (a: number, b: number) => [number, number, number];
    readonly alignmentresult_mapped: (a: number) => [number, number];
    readonly alignmentresult_residual: (a: number) => number;
    readonly alignmentresult_rotation: (a: number) => number;
    readonly alignmentresult_scale: (a: number) => number;
    readonly alignmentresult_tx: (a: number) => number;
    readonly alignmentresult_ty: (a: number) => number;
    readonly canonical_landmarks: () => [number, number];
    readonly explore_roc: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly rocsummary_accuracy: (a: number) => number;
    readonly rocsummary_points: (a: number) => [number, number];
    readonly rocsummary_tar: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
