"""Edge-guided saliency enhancement.

Sharpens real-valued saliency maps against a salient-edge map by editing
gradients and re-integrating them with an exact FFT Laplacian inverse,
plus the evaluation and dataset tooling needed to measure the effect.
"""

from .batch import (BatchError, ImageResult, RunReport, emit_report,
                    run_batch)
from .dataset import (DatasetRecord, IngestError, SyntheticSpec,
                      exact_boundary, generate_synthetic, ingest)
from .fields import (binarize, crop, dilate_disk3, erode_diamond,
                     gaussian_blur, load_image, load_map, normalize,
                     pad_zero, save_image, save_map, to_luma)
from .merging import (MergerKind, POST_MERGERS, PRE_MERGERS, PreparedEdges,
                      across_edge_orientation, gdm_run, gdm_run_color,
                      merge_post, merge_pre, prepare_edges_post,
                      prepare_saliency_post)
from .metrics import (EvalSummary, PRCurve, evaluate, pr_at_threshold,
                      pr_curve, summarize)
from .pipeline import (ExternalCommandProvider, FixedMapProvider,
                       MeanLumaProvider, PrecomputedDirectoryProvider,
                       ProviderError, SaliencyProvider, SeeConfig,
                       reconstruct_image, see_full, see_post, see_pre,
                       smooth_step)
from .solver import (GreenKernel, KernelCache, VectorField,
                     build_green_kernel, default_cache, field_to_laplacian,
                     gradient, reconstruct, solve_laplacian)

__version__ = "0.1.0"

__all__ = [
    "BatchError", "DatasetRecord", "EvalSummary", "ExternalCommandProvider",
    "FixedMapProvider", "GreenKernel", "ImageResult", "IngestError",
    "KernelCache", "MeanLumaProvider", "MergerKind", "POST_MERGERS",
    "PRCurve", "PRE_MERGERS", "PrecomputedDirectoryProvider",
    "PreparedEdges", "ProviderError", "RunReport", "SaliencyProvider",
    "SeeConfig", "SyntheticSpec", "VectorField", "across_edge_orientation",
    "binarize", "build_green_kernel", "crop", "default_cache",
    "dilate_disk3", "emit_report", "erode_diamond", "evaluate",
    "exact_boundary", "field_to_laplacian", "gaussian_blur", "gdm_run",
    "gdm_run_color", "generate_synthetic", "gradient", "ingest",
    "load_image", "load_map", "merge_post", "merge_pre", "normalize",
    "pad_zero", "pr_at_threshold", "pr_curve", "prepare_edges_post",
    "prepare_saliency_post", "reconstruct", "reconstruct_image",
    "run_batch", "save_image", "save_map", "see_full", "see_post",
    "see_pre", "smooth_step", "solve_laplacian", "summarize", "to_luma",
]
