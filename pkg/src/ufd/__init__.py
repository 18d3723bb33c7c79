"""Fake-image detection on frozen embedding features.

The working hypothesis: embeddings from a large image encoder that was never
trained to spot fakes separate real from generated images well enough that
classification reduces to nearest-neighbor lookups or a single linear layer.
This package provides the feature-space half of that workflow: labeled
feature banks with a stable binary format, exact cosine k-NN scoring, a
linear probe, threshold calibration and precision-recall metrics, pixel-space
robustness perturbations, frequency-fingerprint analysis, and a suite
evaluation harness with a CLI.
"""

from .labels import Label, as_label
from .bank import (
    BankEntry,
    FeatureBank,
    build_bank,
    expected_file_size,
    load_bank,
    merge_banks,
    save_bank,
    subsample_bank,
)
from .knn import (
    ScoredPrediction,
    cosine_distance,
    distance_eval_count,
    knn_batch,
    knn_score,
    rank_by_distance,
    reset_distance_eval_count,
)
from .probe import (
    LinearModel,
    TrainConfig,
    TrainReport,
    bce_gradient,
    bce_loss,
    load_model,
    predict_linear,
    save_model,
    train_linear,
)
from .metrics import (
    EvalReport,
    LabeledScore,
    accuracy_at_threshold,
    aggregate_accuracy,
    aggregate_map,
    average_precision,
    calibrate_threshold,
    evaluate_at,
    oracle_evaluate,
    pr_curve,
)
from .augment import (
    DEFAULT_BLUR_GRID,
    DEFAULT_JPEG_GRID,
    AugmentPolicy,
    SweepPoint,
    apply_policy,
    gaussian_blur,
    gaussian_kernel,
    jpeg_compress,
    load_image,
    policy_draws,
    robustness_sweep,
    save_image,
    sweep_rows_csv,
)
from .spectrum import (
    DEFAULT_CORPUS_CAP,
    DEFAULT_MEDIAN_KERNEL,
    DEFAULT_SIZE,
    SpectrumImage,
    average_spectrum,
    highpass,
    load_grid,
    render_spectrum,
    save_grid,
    save_spectrum_png,
    to_luminance,
)
from .harness import (
    FAMILIES,
    KnnMethod,
    LinearMethod,
    SuiteResult,
    TestSetManifest,
    evaluate_suite,
    labeled_pairs,
    load_suite,
    read_scores,
    resolve_threshold,
    score_test_set,
    write_scores,
)
from . import errors

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
