"""Counterfactual augmentation for tabular binary classification, with
uncertainty-based selection of which counterfactuals to add."""

from .counterfactual import (
    CounterfactualSet,
    build_counterfactual_set,
    flip_treatment,
    match_label,
    matching_distance,
)
from .data import (
    Dataset,
    Encoder,
    FeatureSchema,
    RawTable,
    SplitSpec,
    TabularEncoder,
    builtin_schema,
    fit_encoder,
    generate_synthetic,
    load_csv,
    load_schema,
    split,
    split_indices,
    transform,
)
from .linear import (
    LinearClassifier,
    LinearModel,
    TrainConfig,
    loss_and_gradient,
    predict_label,
    predict_score,
    train,
)
from .metrics import EvalResult, accuracy, roc_auc
from .trainer import (
    CCRALClassifier,
    CcralTrace,
    MarginGrid,
    make_margin_grid,
    run_ccral,
    run_counterfactual_all,
    run_standard,
    uncertain_indices,
)

__version__ = "0.1.0"
