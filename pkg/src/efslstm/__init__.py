"""Evolutionary multi-objective training of LSTM forecasters with embedded feature selection."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    NormStats,
    RawSeries,
    WindowedDataset,
    interpolate_missing,
    load_csv,
    normalize,
    partition_training,
    sliding_window,
    split_train_test,
)
from .ensemble import (  # noqa: E402
    EnsembleModel,
    StackingDataset,
    build_stacking_dataset,
    feature_importance,
    fit_ensemble,
    predict_meta,
    train_forest,
)
from .forecast import (  # noqa: E402
    DmResult,
    HorizonForecast,
    diebold_mariano,
    mae,
    overfitting_ratio,
    recursive_forecast,
    rmse,
    win_loss_ranking,
)
from .hypervolume import hypervolume  # noqa: E402
from .lstm import (  # noqa: E402
    Genome,
    LstmParams,
    convert,
    evaluate_all,
    evaluate_objective,
    flatten,
    forward_pass,
    weight_count,
)
from .moea import (  # noqa: E402
    MoeaConfig,
    ParetoFront,
    crossover,
    crowding_distance,
    mutate,
    nondominated_sort,
    run_moea,
)
