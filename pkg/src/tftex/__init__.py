"""tftex: audio classification from log-spectrogram textures.

Pipeline: resample to a common rate, take the log-spectrogram of 5 s
excerpts, match a dictionary of randomly sampled time-frequency blocks
against each spectrogram, keep the minimum matching energy per block as a
translation-invariant feature, and classify with a nearest neighbor rule.
"""

from .audio import AudioClip, read_wav, resample, write_wav
from .classifier import (
    NNModel,
    Prediction,
    fit,
    fit_records,
    load_model_header,
    majority_label,
    predict,
    predict_batch,
    save_model_header,
)
from .dictionary import (
    Block,
    BlockSize,
    Dictionary,
    default_sizes,
    load_dictionary,
    sample_blocks,
    save_dictionary,
)
from .dsp import (
    ComplexSpectrogram,
    LogSpectrogram,
    StftConfig,
    hanning_window,
    log_spectrogram,
    stft,
    stft_with_params,
    to_log_spectrogram,
)
from .errors import FormatError, ValidationError
from .evaluation import (
    ConfusionMatrix,
    ExcerptRef,
    ExperimentConfig,
    ExperimentResult,
    Recording,
    SplitPlan,
    load_recordings,
    run_experiment,
    segment_excerpts,
    split_recordings,
    sweep_features,
)
from .features import (
    EnergyMap,
    FeatureRecord,
    FeatureVector,
    energy_map_fast,
    energy_map_naive,
    extract_features,
    extract_features_batch,
    min_energy,
    min_energy_location,
    read_feature_binary,
    read_feature_csv,
    write_feature_binary,
    write_feature_csv,
)
from .synth import SynthSpec, synth_dataset

__version__ = "0.1.0"
