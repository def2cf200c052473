"""bcvad: tiny streaming voice activity detectors and their training pipeline.

The package covers the full desk-scale experimental loop: synthetic parallel
bone-/air-conduction speech and noise generation, log-Mel front end,
energy-threshold labeling, a likelihood-ratio DSP detector with corrected
noise tracking, small conv-GRU detectors trained with exact-gradient BPTT,
int8 weight quantization, and frame-level detection metrics.
"""

from .audio import AudioBuffer, load_wav, mix_at_snr, rescale_to_dbfs, rms_dbfs, save_wav
from .corpus import (
    AssembledClip,
    CorpusConfig,
    assemble_clips,
    assemble_parallel_clips,
    build_corpus,
    materialize_clip,
)
from .dsp_vad import DspVadParams, init_noise_estimate, process_frame, run_dsp_vad
from .errors import (
    AssemblyError,
    ConfigError,
    DataError,
    EmptyInputError,
    FormatError,
    InvalidDataError,
    UndefinedMetricError,
    VadError,
)
from .evaluate import DspDetector, NeuralDetector, evaluate_detector, make_detector
from .features import (
    AIR_FEATURES,
    BC_FEATURES,
    FeatureConfig,
    SpectrogramConfig,
    compute_log_mel,
    log_mel_features,
    mel_filterbank,
    stft_magnitude,
)
from .labels import LabelTrack, binarize, generate_labels, smooth_labels
from .metrics import EvalReport, accuracy, auc, dcf, error_rates
from .model import (
    AIR_ARCH,
    BC_ARCH,
    ArchSpec,
    RecurrentState,
    VadModel,
    build_model,
    count_params,
    forward_sequence,
    forward_step,
    load_model,
    quantize_weights,
    save_model,
)
from .synth import SynthProfile, synth_noise, synth_speech_pair
from .training import TrainSchedule, adam_step, bce_loss, compute_gradients, train

__version__ = "0.1.0"
