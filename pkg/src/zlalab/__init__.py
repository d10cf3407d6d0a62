"""zlalab: a self-contained laboratory for studying message-length efficiency
in emergent communication.

Two recurrent agents play a reconstruction game: a speaker encodes one of N
ranked inputs as a discrete symbol sequence and a listener decodes it back.
The library trains four agent systems (a plain baseline, a speaker under an
adaptive length penalty, a listener that predicts after every symbol, and
the combination of both constraints), generates reference codes to compare
against, and measures whether a converged code puts its shortest messages on
its most frequent inputs — the law of abbreviation — along with where the
information sits inside the messages.

The numerical core is plain numpy with hand-written backward passes; no ML
framework is required. See README.md for a tour and the ``demos/`` scripts
for end-to-end walkthroughs.
"""

from .errors import ConfigurationError, DivergenceError
from .game import (
    Alphabet,
    InputSpace,
    Language,
    Message,
    input_probability,
    language_from_tsv,
    language_to_tsv,
    message_length,
    sample_input,
    sample_inputs,
)
from .agents import (
    ListenerParams,
    SpeakerParams,
    SpeakerRollout,
    greedy_language,
    impatient_listener_forward,
    init_listener,
    init_speaker,
    listener_test_prediction,
    load_checkpoint,
    make_predictor,
    save_checkpoint,
    speaker_rollout,
    standard_listener_forward,
)
from .training import (
    AccuracyTracker,
    Baseline,
    RunTrace,
    SYSTEMS,
    TrainConfig,
    alpha_schedule,
    loss_impatience,
    loss_laziness,
    loss_standard,
    per_sample_surrogate,
    train,
    trace_to_csv,
    update_baseline,
)
from .refcodes import (
    FrequencyLengthMapping,
    UnigramDistribution,
    effective_vocab_size,
    load_frequency_list,
    monkey_language,
    monkey_lengths,
    monkey_mean_length,
    monkey_typing,
    optimal_coding,
    unigram_distribution,
    veff_optimal_coding,
)
from .metrics import (
    InformativenessMatrix,
    MetricsReport,
    MinimalLengthReport,
    build_report,
    delta_stab,
    fully_informative,
    informative_part_lengths,
    informativeness,
    l_eff,
    l_token,
    l_type,
    minimal_required_length,
    positional_spectrum,
    randomization_test,
    rho_inf,
    sliding_average,
)

__version__ = "0.1.0"
