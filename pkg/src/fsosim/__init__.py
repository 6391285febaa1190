"""Link-level simulator for free-space optical transceivers over Gamma-Gamma turbulence."""

__version__ = "0.1.0"

from .mimo import (  # noqa: F401
    ChannelRealization,
    CombinedObservation,
    CombinerKind,
    LinkConfig,
    combine,
    equalize,
    ml_detect,
    noise_variance_from_esn0,
    propagate,
    sample_channel,
)
from .modem import (  # noqa: F401
    Constellation,
    modulate,
    normalize_power,
    one_hot,
    qam_constellation,
)
from .transceivers import (  # noqa: F401
    CsiMode,
    DegenerateConstellation,
    SerEstimate,
    TrainConfig,
    TrainingDiverged,
    Transceiver,
    TransceiverKind,
    detect,
    evaluate_ser,
    qam_ml_transceiver,
    train,
    transmitter_constellation,
)
from .turbulence import (  # noqa: F401
    AtmosphericProfile,
    GammaGammaParams,
    LinkGeometry,
    TurbulenceRegime,
    gg_params_from_rytov,
    gg_pdf,
    hufnagel_valley,
    rytov_variance,
    sample_intensity,
)
