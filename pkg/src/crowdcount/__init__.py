"""Passive Wi-Fi device counting that tolerates MAC address randomization."""

from ._kernels import BACKEND
from .frames import (FrameBodyFingerprint, FrameKind, InformationElement, MacAddress,
                     ParsedFrame, fingerprint_of, is_locally_administered, is_multicast)
from .ingest import (CaptureError, CaptureRecord, IngestStats, MalformedHeader,
                     RadiotapTooShort, Skip, TruncatedRecord, UnsupportedLinkType,
                     load_frames, parse_frame, read_capture, strip_radiotap)
from .simulator import (TrialConfig, TrialHistogram, gen_device_seqnums, run_monte_carlo,
                        run_trial)
from .synth import SynthScenario, load_scenario, synth_frames, write_capture
from .truesight import ClusterConfig, TrueSightCount, cluster_count, truesight_estimate
from .vision import (MacClassification, VisionCount, classify_macs, vision_estimate,
                     window_estimates)

__version__ = "0.1.0"
