"""Room-acoustics simulation with selectable acoustic level of detail.

Shoebox scenes are rendered as directional impulse responses (image-source
early part + feedback-delay-network tail, optionally through coupled rooms)
and spatialized binaurally, onto a loudspeaker array, diotically or in mono.
Companion tools cover stimulus generation, spectral matching and objective
IR analysis (T30, EDC, NED, dual-slope fits).
"""

__version__ = "1.0.0"

from .errors import (
    AlodsimError,
    DegenerateGeometryError,
    InfeasibleTargetError,
    InsufficientDecayError,
    MatchInfeasibleError,
    RateMismatchError,
    SceneParseError,
    SceneValidationError,
)
from .scene import (
    DecayTarget,
    RenderingProfile,
    RoomSpec,
    SceneSpec,
    SecondSlope,
    fit_absorption,
    parse_scene,
    preset,
    preset_names,
    profile_names,
    profile_preset,
    serialize_scene,
)
from .pipeline import SimulationResult, build_spatial_ir, simulate
from .spatial import (
    HrtfSet,
    ImpulseResponse,
    LoudspeakerLayout,
    array_preset_86,
    load_hrtf_dir,
    synthetic_hrtf,
)

__all__ = [
    "AlodsimError",
    "DecayTarget",
    "DegenerateGeometryError",
    "HrtfSet",
    "ImpulseResponse",
    "InfeasibleTargetError",
    "InsufficientDecayError",
    "LoudspeakerLayout",
    "MatchInfeasibleError",
    "RateMismatchError",
    "RenderingProfile",
    "RoomSpec",
    "SceneParseError",
    "SceneSpec",
    "SceneValidationError",
    "SecondSlope",
    "SimulationResult",
    "array_preset_86",
    "build_spatial_ir",
    "fit_absorption",
    "load_hrtf_dir",
    "parse_scene",
    "preset",
    "preset_names",
    "profile_names",
    "profile_preset",
    "serialize_scene",
    "simulate",
    "synthetic_hrtf",
    "__version__",
]
