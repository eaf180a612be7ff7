"""Multi-view 3D landmark reconstruction and conditioning-token export."""

from .geometry import (
    CameraView,
    Detection2D,
    EulerAngles,
    Ray,
    back_project,
    camera_center,
    euler_to_rotation,
    project,
    rotation_to_euler,
)
from .smoothing import LandmarkTrajectory, SGFilterSpec, fill_gaps, sg_coefficients, smooth_trajectory
from .tokens import (
    ConditioningTokenSet,
    FourierConfig,
    RotationEncodingConfig,
    assemble_tokens,
    encode_fourier,
    encode_rotation,
    real_sh,
)
from .triangulate import (
    LMConfig,
    TriangulationProblem,
    TriangulationResult,
    objective,
    orthogonal_projector,
    triangulate_arrays,
    triangulate_closed_form,
    triangulate_frame,
    triangulate_lm,
)

__version__ = "0.1.0"
