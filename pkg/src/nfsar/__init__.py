"""Near-field SAR image degradation simulation and sparse spatial-variant
restoration."""

from .geometry import (GridSpec, ImagingGeometry, PsfBank, PsfPatch,
                       PsfQuantization, PsfTruncation, build_psf_bank,
                       observation_angle, resolutions, rotated_sinc,
                       synthesize_psf, synthesize_psf_polar,
                       SPEED_OF_LIGHT_M_S)
from .simulate import (ComplexImage, NoiseSpec, Scatterer, SceneSpec,
                       degrade, paper_scene_1, paper_scene_2, render_ideal)
from .solver import (RestorationResult, SolverConfig, VariantDictionary,
                     adjoint, apply, restore, soft_threshold)
from .baselines import CleanConfig, IstaConfig, clean_restore, ista_restore
from .metrics import (ExtractedScatterer, MatchReport, extract_scatterers,
                      mainlobe_width_3db, match_scatterers, comparison_table)

__version__ = "0.1.0"
