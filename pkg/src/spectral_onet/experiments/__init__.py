"""Studies, reports and the command line interface."""
from ..calibration import calibrate
from .report import FORMATS, StudyReport, emit_report, load_report, to_svg
from .studies import (CONVERGENCE_COLUMNS, calibration_study, convergence_study, invnet_study, lipschitz_study,
                      parametric_study, random_admissible, size_scaling_study, study_stream)

__all__ = [
    "calibrate", "FORMATS", "StudyReport", "emit_report", "load_report", "to_svg", "CONVERGENCE_COLUMNS",
    "calibration_study", "convergence_study", "invnet_study", "lipschitz_study", "parametric_study",
    "random_admissible", "size_scaling_study", "study_stream",
]
