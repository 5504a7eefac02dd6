from .coverage_scan import run_coverage_scan, run_cover
from .multiplicity_profile import run_multiplicity_profile
from .e123_diagnostics import run_e123_diagnostics
from .second_moment import run_second_moment
from .lemma_suite import run_lemma_suite
from .orchestrator import ExperimentOrchestrator
