"""Excursion calculus for regenerative step paths and scaling-limit checks."""

__version__ = "0.1.0"

from .paths import (  # noqa: E402
    INF, CadlagPath, J1Bracket, PathFormatError, TimeChange, compose, concat, eval_path,
    hitting_time, j1_distance, read_path, shift, sup_distance, sup_norm, write_path,
)
from .ops import (  # noqa: E402
    ExcursionItem, Subdivision, decompose, e_S, phi_S, psi_S, thin, truncate_big,
    truncate_small,
)
from .sizes import (  # noqa: E402
    ExcursionList, PassageTimes, SizeFunctional, additive, custom, extract_all_big,
    extract_big, height, length, passage, past_sup_inverse, shift_to_passage,
)
from .regen import (  # noqa: E402
    ExcursionSampler, MCEstimate, RegenerativeSpec, SRWExcursionSampler, check_h1, check_h2,
    check_h3, ito_spec, laplace_g_formula, laplace_g_limit, srw_spec, stream, synthesize,
    transfer_check,
)
from .tightness import ModulusReport, modulus_w, modulus_w_prime, tightness_probe  # noqa: E402
from .harness import (  # noqa: E402
    ConvergenceReport, EmpiricalLaw, counterexample_demo, eq_cond_check, ks_two_sample,
    passage_variant_check, scaled_srw,
)
