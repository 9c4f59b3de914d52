"""Multi-modular Groebner bases over Q.

F4 modulo 29-bit primes with learning, Chinese remaindering, clustered
rational reconstruction, re-injection and checkpointed staging.
"""

from .cli import generate_cyclic, parse_system, format_system
from .f4engine import LearningRecord, ModularBasis, UnluckyPrime, gbasis_mod_p, interreduce
from .modarith import PrimeField, PrimeStream, crt_pair, rational_reconstruct
from .orchestrator import (SessionConfig, SessionResult, archive_checkpoint, parse_schedule,
                           restore_checkpoint, run_session)
from .polyring import QQ, Monomial, PolyRing, Polynomial, grevlex_cmp, normal_form
from .reconstructor import ReinjectPolicy, ReconstructionState

__all__ = [
    "generate_cyclic", "parse_system", "format_system",
    "LearningRecord", "ModularBasis", "UnluckyPrime", "gbasis_mod_p", "interreduce",
    "PrimeField", "PrimeStream", "crt_pair", "rational_reconstruct",
    "SessionConfig", "SessionResult", "archive_checkpoint", "parse_schedule",
    "restore_checkpoint", "run_session",
    "QQ", "Monomial", "PolyRing", "Polynomial", "grevlex_cmp", "normal_form",
    "ReinjectPolicy", "ReconstructionState",
]
