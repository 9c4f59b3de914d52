"""Coordinator-side lifting of modular images to a basis over Q.

Elements are kept in increasing order of their leading monomials.  After
each new prime image:

1. reconstructed elements are checked against the image;
2. starting at the frontier, elements are rationally reconstructed from the
   residues accumulated *before* this prime and must agree with the image;
   each success advances the frontier, the first failure stops the cluster;
3. the image is merged (CRT) into the residues of the remaining elements.

Everything here runs on a single thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .f4engine import ModularBasis
from .modarith import crt_merge, rational_reconstruct, reconstruction_bound
from .polyring import QQ, PolyRing, Polynomial

PHASE_EVENTS = ("first_prime_done", "reinjection_triggered",
                "resume_from_checkpoint", "final_reconstruction")


class SkeletonMismatch(Exception):
    """A prime image whose leading monomials differ from the accumulated ones."""


class PhaseError(Exception):
    pass


class AccumulatedBasis:
    """Per-coefficient residues modulo the product of the merged primes.

    ``residues[i]`` maps monomial keys of element ``i`` to residues; it is
    ``None`` once the element has been reconstructed and released.
    """

    def __init__(self, image: ModularBasis):
        self.ring = image.ring.with_domain(QQ)
        self.skeleton = list(image.leads)
        self.residues: list[dict[int, int] | None] = [dict() for _ in self.skeleton]
        self.modulus = 1
        self.primes: list[int] = []
        self.merge(image)

    def __len__(self):
        return len(self.skeleton)

    def check_skeleton(self, image: ModularBasis) -> None:
        if list(image.leads) != self.skeleton:
            raise SkeletonMismatch(
                f"prime {image.prime}: {len(image)} elements vs {len(self.skeleton)}")

    def merge(self, image: ModularBasis) -> None:
        if image.prime in self.primes:
            raise ValueError(f"prime {image.prime} already merged")
        self.check_skeleton(image)
        p, m = image.prime, self.modulus
        minv = pow(m, -1, p)
        for res, f in zip(self.residues, image.polys):
            if res is None:
                continue
            img = dict(zip(f.keys, f.coeffs))
            for k, r in res.items():
                res[k] = crt_merge(r, m, img.pop(k, 0), p, minv)
            # monomials absent so far had residue 0 at every earlier prime
            for k, c in img.items():
                res[k] = m * (c * minv % p)
        self.modulus = m * p
        self.primes.append(p)

    def release(self, i: int) -> None:
        self.residues[i] = None

    def reseed(self, i: int, poly: Polynomial) -> None:
        """Restore residues of element ``i`` from its rational form."""
        m = self.modulus
        res = {}
        for k, c in zip(poly.keys, poly.coeffs):
            res[k] = c.numerator * pow(c.denominator, -1, m) % m
        self.residues[i] = res

    def coefficient_view(self, i: int) -> dict[int, int] | None:
        return self.residues[i]


@dataclass
class ReinjectPolicy:
    """Either threshold mode (``ratio``, ``speed_ratio``) or early stop after ``early_stop`` elements."""

    ratio: float | None = None
    speed_ratio: float | None = None
    early_stop: int | None = None

    def __post_init__(self):
        threshold = self.ratio is not None or self.speed_ratio is not None
        if threshold and self.early_stop is not None:
            raise ValueError("threshold and early-stop re-injection are exclusive")
        if threshold:
            if self.ratio is None or self.speed_ratio is None:
                raise ValueError("threshold mode needs ratio and speed_ratio")
            if not (0 <= self.ratio <= 1 and 0 <= self.speed_ratio <= 1):
                raise ValueError("ratio and speed_ratio must lie in [0, 1]")
        if self.early_stop is not None and self.early_stop < 1:
            raise ValueError("early stop count must be positive")

    @classmethod
    def from_arg(cls, *args) -> "ReinjectPolicy":
        """``(ratio, speed_ratio)`` or a single negative ``-n``."""
        if len(args) == 1 and args[0] < 0:
            return cls(early_stop=int(-args[0]))
        if len(args) == 2:
            return cls(ratio=float(args[0]), speed_ratio=float(args[1]))
        raise ValueError("expected (ratio, speed_ratio) or a negative count")

    @property
    def disabled(self) -> bool:
        return self.ratio is None and self.early_stop is None


@dataclass
class ReconstructionState:
    frontier: int = 0
    reconstructed: list[Polynomial] = field(default_factory=list)
    primes_at_reconstruction: list[int] = field(default_factory=list)
    confirmations: list[int] = field(default_factory=list)
    phase: int = 0
    needs_recording: bool = True
    finished: bool = False
    first_run_seconds: float | None = None
    learned_run_seconds: list[float] = field(default_factory=list)
    reinjected: int = 0
    reinject_generators: list[Polynomial] = field(default_factory=list)
    curve: list[tuple[int, int]] = field(default_factory=list)
    skipped_checks: int = 0
    retreats: int = 0
    primes_consumed: int = 0
    prefix_seed: list[Polynomial] = field(default_factory=list)

    def speed_ratio(self) -> float | None:
        if not self.first_run_seconds or not self.learned_run_seconds:
            return None
        learned = sum(self.learned_run_seconds) / len(self.learned_run_seconds)
        return learned / self.first_run_seconds


def advance_phase(state: ReconstructionState, event: str) -> ReconstructionState:
    if event not in PHASE_EVENTS:
        raise PhaseError(f"unknown event {event!r}")
    if state.finished:
        raise PhaseError("session already finished")
    if event == "first_prime_done":
        if not state.needs_recording:
            raise PhaseError("no recording run pending")
        state.needs_recording = False
        if state.phase == 0:
            state.phase = 1
    elif event == "reinjection_triggered":
        if state.phase < 1 or state.needs_recording:
            raise PhaseError("re-injection requires a completed recording run")
        state.phase += 1
        state.needs_recording = True
        state.learned_run_seconds = []
        state.first_run_seconds = None
        state.reinject_generators = list(state.reconstructed[:state.frontier])
        state.reinjected = state.frontier
    elif event == "resume_from_checkpoint":
        if state.phase != 0 or state.curve:
            raise PhaseError("resume is only possible before the first prime")
        state.phase = 2
        state.needs_recording = True
    else:
        if state.phase < 1:
            raise PhaseError("final reconstruction before any modular run")
        state.finished = True
    return state


def required_confirmations(proba_epsilon: float, prime_bits: int = 29) -> int:
    return max(1, math.ceil(math.log(1 / proba_epsilon) / math.log(2 ** prime_bits)))


def rational_to_modp(poly: Polynomial, p: int) -> tuple[tuple, tuple] | None:
    """Keys and coefficients of ``poly`` mod p, or None if a denominator vanishes."""
    keys, coeffs = [], []
    for k, c in zip(poly.keys, poly.coeffs):
        d = c.denominator % p
        if d == 0:
            return None
        v = c.numerator * pow(d, -1, p) % p
        if v:
            keys.append(k)
            coeffs.append(v)
    return tuple(keys), tuple(coeffs)


def _same_mod_p(poly: Polynomial, img: Polynomial, p: int) -> bool | None:
    mod = rational_to_modp(poly, p)
    if mod is None:
        return None
    return mod == (img.keys, img.coeffs)


def reconstruct_element(acc: AccumulatedBasis, i: int) -> Polynomial | None:
    res = acc.residues[i]
    if res is None:
        raise ValueError(f"element {i} already released")
    m = acc.modulus
    bound = reconstruction_bound(m)
    keys, coeffs = [], []
    for k in sorted(res, reverse=True):
        q = rational_reconstruct(res[k], m, bound)
        if q is None:
            return None
        if q:
            keys.append(k)
            coeffs.append(q)
    if not keys or coeffs[0] != 1 or keys[0] != acc.skeleton[i]:
        return None
    return Polynomial(acc.ring, tuple(keys), tuple(coeffs))


def attempt_cluster_reconstruction(acc: AccumulatedBasis, state: ReconstructionState,
                                   verify: ModularBasis) -> ReconstructionState:
    """Reconstruct from the frontier on until the first failure.

    ``verify`` is the image at a prime not merged into ``acc``; every
    reconstructed element must agree with it.
    """
    if verify.prime in acc.primes:
        raise ValueError("the verification prime must not be merged yet")
    acc.check_skeleton(verify)
    n = len(acc)
    while state.frontier < n:
        i = state.frontier
        poly = reconstruct_element(acc, i)
        if poly is None or not _same_mod_p(poly, verify.polys[i], verify.prime):
            break
        state.reconstructed.append(poly)
        state.primes_at_reconstruction.append(len(acc.primes))
        state.confirmations.append(1)
        state.frontier += 1
        acc.release(i)
    return state


@dataclass
class VerifyResult:
    failures: list[int]
    skipped: list[int]

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_reconstructed(state: ReconstructionState, image: ModularBasis) -> VerifyResult:
    """Compare every reconstructed element with its image modulo ``image.prime``."""
    failures, skipped = [], []
    for i in range(state.frontier):
        same = _same_mod_p(state.reconstructed[i], image.polys[i], image.prime)
        if same is None:
            skipped.append(i)
        elif not same:
            failures.append(i)
    return VerifyResult(failures, skipped)


def demote(acc: AccumulatedBasis, state: ReconstructionState, first: int) -> None:
    """Move the frontier back to ``first``; restored elements resume CRT merging."""
    for i in range(first, state.frontier):
        acc.reseed(i, state.reconstructed[i])
    del state.reconstructed[first:]
    del state.primes_at_reconstruction[first:]
    del state.confirmations[first:]
    state.frontier = first
    state.retreats += 1


def process_image(acc: AccumulatedBasis, state: ReconstructionState,
                  image: ModularBasis) -> VerifyResult:
    """Verify, extend the cluster and merge one fresh prime image.

    Raises :class:`SkeletonMismatch` (nothing changed) for an image of a
    different shape.  An image that contradicts a reconstructed element or
    cannot be checked against one is used for verification only.
    """
    acc.check_skeleton(image)
    result = verify_reconstructed(state, image)
    if result.failures:
        demote(acc, state, min(result.failures))
        state.curve.append((len(acc.primes), state.frontier))
        return result
    for i in range(state.frontier):
        if i not in result.skipped:
            state.confirmations[i] += 1
    if result.skipped:
        state.skipped_checks += len(result.skipped)
        state.curve.append((len(acc.primes), state.frontier))
        return result
    attempt_cluster_reconstruction(acc, state, image)
    if state.frontier < len(acc):
        acc.merge(image)
    else:
        acc.primes.append(image.prime)
        acc.modulus *= image.prime
    state.curve.append((len(acc.primes), state.frontier))
    return result


def decide_reinjection(state: ReconstructionState, policy: ReinjectPolicy,
                       basis_size: int) -> str:
    """``"proceed"``, ``"reinject"`` or ``"stop_partial"``."""
    if policy.early_stop is not None:
        return "stop_partial" if state.frontier >= policy.early_stop else "proceed"
    if policy.ratio is None or basis_size == 0 or state.frontier >= basis_size:
        return "proceed"
    new = state.frontier - state.reinjected
    if new <= 0 or new / basis_size <= policy.ratio:
        return "proceed"
    speed = state.speed_ratio()
    if speed is None or speed <= policy.speed_ratio:
        return "proceed"
    return "reinject"


def is_complete(state: ReconstructionState, basis_size: int, needed: int) -> bool:
    return (state.frontier == basis_size
            and all(c >= needed for c in state.confirmations))


def seed_prefix(acc: AccumulatedBasis, state: ReconstructionState,
                generators: list[Polynomial], image: ModularBasis) -> int:
    """Adopt archived generators as the reconstructed prefix when they fit ``image``.

    Returns the number of adopted elements.
    """
    gens = sorted(generators, key=lambda f: f.keys[0])
    k = 0
    while (k < len(gens) and k < len(acc) and state.frontier == k
           and gens[k].keys[0] == acc.skeleton[k]
           and _same_mod_p(gens[k], image.polys[k], image.prime)):
        state.reconstructed.append(gens[k])
        state.primes_at_reconstruction.append(0)
        state.confirmations.append(1)
        state.frontier += 1
        acc.release(k)
        k += 1
    return k
