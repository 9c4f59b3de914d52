"""Session driver for the multi-modular computation.

A session records the F4 run at the first prime, then dispatches replay runs
at further primes to a pool of worker processes and feeds their images to the
single-threaded reconstructor.  The number of simultaneous primes follows a
:class:`Schedule`; the thread budget is split evenly between the workers in
flight.
"""

from __future__ import annotations

import concurrent.futures as cf
import hashlib
import io
import logging
import multiprocessing
import struct
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from . import reconstructor as rc
from .f4engine import (LearningRecord, ModularBasis, UnluckyPrime, gbasis_mod_p,
                       system_hash)
from .modarith import PrimeField, PrimeStream
from .polyring import QQ, PolyRing, Polynomial

log = logging.getLogger("gbmodular.progress")


class SessionError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


# -- schedule ------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Simultaneous prime counts: ``segments[k] = (count, until_merged)``, then ``final``."""

    segments: tuple[tuple[int, int], ...]
    final: int

    def count_for(self, merged: int) -> int:
        for count, until in self.segments:
            if merged < until:
                return count
        return self.final

    @property
    def max_count(self) -> int:
        return max([self.final] + [c for c, _ in self.segments])


def parse_schedule(*args) -> Schedule:
    """``(n)`` or ``(n1, p1, n2, p2, n3)``."""
    if len(args) == 1 and isinstance(args[0], (list, tuple)):
        args = tuple(args[0])
    try:
        vals = [int(a) for a in args]
    except (TypeError, ValueError) as exc:
        raise ValueError(f"schedule arguments must be integers: {args}") from exc
    if any(float(a) != v for a, v in zip(args, vals)):
        raise ValueError(f"schedule arguments must be integers: {args}")
    if len(vals) == 1:
        counts, breaks = vals, []
    elif len(vals) == 5:
        counts, breaks = vals[0::2], vals[1::2]
    else:
        raise ValueError("schedule takes 1 or 5 arguments")
    if any(c < 1 for c in counts):
        raise ValueError("simultaneous prime counts must be >= 1")
    if breaks and not (0 < breaks[0] < breaks[1]):
        raise ValueError("schedule breakpoints must be positive and increasing")
    return Schedule(tuple(zip(counts[:-1], breaks)), counts[-1])


def threads_per_worker(budget: int, active: int) -> int:
    return max(1, budget // max(1, active))


# -- configuration and result --------------------------------------------

@dataclass
class SessionConfig:
    threads: int = 1
    schedule: Schedule = field(default_factory=lambda: parse_schedule(1))
    reinject: rc.ReinjectPolicy = field(default_factory=rc.ReinjectPolicy)
    max_pairs: int = 0
    proba_epsilon: float = 1e-7
    archive: str | Path | None = None
    resume: str | Path | None = None
    executor: str = "auto"          # "auto", "serial" or "process"
    max_primes: int = 100_000

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0 < self.proba_epsilon < 1:
            raise ValueError("proba_epsilon must lie in (0, 1)")
        if self.max_pairs < 0:
            raise ValueError("max_pairs must be >= 0")


@dataclass
class SessionResult:
    basis: list[Polynomial]
    complete: bool
    state: rc.ReconstructionState
    primes_merged: int
    primes_consumed: int
    discarded: list[int]
    max_threads_in_use: int
    basis_size: int
    seconds: float

    @property
    def curve(self):
        return self.state.curve


# -- workers -------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(system, record):
    _WORKER["system"] = system
    _WORKER["record"] = record


@dataclass
class ImageOutcome:
    index: int
    prime: int
    image: ModularBasis | None
    seconds: float
    replayed: bool
    error: str | None = None


def modular_image(system, record: LearningRecord | None, index: int, threads: int,
                  max_pairs: int = 0) -> ImageOutcome:
    """Image at the ``index``-th prime; replay first, plain run if the replay deviates."""
    p = PrimeStream.prime_at(index)
    fld = PrimeField(p, check=False)
    t0 = time.perf_counter()
    try:
        if record is not None:
            try:
                img, _ = gbasis_mod_p(system, fld, "replay", record, threads=threads)
                return ImageOutcome(index, p, img, time.perf_counter() - t0, True)
            except UnluckyPrime:
                pass
        img, _ = gbasis_mod_p(system, fld, "plain", max_pairs=max_pairs, threads=threads)
        return ImageOutcome(index, p, img, time.perf_counter() - t0, False)
    except UnluckyPrime as exc:
        return ImageOutcome(index, p, None, time.perf_counter() - t0, False, str(exc))


def _worker_task(index: int, threads: int, max_pairs: int) -> ImageOutcome:
    return modular_image(_WORKER["system"], _WORKER["record"], index, threads, max_pairs)


class _SerialFuture:
    def __init__(self, fn, *args):
        self._fn, self._args = fn, args

    def result(self):
        return self._fn(*self._args)


# -- session -------------------------------------------------------------

class Session:
    """State of one run; see :func:`run_session`."""

    def __init__(self, system: Sequence[Polynomial], config: SessionConfig,
                 state: rc.ReconstructionState | None = None,
                 image_hook: Callable[[ImageOutcome], ImageOutcome] | None = None):
        system = [f for f in system if f.keys]
        if not system:
            raise SessionError("empty input system")
        self.system = list(system)
        self.ring: PolyRing = system[0].ring
        self.config = config
        self.state = state or rc.ReconstructionState()
        self.stream = PrimeStream()
        self.image_hook = image_hook
        self.needed = rc.required_confirmations(config.proba_epsilon)
        self.acc: rc.AccumulatedBasis | None = None
        self.record: LearningRecord | None = None
        self.discarded: list[int] = []
        self.mismatches: list[tuple[int, ...]] = []
        self.in_use = 0
        self.max_in_use = 0
        if config.resume is not None and state is None:
            self.state = restore_checkpoint(config.resume, self.system)

    # modular system currently in use: inputs followed by re-injected generators
    def modular_system(self):
        return self.system + list(self.state.reinject_generators)

    def _claim(self, n):
        if self.in_use + n > self.config.threads:
            raise SessionError("thread budget exceeded")
        self.in_use += n
        self.max_in_use = max(self.max_in_use, self.in_use)

    def _release(self, n):
        self.in_use -= n

    def _draw(self) -> int:
        idx, _ = self.stream.draw()
        self.state.primes_consumed += 1
        if self.state.primes_consumed > self.config.max_primes:
            raise SessionError("prime limit reached without a complete reconstruction")
        return idx

    def _record(self):
        """Recording run (single worker, whole thread budget) at a fresh prime."""
        system = self.modular_system()
        while True:
            idx = self._draw()
            p = PrimeStream.prime_at(idx)
            self._claim(self.config.threads)
            t0 = time.perf_counter()
            try:
                img, rec = gbasis_mod_p(system, PrimeField(p, check=False), "record",
                                        max_pairs=self.config.max_pairs,
                                        threads=self.config.threads)
            except UnluckyPrime:
                self.discarded.append(p)
                continue
            finally:
                self._release(self.config.threads)
            self.state.first_run_seconds = time.perf_counter() - t0
            self.record = rec
            rc.advance_phase(self.state, "first_prime_done")
            est = img.stats.get("max_matrix", (0, 0))
            log.info("recording run at prime #%d (%d): %d elements, %d terms, %.2fs, "
                     "largest matrix %dx%d (~%.1f MB dense per worker)",
                     idx, p, len(img), img.term_count, self.state.first_run_seconds,
                     est[0], est[1], est[0] * est[1] * 8 / 2**20)
            return ImageOutcome(idx, p, img, self.state.first_run_seconds, False)

    def _restart(self, outcome: ImageOutcome):
        """Two later primes agree with each other against the recording prime."""
        log.info("recording prime contradicted twice; restarting reconstruction")
        st = self.state
        st.frontier = 0
        st.reconstructed.clear()
        st.primes_at_reconstruction.clear()
        st.confirmations.clear()
        st.needs_recording = True
        self.acc = None
        self.mismatches.clear()

    def _absorb(self, out: ImageOutcome) -> None:
        if self.image_hook is not None:
            out = self.image_hook(out)
        st = self.state
        if out.image is None:
            self.discarded.append(out.prime)
            return
        if out.replayed:
            st.learned_run_seconds.append(out.seconds)
        t0 = time.perf_counter()
        if self.acc is None:
            self.acc = rc.AccumulatedBasis(out.image)
            if st.prefix_seed:
                rc.seed_prefix(self.acc, st, st.prefix_seed, out.image)
                st.prefix_seed = []
            st.curve.append((len(self.acc.primes), st.frontier))
        else:
            try:
                rc.process_image(self.acc, st, out.image)
            except rc.SkeletonMismatch:
                self.discarded.append(out.prime)
                shape = tuple(out.image.leads)
                if shape in self.mismatches:
                    self._restart(out)
                else:
                    self.mismatches.append(shape)
                return
        log.info("prime #%d merged=%d wall=%.2fs crt=%.3fs frontier=%d/%d phase=%d",
                 out.index, len(self.acc.primes), out.seconds, time.perf_counter() - t0,
                 st.frontier, len(self.acc), st.phase)

    def _done(self) -> bool:
        return self.acc is not None and rc.is_complete(self.state, len(self.acc), self.needed)

    def run(self) -> SessionResult:
        t_start = time.perf_counter()
        st = self.state
        if st.phase == 2 and st.needs_recording and st.reinject_generators and not st.curve:
            st.prefix_seed = list(st.reinject_generators)
        verdict = "proceed"
        while True:
            if st.needs_recording:
                self._absorb(self._record())
            if self._done():
                break
            verdict = self._phase_loop()
            if verdict in ("complete", "stop_partial"):
                break
            if verdict == "reinject":
                rc.advance_phase(st, "reinjection_triggered")
                log.info("re-injecting %d generators, phase %d", st.reinjected, st.phase)
        complete = self._done()
        if complete:
            rc.advance_phase(st, "final_reconstruction")
        basis = list(st.reconstructed[:st.frontier])
        if self.config.archive is not None:
            archive_checkpoint(st, self.config.archive, self.system)
        return SessionResult(basis, complete, st, len(self.acc.primes) if self.acc else 0,
                             st.primes_consumed, list(self.discarded), self.max_in_use,
                             len(self.acc) if self.acc else 0,
                             time.perf_counter() - t_start)

    def _verdict(self) -> str:
        if self._done():
            return "complete"
        if self.acc is None:
            return "restart"
        return rc.decide_reinjection(self.state, self.config.reinject, len(self.acc))

    def _phase_loop(self) -> str:
        cfg = self.config
        verdict = self._verdict()
        if verdict != "proceed":
            return verdict
        serial = cfg.executor == "serial" or (
            cfg.executor == "auto" and min(cfg.schedule.max_count, cfg.threads) == 1)
        system = self.modular_system()
        if serial:
            while verdict == "proceed":
                idx = self._draw()
                self._claim(cfg.threads)
                try:
                    out = modular_image(system, self.record, idx, cfg.threads, cfg.max_pairs)
                finally:
                    self._release(cfg.threads)
                self._absorb(out)
                verdict = self._verdict()
            return verdict
        ctx = multiprocessing.get_context("spawn")
        workers = min(cfg.schedule.max_count, cfg.threads)
        pending: dict = {}
        with cf.ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker,
                                    initargs=(system, self.record)) as pool:
            try:
                while True:
                    merged = len(self.acc.primes) if self.acc else 0
                    active = min(cfg.schedule.count_for(merged), cfg.threads)
                    per = threads_per_worker(cfg.threads, active)
                    while (verdict == "proceed" and len(pending) < active
                           and self.in_use + per <= cfg.threads):
                        idx = self._draw()
                        self._claim(per)
                        pending[pool.submit(_worker_task, idx, per, cfg.max_pairs)] = (idx, per)
                    if not pending:
                        return verdict
                    done, _ = cf.wait(pending, return_when=cf.FIRST_COMPLETED)
                    for fut in sorted(done, key=lambda f: pending[f][0]):
                        idx, per_f = pending.pop(fut)
                        self._release(per_f)
                        try:
                            out = fut.result()
                        except Exception as exc:  # worker died: abandon the prime
                            log.warning("worker failed on prime #%d: %s", idx, exc)
                            self.discarded.append(PrimeStream.prime_at(idx))
                            continue
                        self._absorb(out)
                        if verdict == "proceed":
                            verdict = self._verdict()
                    if verdict != "proceed" and not pending:
                        return verdict
            finally:
                for fut, (_, per_f) in pending.items():
                    fut.cancel()
                    self._release(per_f)


def run_session(system: Sequence[Polynomial], config: SessionConfig | None = None,
                state: rc.ReconstructionState | None = None,
                image_hook: Callable[[ImageOutcome], ImageOutcome] | None = None
                ) -> SessionResult:
    """Reduced Groebner basis of ``system`` over Q (or its reconstructed prefix).

    ``image_hook`` may rewrite each prime image before the coordinator sees
    it; it exists for fault-injection tests.
    """
    return Session(system, config or SessionConfig(), state, image_hook).run()


# -- checkpoints ---------------------------------------------------------

_CKPT_MAGIC = "GBMODULAR-CHECKPOINT"
_CKPT_VERSION = 1


@dataclass
class Checkpoint:
    version: int
    variables: tuple[str, ...]
    system_hash: str
    primes: int
    phase: int
    generators: list[Polynomial]


def _int_bytes(n: int) -> bytes:
    return n.to_bytes((n.bit_length() + 7) // 8 or 1, "big")


def _encode_generators(gens: Sequence[Polynomial], nvars: int) -> bytes:
    buf = io.BytesIO()
    for f in gens:
        buf.write(struct.pack("<I", len(f)))
        for exps, c in zip((f.ring.layout.unpack(k) for k in f.keys), f.coeffs):
            buf.write(struct.pack(f"<{nvars}H", *exps))
            num, den = c.numerator, c.denominator
            nb, db = _int_bytes(abs(num)), _int_bytes(den)
            buf.write(struct.pack("<BI", num < 0, len(nb)))
            buf.write(nb)
            buf.write(struct.pack("<I", len(db)))
            buf.write(db)
    return buf.getvalue()


def _decode_generators(body: bytes, count: int, ring: PolyRing) -> list[Polynomial]:
    buf = io.BytesIO(body)
    n = ring.nvars

    def take(k):
        data = buf.read(k)
        if len(data) != k:
            raise CheckpointError("truncated checkpoint")
        return data

    gens = []
    for _ in range(count):
        (nterms,) = struct.unpack("<I", take(4))
        terms = {}
        for _ in range(nterms):
            exps = struct.unpack(f"<{n}H", take(2 * n))
            neg, ln = struct.unpack("<BI", take(5))
            num = int.from_bytes(take(ln), "big")
            (ld,) = struct.unpack("<I", take(4))
            den = int.from_bytes(take(ld), "big")
            terms[exps] = Fraction(-num if neg else num, den)
        gens.append(ring.from_dict(terms))
    if buf.read(1):
        raise CheckpointError("trailing data in checkpoint")
    return gens


def archive_checkpoint(state: rc.ReconstructionState, path, system: Sequence[Polynomial]) -> None:
    """Write the reconstructed generators with a plain-text header."""
    ring = system[0].ring
    gens = list(state.reconstructed[:state.frontier])
    body = _encode_generators(gens, ring.nvars)
    header = "\n".join([
        f"{_CKPT_MAGIC} {_CKPT_VERSION}",
        "variables: " + ",".join(ring.variables),
        "system-sha256: " + system_hash(system).hex(),
        f"primes: {state.primes_consumed}",
        f"phase: {state.phase}",
        f"generators: {len(gens)}",
        f"body-bytes: {len(body)}",
        "body-sha256: " + hashlib.sha256(body).hexdigest(),
        "", ""])
    Path(path).write_bytes(header.encode() + body)


def read_checkpoint(path, ring: PolyRing | None = None) -> Checkpoint:
    data = Path(path).read_bytes()
    end = data.find(b"\n\n")
    if end < 0:
        raise CheckpointError("truncated checkpoint header")
    lines = data[:end].decode(errors="replace").split("\n")
    magic, _, ver = lines[0].partition(" ")
    if magic != _CKPT_MAGIC:
        raise CheckpointError("not a checkpoint file")
    if ver != str(_CKPT_VERSION):
        raise CheckpointError(f"unsupported checkpoint version {ver}")
    fields = dict(line.split(": ", 1) for line in lines[1:])
    try:
        variables = tuple(fields["variables"].split(","))
        count, nbytes = int(fields["generators"]), int(fields["body-bytes"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from exc
    body = data[end + 2:]
    if len(body) != nbytes:
        raise CheckpointError("truncated checkpoint")
    if hashlib.sha256(body).hexdigest() != fields.get("body-sha256"):
        raise CheckpointError("checkpoint body checksum mismatch")
    ring = ring or PolyRing(variables, QQ)
    if ring.variables != variables:
        raise CheckpointError("checkpoint variables differ from the session")
    return Checkpoint(_CKPT_VERSION, variables, fields["system-sha256"],
                      int(fields["primes"]), int(fields["phase"]),
                      _decode_generators(body, count, ring))


def restore_checkpoint(path, system: Sequence[Polynomial]) -> rc.ReconstructionState:
    """Fresh state in phase 2 with the archived generators queued for re-injection."""
    ring = system[0].ring
    ckpt = read_checkpoint(path, ring.with_domain(QQ))
    if ckpt.system_hash != system_hash(system).hex():
        raise CheckpointError("checkpoint belongs to a different input system")
    state = rc.ReconstructionState()
    rc.advance_phase(state, "resume_from_checkpoint")
    state.reinject_generators = list(ckpt.generators)
    state.reinjected = len(ckpt.generators)
    return state
