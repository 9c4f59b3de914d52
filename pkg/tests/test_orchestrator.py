import dataclasses
from fractions import Fraction

import pytest

from gbmodular.cli import generate_cyclic
from gbmodular.f4engine import ModularBasis
from gbmodular.orchestrator import (CheckpointError, SessionConfig, SessionError,
                                    archive_checkpoint, parse_schedule, read_checkpoint,
                                    restore_checkpoint, run_session, threads_per_worker)
from gbmodular.polyring import PolyRing
from gbmodular.reconstructor import ReconstructionState, ReinjectPolicy

from oracle import buchberger


def test_parse_schedule_five_arguments():
    s = parse_schedule(12, 800, 9, 1600, 2)
    assert s.segments == ((12, 800), (9, 1600)) and s.final == 2
    assert [s.count_for(m) for m in (0, 799, 800, 1599, 1600, 10 ** 6)] == [12, 12, 9, 9, 2, 2]
    s = parse_schedule(4, 250, 3, 600, 2)
    assert [s.count_for(m) for m in (249, 250, 600)] == [4, 3, 2]
    assert s.max_count == 4


def test_parse_schedule_constant():
    s = parse_schedule(1)
    assert s.segments == () and s.count_for(0) == s.count_for(10 ** 9) == 1


@pytest.mark.parametrize("args", [(0,), (2, 10, 0, 20, 1), (4, 20, 3, 20, 2), (4, 30, 3, 20, 2),
                                  (1, 2), (1.5,), ()])
def test_parse_schedule_errors(args):
    with pytest.raises(ValueError):
        parse_schedule(*args)


def test_threads_per_worker():
    assert threads_per_worker(36, 12) == 3
    assert threads_per_worker(4, 3) == 1
    assert threads_per_worker(1, 4) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(threads=0)
    with pytest.raises(ValueError):
        SessionConfig(proba_epsilon=1.0)


def test_run_session_linear_system():
    R = PolyRing(["x", "y"])
    x, y = R.gens()
    res = run_session([x - 1, y - 2])
    assert res.complete
    assert res.basis == [y - 2, x - 1]
    assert res.primes_merged == 2


def test_run_session_rational_coefficients():
    R = PolyRing(["x", "y"])
    x, y = R.gens()
    res = run_session([x * 3 - y * 2, y ** 2 * 5 - Fraction(1, 7)])
    ref = buchberger([f.to_dict() for f in [x * 3 - y * 2, y ** 2 * 5 - Fraction(1, 7)]])
    assert [f.to_dict() for f in res.basis] == ref


def test_run_session_unit_ideal():
    R = PolyRing(["x", "y"])
    x, y = R.gens()
    res = run_session([x * y - 1, x])
    assert res.complete and res.basis == [R.one()]


def test_run_session_cyclic5_matches_oracle():
    system = generate_cyclic(5)
    res = run_session(system)
    assert res.complete
    assert [f.to_dict() for f in res.basis] == buchberger([f.to_dict() for f in system])


def test_prime_accounting_is_reproducible():
    system = generate_cyclic(5)
    a, b = run_session(system), run_session(system)
    assert a.primes_consumed == b.primes_consumed
    assert a.curve == b.curve


def test_empty_system_rejected():
    R = PolyRing(["x"])
    with pytest.raises(SessionError):
        run_session([R.zero()])


def test_image_hook_discards_perturbed_skeleton():
    system = generate_cyclic(5)
    ref = run_session(system)
    seen = []

    def perturb(out):
        seen.append(out.prime)
        if len(seen) == 2:
            img = out.image
            out = dataclasses.replace(out, image=ModularBasis(img.ring, img.polys[1:], img.prime))
        return out

    res = run_session(system, image_hook=perturb)
    assert seen[1] in res.discarded
    assert res.basis == ref.basis


# -- checkpoints ------------------------------------------------------------

def _state_with(gens):
    st = ReconstructionState(phase=1)
    st.reconstructed = list(gens)
    st.frontier = len(gens)
    st.primes_consumed = 7
    return st


def test_checkpoint_round_trip(tmp_path):
    system = generate_cyclic(4)
    res = run_session(system)
    path = tmp_path / "ckpt"
    archive_checkpoint(_state_with(res.basis), path, system)
    ck = read_checkpoint(path)
    assert ck.generators == res.basis
    assert ck.primes == 7 and ck.phase == 1 and ck.variables == ("x0", "x1", "x2", "x3")
    st = restore_checkpoint(path, system)
    assert st.phase == 2 and st.reinject_generators == res.basis
    assert path.read_bytes().startswith(b"GBMODULAR-CHECKPOINT 1\n")


def test_checkpoint_large_rationals(tmp_path):
    R = PolyRing(["a", "b"])
    a, b = R.gens()
    g = a - Fraction(-3 ** 80, 2 ** 70 + 1) * b
    system = [g]
    path = tmp_path / "ckpt"
    archive_checkpoint(_state_with([g]), path, system)
    assert read_checkpoint(path).generators == [g]


def test_checkpoint_rejects_other_system(tmp_path):
    system = generate_cyclic(4)
    path = tmp_path / "ckpt"
    archive_checkpoint(_state_with(system[:1]), path, system)
    edited = system[:-1] + [system[-1] + 2]
    with pytest.raises(CheckpointError, match="different input system"):
        restore_checkpoint(path, edited)


def test_checkpoint_truncated_and_version(tmp_path):
    system = generate_cyclic(4)
    path = tmp_path / "ckpt"
    archive_checkpoint(_state_with(system), path, system)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(CheckpointError, match="truncated"):
        read_checkpoint(path)
    path.write_bytes(data.replace(b"CHECKPOINT 1", b"CHECKPOINT 9", 1))
    with pytest.raises(CheckpointError, match="version"):
        read_checkpoint(path)
    path.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        read_checkpoint(path)


def test_resume_after_early_stop(tmp_path):
    system = generate_cyclic(6)
    full = run_session(system)
    path = tmp_path / "stage1"
    part = run_session(system, SessionConfig(reinject=ReinjectPolicy(early_stop=20), archive=path))
    assert not part.complete and 20 <= len(part.basis) < len(full.basis)
    assert part.basis == full.basis[:len(part.basis)]
    done = run_session(system, SessionConfig(resume=path))
    assert done.complete and done.basis == full.basis
    assert done.state.phase == 2


def test_forced_reinjection_gives_same_basis():
    system = generate_cyclic(6)
    full = run_session(system)
    res = run_session(system, SessionConfig(reinject=ReinjectPolicy(0.0, 0.0)))
    assert res.basis == full.basis
    assert res.state.phase >= 2


@pytest.mark.slow
def test_process_pool_schedule():
    system = generate_cyclic(5)
    ref = run_session(system)
    res = run_session(system, SessionConfig(threads=2, schedule=parse_schedule(2)))
    assert res.basis == ref.basis
    assert 1 <= res.max_threads_in_use <= 2
