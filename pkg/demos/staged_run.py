"""
Stopping early and resuming from an archive
===========================================

"""

import tempfile
from pathlib import Path

from gbmodular import ReinjectPolicy, SessionConfig, generate_cyclic, run_session

system = generate_cyclic(6)
archive = Path(tempfile.mkdtemp()) / "cyclic6_part"

# stage 1: stop as soon as 20 elements are known, and archive them
part = run_session(system, SessionConfig(reinject=ReinjectPolicy(early_stop=20),
                                         archive=archive))
print("stage 1:", len(part.basis), "of", part.basis_size, "elements, complete:", part.complete)

# the archive has a readable header followed by a binary body
header = archive.read_bytes().split(b"\n\n")[0].decode()
print(header)

# stage 2: the archived generators are added to the input and the run restarts
done = run_session(system, SessionConfig(resume=archive))
print("stage 2:", len(done.basis), "elements, phase", done.state.phase)

# same answer as one uninterrupted run
print("identical to a single run:", done.basis == run_session(system).basis)
