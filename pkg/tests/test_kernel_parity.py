"""The kernel selection flag must never change observable state.

Placement scores feed replica choices, which feed the event log and the
state digest - so running one identical workload under each kernel path
and comparing final digests proves the paths are interchangeable end to
end, not just numerically equal in isolation.
"""

import os
import subprocess
import sys

SCRIPT = """
from campuscloud import kernels
from campuscloud.system import System
from campuscloud.config import SystemConfig

s = System.ephemeral(SystemConfig(rng_seed="parity"))
s.bootstrap_account("admin", ["Admin"], "pw")
admin = s.login("admin", "pw")["token"]
for _ in range(4):
    s.add_node(admin, 1 << 30)
s.bootstrap_account("staff1", ["Staff"], "pw")
staff = s.login("staff1", "pw")["token"]
s.bootstrap_account("stu1", ["Student"], "pw")
stu = s.login("stu1", "pw")["token"]
for i in range(25):
    s.insert_student(staff, {
        "user_id": f"K{i:03d}", "name": f"Kernel {i}", "program": "BSc",
        "year": 1 + i % 5, "contact": f"k{i}@u.e",
    })
for i in range(10):
    s.submit_assignment(stu, "cs101", bytes([i]) * (1000 + 137 * i))
s.set_node_status(admin, "n2", "Down")
s.rereplicate(admin)
s.set_node_status(admin, "n2", "Up")
s.rereplicate(admin)
s.advance_clock(admin, 7)
print(("numba" if kernels.USING_NUMBA else "numpy"), s.state_digest())
"""


def run_with(kernel_flag: str) -> tuple[str, str]:
    env = dict(os.environ, CAMPUSCLOUD_KERNELS=kernel_flag)
    out = subprocess.run(
        [sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True
    )
    path, digest = out.stdout.split()
    return path, digest


def test_numpy_and_numba_paths_yield_identical_digests():
    numba_path, numba_digest = run_with("numba")
    numpy_path, numpy_digest = run_with("numpy")
    assert numba_path == "numba"
    assert numpy_path == "numpy"
    assert numba_digest == numpy_digest
