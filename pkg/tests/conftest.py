import random

import pytest

from campuscloud.config import SystemConfig
from campuscloud.core import CloudError
from campuscloud.system import System


def make_system(seed="test-seed", **cfg) -> System:
    return System.ephemeral(SystemConfig(rng_seed=seed, **cfg))


@pytest.fixture
def system():
    return make_system()


class Actors:
    """A system with one admin, one staff and one student session."""

    def __init__(self, sys_: System):
        self.system = sys_
        sys_.bootstrap_account("admin", ["Admin"], "pw-admin")
        self.admin = sys_.login("admin", "pw-admin")["token"]
        sys_.bootstrap_account("staff1", ["Staff"], "pw-staff")
        self.staff = sys_.login("staff1", "pw-staff")["token"]
        sys_.bootstrap_account("stu1", ["Student"], "pw-stu")
        self.student = sys_.login("stu1", "pw-stu")["token"]

    def add_nodes(self, n: int, capacity: int = 1 << 30) -> list[str]:
        return [self.system.add_node(self.admin, capacity)["node_id"] for _ in range(n)]


@pytest.fixture
def actors():
    a = Actors(make_system())
    a.add_nodes(3)
    return a


def student_record(uid="S1001", **over) -> dict:
    rec = {
        "contact": f"{uid}@university.example",
        "name": "Meera K",
        "program": "BSc CS",
        "user_id": uid,
        "year": 2,
    }
    rec.update(over)
    return rec


def run_mixed_workload(s: System, seed: int, ops: int = 60) -> None:
    """Seeded stream of direct system calls touching every mutation type."""
    rng = random.Random(seed)
    a = Actors(s)
    a.add_nodes(3)
    known = []
    down = None
    for i in range(ops):
        roll = rng.random()
        try:
            if roll < 0.35:
                uid = f"r{seed}x{i}"
                s.insert_student(a.staff, student_record(uid, year=rng.randint(1, 6)))
                known.append(uid)
            elif roll < 0.5 and known:
                s.update_student(a.staff, rng.choice(known),
                                 {"contact": f"c{i}@u.e", "year": rng.randint(1, 9)})
            elif roll < 0.65:
                s.submit_assignment(a.student, "cs101", rng.randbytes(rng.randint(1, 512)))
            elif roll < 0.75:
                s.upload_material(a.staff, "cs101", rng.randbytes(rng.randint(1, 512)))
            elif roll < 0.85:
                s.advance_clock(a.admin, rng.randint(1, 3))
            elif roll < 0.95:
                if down is None:
                    down = rng.choice(sorted(s.state.cluster.nodes))
                    s.set_node_status(a.admin, down, "Down")
                else:
                    s.set_node_status(a.admin, down, "Up")
                    down = None
            else:
                s.rereplicate(a.admin)
        except CloudError:
            pass
