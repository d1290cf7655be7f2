import json

from click.testing import CliRunner

from campuscloud.cli import main
from campuscloud.system import System
from conftest import student_record

MIB = 1 << 20


def run_cli(*args, expect_exit=0):
    runner = CliRunner()
    result = runner.invoke(main, list(args), catch_exceptions=False)
    assert result.exit_code == expect_exit, result.output
    return result.output


def init_dir(tmp_path, *extra):
    data = str(tmp_path / "data")
    run_cli("init", "--data", data, "--nodes", "2", "--rng-seed", "cli-seed", *extra)
    return data


class TestInitAndVerify:
    def test_init_reports_nodes(self, tmp_path):
        out = run_cli("init", "--data", str(tmp_path / "d"), "--nodes", "3")
        assert "added node n1" in out
        assert "added node n3" in out
        assert (tmp_path / "d" / "config.json").exists()
        assert (tmp_path / "d" / "events.log").exists()

    def test_init_twice_fails(self, tmp_path):
        data = init_dir(tmp_path)
        out = run_cli("init", "--data", data, expect_exit=1)
        assert "already holds" in out

    def test_verify_replay_fresh_store_exits_zero(self, tmp_path):
        data = init_dir(tmp_path)
        out = run_cli("verify-replay", "--data", data)
        assert "ok: True" in out

    def test_verify_replay_detects_tamper(self, tmp_path):
        data = init_dir(tmp_path)
        log = tmp_path / "data" / "events.log"
        raw = bytearray(log.read_bytes())
        idx = raw.find(b"admin")
        raw[idx] = ord("x")
        log.write_bytes(bytes(raw))
        out = run_cli("verify-replay", "--data", data, expect_exit=1)
        assert "ok: False" in out


class TestSeedAndBilling:
    def test_seed_creates_records(self, tmp_path):
        data = init_dir(tmp_path)
        out = run_cli("seed", "--data", data, "--students", "5", "--seed", "9")
        assert "seeded 5 student records" in out
        with System.open(data) as s:
            staff = s.login("staff1", "pw-staff1")["token"]
            rec = s.retrieve_student(staff, "s1000")
            assert rec["user_id"] == "s1000"

    def test_bill_prints_total_for_4mib_at_r2(self, tmp_path):
        data = init_dir(tmp_path)
        with System.open(data) as s:
            admin = s.login("admin", "admin")["token"]
            s.create_account(admin, "staff1", ["Staff"], "pw-staff1")
            staff = s.login("staff1", "pw-staff1")["token"]
            s.upload_material(staff, "cs101", b"\0" * (4 * MIB))
        out = run_cli("advance", "--ticks", "10", "--data", data)
        assert "tick is now 10" in out
        out = run_cli("bill", "--from", "0", "--to", "10", "--data", data)
        assert out.strip() == "80"

    def test_bill_full_statement(self, tmp_path):
        data = init_dir(tmp_path)
        run_cli("advance", "--ticks", "2", "--data", data)
        out = run_cli("bill", "--from", "0", "--to", "2", "--full", "--data", data)
        statement = json.loads(out)
        assert statement["total_micro_credits"] == 0
        assert set(statement["per_node"]) == {"n1", "n2"}


class TestFailureInjection:
    def test_fail_recover_rereplicate(self, tmp_path):
        data = init_dir(tmp_path, "--nodes", "3")
        with System.open(data) as s:
            admin = s.login("admin", "admin")["token"]
            s.create_account(admin, "staff1", ["Staff"], "pw-staff1")
            staff = s.login("staff1", "pw-staff1")["token"]
            s.insert_student(staff, student_record("S1001"))
        out = run_cli("fail-node", "n1", "--data", data)
        assert "n1 -> Down" in out
        out = run_cli("rereplicate", "--data", data)
        assert "repaired=" in out
        out = run_cli("recover-node", "n1", "--data", data)
        assert "n1 -> Up" in out

    def test_fail_unknown_node_nonzero_exit(self, tmp_path):
        data = init_dir(tmp_path)
        out = run_cli("fail-node", "n99", "--data", data, expect_exit=1)
        assert "NOT_FOUND" in out


class TestWorkload:
    def write_spec(self, tmp_path, seed=12, ops=40):
        spec = {"seed": seed, "ops": ops}
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        return str(path)

    def test_workload_runs_and_prints_digest(self, tmp_path):
        data = init_dir(tmp_path)
        spec = self.write_spec(tmp_path)
        out = run_cli("workload", "--spec", spec, "--data", data)
        assert "ops applied: 40" in out
        assert "final state digest: " in out
        run_cli("verify-replay", "--data", data)

    def test_same_seed_identical_digests(self, tmp_path):
        spec = self.write_spec(tmp_path, seed=33)
        d1 = str(tmp_path / "a")
        d2 = str(tmp_path / "b")
        for d in (d1, d2):
            run_cli("init", "--data", d, "--nodes", "2", "--rng-seed", "same")
        out1 = run_cli("workload", "--spec", spec, "--data", d1)
        out2 = run_cli("workload", "--spec", spec, "--data", d2)
        digest1 = out1.splitlines()[-1]
        digest2 = out2.splitlines()[-1]
        assert digest1 == digest2

    def test_different_seed_different_digest(self, tmp_path):
        d1 = str(tmp_path / "a")
        d2 = str(tmp_path / "b")
        for d in (d1, d2):
            run_cli("init", "--data", d, "--nodes", "2", "--rng-seed", "same")
        out1 = run_cli("workload", "--spec", self.write_spec(tmp_path, seed=1), "--data", d1)
        out2 = run_cli("workload", "--spec", self.write_spec(tmp_path, seed=2), "--data", d2)
        assert out1.splitlines()[-1] != out2.splitlines()[-1]

    def test_bad_mix_rejected(self, tmp_path):
        data = init_dir(tmp_path)
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"seed": 1, "ops": 10, "mix": {"retrieve": 30}}))
        out = run_cli("workload", "--spec", str(path), "--data", data, expect_exit=1)
        assert "VALIDATION" in out
